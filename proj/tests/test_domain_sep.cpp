#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ussl/domain_sep.hpp"
#include "ussl/rng.hpp"
#include "ussl/synthdata.hpp"

using namespace ussl;

namespace {

std::vector<double> bimodal_draws(double m0, double m1, std::size_t n_each, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g0(m0, 1.0), g1(m1, 1.0);
    std::vector<double> out;
    out.reserve(2 * n_each);
    for (std::size_t i = 0; i < n_each; ++i) out.push_back(g0(rng));
    for (std::size_t i = 0; i < n_each; ++i) out.push_back(g1(rng));
    return out;
}

}  // namespace

TEST(PretrainVae, ZeroEpochsLeavesParametersUntouched) {
    Vae v = Vae::create({6, 3, {}, {}, 1e-3}, 31);
    const Matrix before = v.store.value("enc/W0");
    auto rng = make_rng(31, Stream::vae_pretrain);
    pretrain_vae(v, Matrix(10, 6, 1.0), 0, 1e-3, rng);
    EXPECT_EQ(v.store.value("enc/W0"), before);
}

TEST(PretrainVae, LossTraceDecreasesOverFirstEpochs) {
    double first_sum = 0.0, last_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Scenario sc = generate_scenario(default_scenario_spec(seed));
        Vae v = Vae::create({sc.input_dim, 4, {}, {}, 1e-3}, seed);
        auto rng = make_rng(seed, Stream::vae_pretrain);
        const VaePretrainResult r =
            pretrain_vae(v, Scenario::features(sc.labeled, sc.input_dim), 10, 1e-3, rng);
        first_sum += r.loss_trace.front();
        last_sum += r.loss_trace.back();
    }
    EXPECT_LT(last_sum, first_sum);
}

TEST(PretrainVae, KnownDomainReconstructsBetterThanUnknown) {
    double known_sum = 0.0, unknown_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Scenario sc = generate_scenario(default_scenario_spec(seed));
        Vae v = Vae::create({sc.input_dim, 4, {}, {}, 1e-3}, seed);
        auto rng = make_rng(seed, Stream::vae_pretrain);
        pretrain_vae(v, Scenario::features(sc.labeled, sc.input_dim), 150, 1e-3, rng);
        // Held-out known-domain data: the val split. Unknown-domain data: the
        // UKD portion of the unlabeled pool.
        const std::vector<double> errs_known =
            recon_errors(v, Scenario::features(sc.val, sc.input_dim));
        std::vector<Sample> ukd;
        for (const Sample& s : sc.unlabeled)
            if (s.is_ukd) ukd.push_back(s);
        const std::vector<double> errs_ukd =
            recon_errors(v, Scenario::features(ukd, sc.input_dim));
        double mk = 0.0, mu = 0.0;
        for (double e : errs_known) mk += e;
        for (double e : errs_ukd) mu += e;
        known_sum += mk / errs_known.size();
        unknown_sum += mu / errs_ukd.size();
    }
    EXPECT_LT(known_sum, unknown_sum);
}

TEST(ReconErrors, NonNegativeAndDeterministic) {
    Vae v = Vae::create({6, 3, {}, {}, 1e-3}, 37);
    std::mt19937_64 rng(71);
    Matrix x(20, 6);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (double& val : x.data) val = dist(rng);
    const std::vector<double> a = recon_errors(v, x);
    const std::vector<double> b = recon_errors(v, x);
    EXPECT_EQ(a, b);
    for (double e : a) EXPECT_GE(e, 0.0);
}

TEST(FitGmm2, RecoversWellSeparatedComponents) {
    const std::vector<double> data = bimodal_draws(0.0, 5.0, 1000, 101);
    const GmmFit fit = fit_gmm2(data, 200, 1e-8, 0);
    const int lo = fit.mean[0] < fit.mean[1] ? 0 : 1;
    EXPECT_NEAR(fit.mean[lo], 0.0, 0.3);
    EXPECT_NEAR(fit.mean[1 - lo], 5.0, 0.3);
    EXPECT_NEAR(fit.weight[0], 0.5, 0.1);
    EXPECT_NEAR(fit.weight[1], 0.5, 0.1);
    EXPECT_EQ(fit.ukd_component, 1 - lo);
}

TEST(FitGmm2, LogLikelihoodTraceNeverDecreases) {
    const std::vector<double> data = bimodal_draws(1.0, 3.0, 400, 103);
    const GmmFit fit = fit_gmm2(data, 100, 1e-10, 0);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
        EXPECT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-9);
}

TEST(FitGmm2, SymmetricDataGivesBalancedWeights) {
    const std::vector<double> data = bimodal_draws(-2.0, 2.0, 1500, 107);
    const GmmFit fit = fit_gmm2(data, 200, 1e-8, 0);
    EXPECT_NEAR(fit.weight[0], 0.5, 0.05);
    EXPECT_NEAR(fit.weight[1], 0.5, 0.05);
}

TEST(FitGmm2, RejectsDegenerateInput) {
    EXPECT_THROW(fit_gmm2({2.0, 2.0, 2.0, 2.0}, 10, 1e-6, 0), std::invalid_argument);
    EXPECT_THROW(fit_gmm2({1.0, 2.0, 3.0}, 10, 1e-6, 0), std::invalid_argument);
}

TEST(FitGmm2, PureFunctionOfItsArguments) {
    const std::vector<double> data = bimodal_draws(0.0, 4.0, 200, 109);
    const GmmFit a = fit_gmm2(data, 50, 1e-8, 7);
    const GmmFit b = fit_gmm2(data, 50, 1e-8, 7);
    EXPECT_EQ(a.mean[0], b.mean[0]);
    EXPECT_EQ(a.variance[1], b.variance[1]);
    EXPECT_EQ(a.log_likelihood, b.log_likelihood);
}

TEST(PosteriorUkd, HalfAtMidpointOfSymmetricComponents) {
    GmmFit fit;
    fit.weight[0] = 0.5;
    fit.weight[1] = 0.5;
    fit.mean[0] = 1.0;
    fit.mean[1] = 3.0;
    fit.variance[0] = fit.variance[1] = 0.7;
    fit.ukd_component = 1;
    EXPECT_NEAR(posterior_ukd(fit, 2.0), 0.5, 1e-12);
}

TEST(PosteriorUkd, SaturatesNearComponentMeans) {
    GmmFit fit;
    fit.weight[0] = 0.5;
    fit.weight[1] = 0.5;
    fit.mean[0] = 0.0;
    fit.mean[1] = 10.0;
    fit.variance[0] = fit.variance[1] = 1.0;
    fit.ukd_component = 1;
    // Direct density-ratio values at the component means.
    EXPECT_GT(posterior_ukd(fit, 10.0), 0.99);
    EXPECT_LT(posterior_ukd(fit, 0.0), 0.01);
}

TEST(PosteriorUkd, MonotoneWhenVariancesMatch) {
    GmmFit fit;
    fit.weight[0] = 0.7;
    fit.weight[1] = 0.3;
    fit.mean[0] = 1.0;
    fit.mean[1] = 6.0;
    fit.variance[0] = fit.variance[1] = 2.0;
    fit.ukd_component = 1;
    double prev = -1.0;
    for (double x = -5.0; x <= 12.0; x += 0.25) {
        const double w = posterior_ukd(fit, x);
        EXPECT_GE(w, prev);
        prev = w;
    }
}

TEST(DomainLoss, MinimalWhenOutputsMatchTargets) {
    const Matrix yhat_l(5, 1, 1e-9);  // clamped to 1e-7
    Matrix yhat_u(4, 1);
    Matrix w_d(4, 1);
    yhat_u.data = {1e-9, 1.0 - 1e-9, 1e-9, 1.0 - 1e-9};
    w_d.data = {0.0, 1.0, 0.0, 1.0};
    EXPECT_LE(domain_loss(yhat_l, yhat_u, w_d), 1e-5);
}

TEST(DomainLoss, HalfOutputsNoUnlabeledGiveLogTwo) {
    EXPECT_NEAR(domain_loss(Matrix(3, 1, 0.5), Matrix(0, 1), Matrix(0, 1)), std::log(2.0), 1e-12);
}

TEST(DomainLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(73);
    std::uniform_real_distribution<double> dist(-1.5, 1.5);
    ParameterStore store;
    Matrix logits_l(6, 1), logits_u(5, 1), w_d(5, 1);
    for (double& v : logits_l.data) v = dist(rng);
    for (double& v : logits_u.data) v = dist(rng);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    for (double& v : w_d.data) v = unit(rng);
    store.add("l", logits_l);
    store.add("u", logits_u);
    const double err = fd_check(
        [&](Tape& t, ParameterStore& s) {
            Tape::Var yl = t.sigmoid(t.param(s, "l"));
            Tape::Var yu = t.sigmoid(t.param(s, "u"));
            return domain_loss(t, yl, yu, w_d);
        },
        store, 1e-5);
    EXPECT_LT(err, 1e-4);
}

TEST(DomainLoss, CalibratedMinimumAtSoftTarget) {
    // For fixed w_d, grid search over a scalar output must bottom out at
    // yhat = w_d.
    for (double w : {0.2, 0.5, 0.8}) {
        Matrix w_d(1, 1, w);
        double best_y = -1.0, best_loss = 1e18;
        for (double y = 0.005; y < 1.0; y += 0.005) {
            const double loss = domain_loss(Matrix(0, 1), Matrix(1, 1, y), w_d);
            if (loss < best_loss) {
                best_loss = loss;
                best_y = y;
            }
        }
        EXPECT_NEAR(best_y, w, 0.01);
    }
}

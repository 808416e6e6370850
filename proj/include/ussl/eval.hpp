// Metrics (rank AUC with half-counted ties, accuracy) and the multi-seed
// experiment pipeline that generates a scenario, pretrains the VAE, fits the
// mixture, trains, and aggregates a report.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ussl/domain_sep.hpp"
#include "ussl/models.hpp"
#include "ussl/outlier_score.hpp"
#include "ussl/synthdata.hpp"
#include "ussl/training.hpp"

namespace ussl {

// Probability that a random positive outranks a random negative, ties 1/2.
inline double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc_roc: scores/labels length mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l ? ++n_pos : ++n_neg);
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc_roc: both classes must be present");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double numer = 0.0;
    std::size_t neg_below = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        std::size_t pos_here = 0, neg_here = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] ? ++pos_here : ++neg_here);
            ++j;
        }
        numer += static_cast<double>(pos_here) * static_cast<double>(neg_below);
        numer += 0.5 * static_cast<double>(pos_here) * static_cast<double>(neg_here);
        neg_below += neg_here;
        i = j;
    }
    return numer / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("accuracy: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

struct PipelineConfig {
    TrainConfig train;
    std::size_t vae_epochs = 150;
    double vae_lr = 1e-3;
    std::size_t vae_batch = 32;
    std::size_t vae_latent = 4;
    double vae_kl_weight = 1e-3;
    std::size_t gmm_max_iters = 200;
    double gmm_tol = 1e-8;
    bool drop_unlabeled = false;  // the supervised-only baseline configuration

    // The degenerate configuration used as the supervised baseline.
    PipelineConfig erm_variant() const {
        PipelineConfig c = *this;
        c.train.beta_max = 0.0;
        c.train.alpha_max = 0.0;
        c.drop_unlabeled = true;
        return c;
    }
};

struct SeedResult {
    std::uint64_t seed = 0;
    double test_accuracy = 0.0;
    std::optional<double> auc_ukc;     // 1 - w_uc against is_ukc
    std::optional<double> auc_ukd_lre; // raw reconstruction error against is_ukd
    std::optional<double> auc_ukd_wd;  // mixture posterior against is_ukd
    LossBreakdown history;
    std::vector<double> final_w_uc;
    std::vector<double> final_w_d;
};

struct MetricStat {
    double mean = 0.0;
    double stddev = 0.0;
};

struct MetricReport {
    std::string schema = "ussl-report/1";
    std::vector<std::uint64_t> seeds;
    std::vector<SeedResult> per_seed;
    MetricStat accuracy;
    std::optional<MetricStat> auc_ukc;
    std::optional<MetricStat> auc_ukd_lre;
    std::optional<MetricStat> auc_ukd_wd;
    double runtime_seconds = 0.0;  // excluded from the determinism-checked body
};

namespace detail {

inline MetricStat stat_of(const std::vector<double>& xs) {
    MetricStat s;
    if (xs.empty()) return s;
    for (double v : xs) s.mean += v;
    s.mean /= static_cast<double>(xs.size());
    for (double v : xs) s.stddev += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(s.stddev / static_cast<double>(xs.size()));
    return s;
}

inline void check_unit_range(const std::vector<double>& xs, const std::string& what) {
    for (double v : xs)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::runtime_error("range invariant violated: " + what + " = " +
                                     std::to_string(v));
}

}  // namespace detail

// One full pipeline run for one seed. The scenario seed, model init, VAE
// pretraining and training streams all derive from `seed`.
inline SeedResult run_seed(const ScenarioSpec& base_spec, const PipelineConfig& config,
                           std::uint64_t seed) {
    ScenarioSpec spec = base_spec;
    spec.seed = seed;
    Scenario scenario = generate_scenario(spec);
    if (config.drop_unlabeled) scenario.unlabeled.clear();

    Vae vae = Vae::create({spec.input_dim, config.vae_latent, {}, {}, config.vae_kl_weight}, seed);
    auto rng_vae = make_rng(seed, Stream::vae_pretrain);
    const Matrix labeled_inputs = Scenario::features(scenario.labeled, scenario.input_dim);
    pretrain_vae(vae, labeled_inputs, config.vae_epochs, config.vae_lr, rng_vae, config.vae_batch);

    GmmFit gmm;
    if (!scenario.unlabeled.empty()) {
        const Matrix x_u = Scenario::features(scenario.unlabeled, scenario.input_dim);
        gmm = fit_gmm2(recon_errors(vae, x_u), config.gmm_max_iters, config.gmm_tol, seed);
    }

    ModelBundle bundle = ModelBundle::create(
        {spec.input_dim, 32, spec.k_known, {64}, {16}}, seed);
    TrainResult trained = train(scenario, bundle, vae, gmm, config.train);

    SeedResult out;
    out.seed = seed;
    out.history = std::move(trained.history);

    const Matrix x_test = Scenario::features(scenario.test, scenario.input_dim);
    const Matrix probs = classify(bundle, extract(bundle, x_test));
    for (std::size_t i = 0; i < probs.rows; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < probs.cols; ++j) row_sum += probs(i, j);
        if (std::fabs(row_sum - 1.0) > 1e-12)
            throw std::runtime_error("range invariant violated: softmax row sum " +
                                     std::to_string(row_sum));
    }
    std::vector<int> pred(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < probs.cols; ++j)
            if (probs(i, j) > probs(i, best)) best = j;
        pred[i] = static_cast<int>(best);
    }
    out.test_accuracy = accuracy(pred, Scenario::labels(scenario.test));

    if (!scenario.unlabeled.empty()) {
        std::vector<int> is_ukc(scenario.unlabeled.size()), is_ukd(scenario.unlabeled.size());
        for (std::size_t i = 0; i < scenario.unlabeled.size(); ++i) {
            is_ukc[i] = scenario.unlabeled[i].is_ukc ? 1 : 0;
            is_ukd[i] = scenario.unlabeled[i].is_ukd ? 1 : 0;
        }
        std::vector<double> outlier_score(trained.final_ukc.size());
        out.final_w_uc.resize(trained.final_ukc.size());
        for (std::size_t i = 0; i < trained.final_ukc.size(); ++i) {
            out.final_w_uc[i] = trained.final_ukc[i].w_uc;
            outlier_score[i] = 1.0 - trained.final_ukc[i].w_uc;
        }
        out.final_w_d = trained.w_d;
        detail::check_unit_range(out.final_w_uc, "w_uc");
        detail::check_unit_range(out.final_w_d, "w_d");
        const Matrix x_u = Scenario::features(scenario.unlabeled, scenario.input_dim);
        const bool both_ukc = std::count(is_ukc.begin(), is_ukc.end(), 1) > 0 &&
                              std::count(is_ukc.begin(), is_ukc.end(), 0) > 0;
        const bool both_ukd = std::count(is_ukd.begin(), is_ukd.end(), 1) > 0 &&
                              std::count(is_ukd.begin(), is_ukd.end(), 0) > 0;
        if (both_ukc) out.auc_ukc = auc_roc(outlier_score, is_ukc);
        if (both_ukd) {
            out.auc_ukd_lre = auc_roc(recon_errors(vae, x_u), is_ukd);
            out.auc_ukd_wd = auc_roc(trained.w_d, is_ukd);
        }
    }
    return out;
}

inline MetricReport run_experiment(const ScenarioSpec& spec, const PipelineConfig& config,
                                   const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("run_experiment: need at least one seed");
    const auto t0 = std::chrono::steady_clock::now();
    MetricReport report;
    report.seeds = seeds;
    std::vector<double> accs, ukcs, lres, wds;
    for (std::uint64_t seed : seeds) {
        SeedResult r = run_seed(spec, config, seed);
        accs.push_back(r.test_accuracy);
        if (r.auc_ukc) ukcs.push_back(*r.auc_ukc);
        if (r.auc_ukd_lre) lres.push_back(*r.auc_ukd_lre);
        if (r.auc_ukd_wd) wds.push_back(*r.auc_ukd_wd);
        report.per_seed.push_back(std::move(r));
    }
    report.accuracy = detail::stat_of(accs);
    if (ukcs.size() == seeds.size()) report.auc_ukc = detail::stat_of(ukcs);
    if (lres.size() == seeds.size()) report.auc_ukd_lre = detail::stat_of(lres);
    if (wds.size() == seeds.size()) report.auc_ukd_wd = detail::stat_of(wds);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// Deterministic report body: everything except timing. Used for files and for
// the byte-level determinism comparison.
inline std::string report_body_text(const MetricReport& report) {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };
    os << "schema: " << report.schema << "\n";
    os << "seeds:";
    for (auto s : report.seeds) os << " " << s;
    os << "\n\n";
    os << "seed  accuracy  auc_ukc  auc_ukd_lre  auc_ukd_wd\n";
    for (const SeedResult& r : report.per_seed) {
        os << r.seed << "  " << num(r.test_accuracy);
        os << "  " << (r.auc_ukc ? num(*r.auc_ukc) : std::string("n/a"));
        os << "  " << (r.auc_ukd_lre ? num(*r.auc_ukd_lre) : std::string("n/a"));
        os << "  " << (r.auc_ukd_wd ? num(*r.auc_ukd_wd) : std::string("n/a"));
        os << "\n";
    }
    os << "\naggregate (mean +/- std over seeds)\n";
    os << "accuracy: " << num(report.accuracy.mean) << " +/- " << num(report.accuracy.stddev)
       << "\n";
    if (report.auc_ukc)
        os << "auc_ukc: " << num(report.auc_ukc->mean) << " +/- " << num(report.auc_ukc->stddev)
           << "\n";
    if (report.auc_ukd_lre)
        os << "auc_ukd_lre: " << num(report.auc_ukd_lre->mean) << " +/- "
           << num(report.auc_ukd_lre->stddev) << "\n";
    if (report.auc_ukd_wd)
        os << "auc_ukd_wd: " << num(report.auc_ukd_wd->mean) << " +/- "
           << num(report.auc_ukd_wd->stddev) << "\n";
    return os.str();
}

}  // namespace ussl

// The repo's verification battery: nine checks covering gradient integrity,
// EM recovery, AUC correctness, detection quality on the default scenario,
// the supervised-baseline gain, trace equivalence, determinism, and range
// invariants. `reproduce` runs this battery and reports one line per check.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ussl/domain_sep.hpp"
#include "ussl/eval.hpp"
#include "ussl/models.hpp"
#include "ussl/outlier_score.hpp"
#include "ussl/synthdata.hpp"
#include "ussl/training.hpp"

namespace ussl {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

struct AcceptanceOutcome {
    std::vector<CriterionResult> criteria;
    MetricReport full_report;
    MetricReport erm_report;
    std::string full_body;
    std::string erm_body;

    bool all_pass() const {
        for (const CriterionResult& c : criteria)
            if (!c.pass) return false;
        return !criteria.empty();
    }
};

namespace acceptance_detail {

inline double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// O(n^2) pair counting, the independent route against the rank-based auc_roc.
inline double auc_pair_count(const std::vector<double>& scores, const std::vector<int>& labels) {
    double numer = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) {
            ++n_neg;
            continue;
        }
        ++n_pos;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) numer += 1.0;
            else if (scores[i] == scores[j]) numer += 0.5;
        }
    }
    return numer / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Plain supervised loop sharing only the shuffle-stream convention with the
// trainer; used to pin the degenerate-configuration equivalence.
inline std::vector<double> supervised_ce_trace(const Scenario& sc, const TrainConfig& cfg) {
    ModelBundle bundle =
        ModelBundle::create({sc.input_dim, 32, sc.k_known, {64}, {16}}, cfg.seed);
    const Matrix x = Scenario::features(sc.labeled, sc.input_dim);
    Matrix y(sc.labeled.size(), sc.k_known);
    for (std::size_t i = 0; i < sc.labeled.size(); ++i) y(i, sc.labeled[i].class_id) = 1.0;
    auto rng = make_rng(cfg.seed, Stream::train_shuffle_labeled);
    std::vector<std::size_t> order(sc.labeled.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<double> trace;
    for (std::size_t epoch = 0; epoch < cfg.total_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double ce_sum = 0.0;
        for (std::size_t step = 0; step < batches; ++step) {
            const std::size_t lo = step * cfg.batch_size;
            const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
            Matrix xb(hi - lo, x.cols), yb(hi - lo, y.cols);
            for (std::size_t i = lo; i < hi; ++i) {
                for (std::size_t j = 0; j < x.cols; ++j) xb(i - lo, j) = x(order[i], j);
                for (std::size_t j = 0; j < y.cols; ++j) yb(i - lo, j) = y(order[i], j);
            }
            Tape t;
            Tape::Var ce =
                t.cross_entropy(classify(t, bundle, extract(t, bundle, t.constant(xb))), yb);
            ce_sum += t.value(ce)(0, 0);
            t.backward(ce);
            sgd_step(bundle.store, cfg.lr);
        }
        trace.push_back(ce_sum / static_cast<double>(batches));
    }
    return trace;
}

inline CriterionResult check_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_name = "none";
    auto track = [&](const std::string& name, double err) {
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
    };

    ModelBundle b = ModelBundle::create({6, 16, 3, {24}, {12}}, 2024);
    std::mt19937_64 data_rng(555);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    Matrix xl(9, 6), xu(7, 6);
    for (double& v : xl.data) v = dist(data_rng);
    for (double& v : xu.data) v = dist(data_rng);
    Matrix targets(9, 3);
    for (std::size_t i = 0; i < 9; ++i) targets(i, i % 3) = 1.0;
    Matrix w_uc(7, 1), w_ud(7, 1);
    std::uniform_real_distribution<double> unit(0.1, 0.9);
    for (double& v : w_uc.data) v = unit(data_rng);
    for (double& v : w_ud.data) v = unit(data_rng);

    track("L_CE", fd_check(
                      [&](Tape& t, ParameterStore&) {
                          return t.cross_entropy(
                              classify(t, b, extract(t, b, t.constant(xl))), targets);
                      },
                      b.store, 1e-5));
    track("L_SSL", fd_check(
                       [&](Tape& t, ParameterStore&) {
                           auto rng = make_rng(9, Stream::train_augment);
                           return consistency_loss(t, b, xu, w_uc, {0.3, 0.1}, rng);
                       },
                       b.store, 1e-5));
    track("L_dom", fd_check(
                       [&](Tape& t, ParameterStore&) {
                           Tape::Var yl = discriminate_dom(t, b, extract(t, b, t.constant(xl)));
                           Tape::Var yu = discriminate_dom(t, b, extract(t, b, t.constant(xu)));
                           return domain_loss(t, yl, yu, w_ud);
                       },
                       b.store, 1e-5));
    track("L_adv_reversed", fd_check(
                                [&](Tape& t, ParameterStore&) {
                                    return adversarial_loss(t, b, xl, xu, w_ud, w_uc, 0.2);
                                },
                                b.store, 1e-5));
    track("overall", fd_check(
                         [&](Tape& t, ParameterStore&) {
                             Tape::Var ce = t.cross_entropy(
                                 classify(t, b, extract(t, b, t.constant(xl))), targets);
                             auto rng = make_rng(11, Stream::train_augment);
                             Tape::Var ssl = consistency_loss(t, b, xu, w_uc, {0.3, 0.1}, rng);
                             Tape::Var adv = adversarial_loss(t, b, xl, xu, w_ud, w_uc, 0.15);
                             return t.add(t.add(ce, t.scale(ssl, 0.8)), adv);
                         },
                         b.store, 1e-5));
    {
        Vae vae = Vae::create({6, 3, {}, {}, 1e-3}, 2025);
        Matrix eps(5, 3);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (double& v : eps.data) v = gauss(data_rng);
        Matrix x(5, 6);
        for (double& v : x.data) v = dist(data_rng);
        track("VAE", fd_check(
                         [&](Tape& t, ParameterStore&) { return vae_graph(t, vae, x, &eps).loss; },
                         vae.store, 1e-5));
    }

    const double secs = elapsed_s(t0);
    CriterionResult r{1, "gradient integrity", worst < 1e-4 && secs < 60.0,
                      "max fd error " + fmt(worst) + " (worst: " + worst_name + "), " +
                          fmt(secs) + "s"};
    return r;
}

inline CriterionResult check_em() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> g0(0.0, 1.0), g1(5.0, 1.0);
    std::vector<double> data;
    data.reserve(2000);
    for (int i = 0; i < 1000; ++i) data.push_back(g0(rng));
    for (int i = 0; i < 1000; ++i) data.push_back(g1(rng));
    const GmmFit fit = fit_gmm2(data, 300, 1e-10, 0);
    const int lo = fit.mean[0] < fit.mean[1] ? 0 : 1;
    bool monotone = true;
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
        if (fit.log_likelihood[i] < fit.log_likelihood[i - 1]) monotone = false;
    const double secs = elapsed_s(t0);
    const bool pass = std::fabs(fit.mean[lo] - 0.0) <= 0.3 &&
                      std::fabs(fit.mean[1 - lo] - 5.0) <= 0.3 &&
                      std::fabs(fit.weight[0] - 0.5) <= 0.1 &&
                      std::fabs(fit.weight[1] - 0.5) <= 0.1 && monotone && secs < 5.0;
    return {2, "EM correctness",
            pass,
            "means (" + fmt(fit.mean[lo]) + ", " + fmt(fit.mean[1 - lo]) + "), weights (" +
                fmt(fit.weight[0]) + ", " + fmt(fit.weight[1]) + "), trace " +
                (monotone ? "monotone" : "NOT monotone") + ", " + fmt(secs) + "s"};
}

inline CriterionResult check_auc_oracle() {
    std::mt19937_64 rng(777);
    std::uniform_int_distribution<int> label(0, 1);
    std::uniform_int_distribution<int> level(0, 9);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> scores(50);
        std::vector<int> labels(50);
        for (std::size_t i = 0; i < 50; ++i) {
            scores[i] = 0.1 * level(rng);
            labels[i] = label(rng);
        }
        labels[0] = 1;
        labels[1] = 0;
        if (auc_roc(scores, labels) != auc_pair_count(scores, labels)) ++mismatches;
    }
    return {3, "AUC oracle equivalence", mismatches == 0,
            std::to_string(100 - mismatches) + "/100 instances exactly equal"};
}

inline CriterionResult check_erm_trace(const ScenarioSpec& spec) {
    Scenario sc = generate_scenario(spec);
    sc.unlabeled.clear();
    TrainConfig cfg;
    cfg.total_epochs = 20;
    cfg.warmup_epochs = 8;
    cfg.beta_max = 0.0;
    cfg.alpha_max = 0.0;
    cfg.seed = 91;
    Vae vae = Vae::create({sc.input_dim, 4, {}, {}, 1e-3}, 91);
    GmmFit gmm;
    ModelBundle bundle = ModelBundle::create({sc.input_dim, 32, sc.k_known, {64}, {16}}, 91);
    const TrainResult result = train(sc, bundle, vae, gmm, cfg);
    const std::vector<double> reference = supervised_ce_trace(sc, cfg);
    bool identical = result.history.size() == reference.size();
    std::size_t first_diff = reference.size();
    if (identical)
        for (std::size_t e = 0; e < reference.size(); ++e)
            if (result.history[e].l_ce != reference[e]) {
                identical = false;
                first_diff = e;
                break;
            }
    return {7, "ERM equivalence", identical,
            identical ? "per-epoch CE trace bit-identical over " +
                            std::to_string(reference.size()) + " epochs"
                      : "trace diverges at epoch " + std::to_string(first_diff)};
}

inline CriterionResult check_ranges(const MetricReport& report) {
    std::size_t checked = 0;
    bool ok = true;
    for (const SeedResult& r : report.per_seed) {
        for (double w : r.final_w_uc) {
            ok = ok && w >= 0.0 && w <= 1.0;
            ++checked;
        }
        for (double w : r.final_w_d) {
            ok = ok && w >= 0.0 && w <= 1.0;
            ++checked;
        }
    }
    // Fresh softmax rows at extreme logits.
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> dist(-40.0, 40.0);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix logits(3, 5);
        for (double& v : logits.data) v = dist(rng);
        const Matrix p = softmax_rows(logits);
        for (std::size_t i = 0; i < p.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < p.cols; ++j) {
                s += p(i, j);
                ok = ok && p(i, j) >= 0.0 && p(i, j) <= 1.0;
            }
            ok = ok && std::fabs(s - 1.0) <= 1e-12;
            ++checked;
        }
    }
    return {9, "range invariants", ok, std::to_string(checked) + " values checked"};
}

}  // namespace acceptance_detail

// Runs the full battery. The experiment portion is executed twice so the
// determinism check compares two complete report bodies.
inline AcceptanceOutcome run_acceptance(std::size_t n_seeds = 5) {
    using namespace acceptance_detail;
    AcceptanceOutcome out;
    const ScenarioSpec spec = default_scenario_spec(1);
    std::vector<std::uint64_t> seeds;
    for (std::size_t s = 1; s <= n_seeds; ++s) seeds.push_back(s);
    const PipelineConfig config;

    out.criteria.push_back(check_gradients());
    out.criteria.push_back(check_em());
    out.criteria.push_back(check_auc_oracle());

    const auto t_full = std::chrono::steady_clock::now();
    out.full_report = run_experiment(spec, config, seeds);
    const double full_secs = elapsed_s(t_full);
    out.full_body = report_body_text(out.full_report);

    const auto t_erm = std::chrono::steady_clock::now();
    out.erm_report = run_experiment(spec, config.erm_variant(), seeds);
    const double erm_secs = elapsed_s(t_erm);
    out.erm_body = report_body_text(out.erm_report);

    {
        const double auc = out.full_report.auc_ukc ? out.full_report.auc_ukc->mean : 0.0;
        out.criteria.push_back({4, "UKC detection",
                                auc >= 0.80 && full_secs < 300.0,
                                "mean AUC(1-w_uc vs is_ukc) " + fmt(auc) + " over " +
                                    std::to_string(n_seeds) + " seeds, " + fmt(full_secs) + "s"});
    }
    {
        const double lre = out.full_report.auc_ukd_lre ? out.full_report.auc_ukd_lre->mean : 0.0;
        const double wd = out.full_report.auc_ukd_wd ? out.full_report.auc_ukd_wd->mean : 0.0;
        out.criteria.push_back({5, "UKD detection",
                                lre >= 0.85 && wd >= lre - 0.02,
                                "mean AUC(L_re) " + fmt(lre) + ", mean AUC(w_d) " + fmt(wd)});
    }
    {
        const double gain = out.full_report.accuracy.mean - out.erm_report.accuracy.mean;
        out.criteria.push_back(
            {6, "end-to-end gain over supervised baseline",
             gain >= 0.02 && full_secs + erm_secs < 900.0,
             "accuracy " + fmt(out.full_report.accuracy.mean) + " vs " +
                 fmt(out.erm_report.accuracy.mean) + " (gain " + fmt(gain) + ")"});
    }

    out.criteria.push_back(check_erm_trace(spec));

    {
        const MetricReport full2 = run_experiment(spec, config, seeds);
        const MetricReport erm2 = run_experiment(spec, config.erm_variant(), seeds);
        const bool identical = report_body_text(full2) == out.full_body &&
                               report_body_text(erm2) == out.erm_body;
        out.criteria.push_back({8, "determinism", identical,
                                identical ? "report bodies byte-identical across reruns"
                                          : "report bodies differ across reruns"});
    }

    out.criteria.push_back(check_ranges(out.full_report));

    std::sort(out.criteria.begin(), out.criteria.end(),
              [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
    return out;
}

inline std::string acceptance_report_text(const AcceptanceOutcome& out) {
    std::ostringstream os;
    for (const CriterionResult& c : out.criteria)
        os << "[criterion " << c.id << "] " << (c.pass ? "PASS" : "FAIL") << " " << c.name << ": "
           << c.detail << "\n";
    os << "overall: " << (out.all_pass() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

}  // namespace ussl

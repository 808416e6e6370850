// Command-line entry point wiring the pipeline:
//   gen-data -> pretrain-vae -> train -> score -> evaluate
// plus `reproduce`, which runs the verification battery end to end.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ussl/acceptance.hpp"
#include "ussl/config.hpp"
#include "ussl/domain_sep.hpp"
#include "ussl/eval.hpp"
#include "ussl/manifest.hpp"
#include "ussl/models.hpp"
#include "ussl/outlier_score.hpp"
#include "ussl/synthdata.hpp"
#include "ussl/training.hpp"
#include "ussl/version.hpp"

namespace fs = std::filesystem;
using namespace ussl;

namespace {

struct ManifestScope {
    RunManifest manifest;
    std::string path;

    ManifestScope(std::string subcommand, const std::string& out_dir) {
        fs::create_directories(out_dir);
        manifest.subcommand = std::move(subcommand);
        manifest.started_at = detail::utc_now();
        path = (fs::path(out_dir) / "manifest.json").string();
        write_manifest(manifest, path);
    }

    void finish(bool ok) {
        manifest.finished_at = detail::utc_now();
        manifest.status = ok ? "ok" : "error";
        write_manifest(manifest, path);
    }
};

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw std::runtime_error("input file not found: " + path);
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

PipelineConfig resolve_config(const std::string& config_path,
                              const std::vector<std::string>& sets, std::uint64_t seed) {
    PipelineConfig cfg;
    if (!config_path.empty()) {
        require_file(config_path);
        cfg = load_pipeline_config(config_path);
    }
    apply_overrides(cfg, sets);
    cfg.train.seed = seed;
    return cfg;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << body;
}

int cmd_gen_data(const std::string& spec_path, std::uint64_t seed, const std::string& out_dir) {
    ManifestScope scope("gen-data", out_dir);
    try {
        ScenarioSpec spec = spec_path.empty() ? default_scenario_spec(seed)
                                              : load_scenario_spec(spec_path);
        spec.seed = seed;
        if (!spec_path.empty()) scope.manifest.inputs.push_back(spec_path);
        scope.manifest.seeds = {seed};

        const Scenario scenario = generate_scenario(spec);
        const std::string csv_path = (fs::path(out_dir) / "scenario.csv").string();
        const std::string spec_out = (fs::path(out_dir) / "scenario_spec.txt").string();
        save_csv(scenario, csv_path);
        save_scenario_spec(spec, spec_out);
        scope.manifest.outputs = {csv_path, spec_out};
        scope.finish(true);
        std::cout << "wrote " << csv_path << " (" <<
            scenario.labeled.size() + scenario.unlabeled.size() + scenario.val.size() +
                scenario.test.size()
                  << " samples)\n";
        return 0;
    } catch (...) {
        scope.finish(false);
        throw;
    }
}

int cmd_pretrain_vae(const std::string& scenario_path, const std::string& config_path,
                     const std::vector<std::string>& sets, std::uint64_t seed,
                     const std::string& out_dir) {
    ManifestScope scope("pretrain-vae", out_dir);
    try {
        require_file(scenario_path);
        const PipelineConfig cfg = resolve_config(config_path, sets, seed);
        scope.manifest.inputs.push_back(scenario_path);
        scope.manifest.seeds = {seed};
        scope.manifest.config = config_to_map(cfg);

        const Scenario scenario = load_csv(scenario_path);
        Vae vae = Vae::create(
            {scenario.input_dim, cfg.vae_latent, {}, {}, cfg.vae_kl_weight}, seed);
        auto rng = make_rng(seed, Stream::vae_pretrain);
        const VaePretrainResult pre =
            pretrain_vae(vae, Scenario::features(scenario.labeled, scenario.input_dim),
                         cfg.vae_epochs, cfg.vae_lr, rng, cfg.vae_batch);

        const std::string params_path = (fs::path(out_dir) / "vae_params.txt").string();
        save_parameters(vae.store, params_path);
        scope.manifest.outputs.push_back(params_path);

        const std::string trace_path = (fs::path(out_dir) / "vae_loss_trace.csv").string();
        {
            std::ofstream out(trace_path);
            out << "epoch,loss\n";
            for (std::size_t e = 0; e < pre.loss_trace.size(); ++e)
                out << e << "," << fmt17(pre.loss_trace[e]) << "\n";
        }
        scope.manifest.outputs.push_back(trace_path);

        if (!scenario.unlabeled.empty()) {
            const Matrix x_u = Scenario::features(scenario.unlabeled, scenario.input_dim);
            const GmmFit gmm =
                fit_gmm2(recon_errors(vae, x_u), cfg.gmm_max_iters, cfg.gmm_tol, seed);
            const UkdScores scores = score_unlabeled_domain(vae, gmm, x_u);
            const std::string scores_path = (fs::path(out_dir) / "ukd_scores.csv").string();
            std::ofstream out(scores_path);
            out << "index,L_re,w_d,is_ukd\n";
            for (std::size_t i = 0; i < scores.l_re.size(); ++i)
                out << i << "," << fmt17(scores.l_re[i]) << "," << fmt17(scores.w_d[i]) << ","
                    << (scenario.unlabeled[i].is_ukd ? 1 : 0) << "\n";
            scope.manifest.outputs.push_back(scores_path);
        }
        scope.finish(true);
        std::cout << "wrote " << params_path << "\n";
        return 0;
    } catch (...) {
        scope.finish(false);
        throw;
    }
}

int cmd_train(const std::string& scenario_path, const std::string& config_path,
              const std::vector<std::string>& sets, std::uint64_t seed,
              const std::string& vae_params_path, const std::string& out_dir) {
    ManifestScope scope("train", out_dir);
    try {
        require_file(scenario_path);
        const PipelineConfig cfg = resolve_config(config_path, sets, seed);
        scope.manifest.inputs.push_back(scenario_path);
        scope.manifest.seeds = {seed};
        scope.manifest.config = config_to_map(cfg);

        Scenario scenario = load_csv(scenario_path);
        if (cfg.drop_unlabeled) scenario.unlabeled.clear();

        Vae vae = [&]() {
            if (!vae_params_path.empty()) {
                require_file(vae_params_path);
                scope.manifest.inputs.push_back(vae_params_path);
                return load_vae(vae_params_path, cfg.vae_kl_weight);
            }
            Vae fresh = Vae::create(
                {scenario.input_dim, cfg.vae_latent, {}, {}, cfg.vae_kl_weight}, seed);
            auto rng = make_rng(seed, Stream::vae_pretrain);
            pretrain_vae(fresh, Scenario::features(scenario.labeled, scenario.input_dim),
                         cfg.vae_epochs, cfg.vae_lr, rng, cfg.vae_batch);
            return fresh;
        }();

        GmmFit gmm;
        if (!scenario.unlabeled.empty()) {
            const Matrix x_u = Scenario::features(scenario.unlabeled, scenario.input_dim);
            gmm = fit_gmm2(recon_errors(vae, x_u), cfg.gmm_max_iters, cfg.gmm_tol, seed);
        }

        ModelBundle bundle = ModelBundle::create(
            {scenario.input_dim, 32, scenario.k_known, {64}, {16}}, seed);
        const TrainResult result = train(scenario, bundle, vae, gmm, cfg.train);

        const std::string params_path = (fs::path(out_dir) / "params.txt").string();
        save_parameters(bundle.store, params_path);
        const std::string history_path = (fs::path(out_dir) / "history.csv").string();
        {
            std::ofstream out(history_path);
            out << "epoch,l_ce,l_ssl,l_adv,l_dom,alpha,beta,mean_w_uc,mean_w_d\n";
            for (std::size_t e = 0; e < result.history.size(); ++e) {
                const EpochStats& s = result.history[e];
                out << e << "," << fmt17(s.l_ce) << "," << fmt17(s.l_ssl) << ","
                    << fmt17(s.l_adv) << "," << fmt17(s.l_dom) << "," << fmt17(s.alpha) << ","
                    << fmt17(s.beta) << "," << fmt17(s.mean_w_uc) << "," << fmt17(s.mean_w_d)
                    << "\n";
            }
        }
        const std::string weights_path = (fs::path(out_dir) / "weights.csv").string();
        {
            std::ofstream out(weights_path);
            out << "index,w_uc,w_d,is_ukc,is_ukd\n";
            for (std::size_t i = 0; i < result.final_ukc.size(); ++i)
                out << i << "," << fmt17(result.final_ukc[i].w_uc) << ","
                    << fmt17(result.w_d[i]) << "," << (scenario.unlabeled[i].is_ukc ? 1 : 0)
                    << "," << (scenario.unlabeled[i].is_ukd ? 1 : 0) << "\n";
        }
        scope.manifest.outputs = {params_path, history_path, weights_path};
        scope.finish(true);
        std::cout << "wrote " << params_path << "\n";
        return 0;
    } catch (...) {
        scope.finish(false);
        throw;
    }
}

int cmd_score(const std::string& scenario_path, const std::string& params_path,
              const std::vector<std::string>& sets, std::uint64_t seed,
              const std::string& out_dir) {
    ManifestScope scope("score", out_dir);
    try {
        require_file(scenario_path);
        require_file(params_path);
        PipelineConfig cfg;
        apply_overrides(cfg, sets);
        scope.manifest.inputs = {scenario_path, params_path};
        scope.manifest.seeds = {seed};
        scope.manifest.config = config_to_map(cfg);

        const Scenario scenario = load_csv(scenario_path);
        if (scenario.unlabeled.empty())
            throw std::runtime_error("score: scenario has no unlabeled samples");
        const ModelBundle bundle = load_model_bundle(params_path);
        const Matrix feats_l =
            extract(bundle, Scenario::features(scenario.labeled, scenario.input_dim));
        const PrototypeSet protos =
            compute_prototypes(feats_l, Scenario::labels(scenario.labeled), scenario.k_known);
        auto rng = make_rng(seed, Stream::outlier_score);
        const std::vector<UkcScore> scores =
            score_unlabeled(bundle, protos, scenario.unlabeled, cfg.train.aug, rng);

        const std::string scores_path = (fs::path(out_dir) / "ukc_scores.csv").string();
        {
            std::ofstream out(scores_path);
            out << "index,d_avg,p_ood,w_uc,is_ukc\n";
            for (std::size_t i = 0; i < scores.size(); ++i)
                out << i << "," << fmt17(scores[i].d_avg) << "," << fmt17(scores[i].p_ood) << ","
                    << fmt17(scores[i].w_uc) << "," << (scenario.unlabeled[i].is_ukc ? 1 : 0)
                    << "\n";
        }
        scope.manifest.outputs = {scores_path};
        scope.finish(true);
        std::cout << "wrote " << scores_path << "\n";
        return 0;
    } catch (...) {
        scope.finish(false);
        throw;
    }
}

int cmd_evaluate(const std::string& spec_path, const std::string& config_path,
                 const std::vector<std::string>& sets, std::size_t n_seeds,
                 std::uint64_t first_seed, const std::string& out_dir) {
    ManifestScope scope("evaluate", out_dir);
    try {
        const PipelineConfig cfg = resolve_config(config_path, sets, first_seed);
        ScenarioSpec spec =
            spec_path.empty() ? default_scenario_spec(1) : load_scenario_spec(spec_path);
        if (!spec_path.empty()) {
            require_file(spec_path);
            scope.manifest.inputs.push_back(spec_path);
        }
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(first_seed + i);
        scope.manifest.seeds = seeds;
        scope.manifest.config = config_to_map(cfg);

        const MetricReport report = run_experiment(spec, cfg, seeds);

        const std::string text_path = (fs::path(out_dir) / "report.txt").string();
        write_text(text_path, report_body_text(report));
        const std::string json_path = (fs::path(out_dir) / "report.json").string();
        {
            nlohmann::json j;
            j["schema"] = report.schema;
            j["seeds"] = report.seeds;
            auto stat = [](const MetricStat& s) {
                return nlohmann::json{{"mean", s.mean}, {"std", s.stddev}};
            };
            for (const SeedResult& r : report.per_seed) {
                nlohmann::json row;
                row["seed"] = r.seed;
                row["accuracy"] = r.test_accuracy;
                if (r.auc_ukc) row["auc_ukc"] = *r.auc_ukc;
                if (r.auc_ukd_lre) row["auc_ukd_lre"] = *r.auc_ukd_lre;
                if (r.auc_ukd_wd) row["auc_ukd_wd"] = *r.auc_ukd_wd;
                j["per_seed"].push_back(row);
            }
            j["aggregate"]["accuracy"] = stat(report.accuracy);
            if (report.auc_ukc) j["aggregate"]["auc_ukc"] = stat(*report.auc_ukc);
            if (report.auc_ukd_lre) j["aggregate"]["auc_ukd_lre"] = stat(*report.auc_ukd_lre);
            if (report.auc_ukd_wd) j["aggregate"]["auc_ukd_wd"] = stat(*report.auc_ukd_wd);
            j["timing"] = {{"runtime_seconds", report.runtime_seconds}};
            std::ofstream out(json_path);
            out << j.dump(2) << "\n";
        }
        scope.manifest.outputs = {text_path, json_path};
        scope.finish(true);
        std::cout << report_body_text(report);
        return 0;
    } catch (...) {
        scope.finish(false);
        throw;
    }
}

int cmd_reproduce(std::size_t n_seeds, const std::string& out_dir) {
    ManifestScope scope("reproduce", out_dir);
    try {
        scope.manifest.config = config_to_map(PipelineConfig{});
        for (std::size_t s = 1; s <= n_seeds; ++s) scope.manifest.seeds.push_back(s);

        const AcceptanceOutcome outcome = run_acceptance(n_seeds);
        const std::string report_path = (fs::path(out_dir) / "acceptance_report.txt").string();
        write_text(report_path, acceptance_report_text(outcome));
        const std::string full_path = (fs::path(out_dir) / "report_full.txt").string();
        write_text(full_path, outcome.full_body);
        const std::string erm_path = (fs::path(out_dir) / "report_erm.txt").string();
        write_text(erm_path, outcome.erm_body);
        scope.manifest.outputs = {report_path, full_path, erm_path};
        scope.finish(true);
        std::cout << acceptance_report_text(outcome);
        return outcome.all_pass() ? 0 : 1;
    } catch (...) {
        scope.finish(false);
        throw;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"universal semi-supervised learning testbed"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string spec_path, scenario_path, config_path, params_path, vae_params_path, out_dir;
    std::vector<std::string> sets;
    std::uint64_t seed = 1;
    std::size_t n_seeds = 5;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic scenario CSV");
    gen->add_option("--spec", spec_path, "scenario description file (default: built-in)");
    gen->add_option("--seed", seed, "root seed");
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* pre = app.add_subcommand("pretrain-vae",
                                   "pretrain the VAE on labeled data and score unlabeled data");
    pre->add_option("--scenario", scenario_path, "scenario CSV")->required();
    pre->add_option("--config", config_path, "pipeline config file");
    pre->add_option("--set", sets, "config override key=value");
    pre->add_option("--seed", seed, "root seed");
    pre->add_option("--out", out_dir, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "run the full training loop");
    train_cmd->add_option("--scenario", scenario_path, "scenario CSV")->required();
    train_cmd->add_option("--config", config_path, "pipeline config file");
    train_cmd->add_option("--set", sets, "config override key=value");
    train_cmd->add_option("--seed", seed, "root seed");
    train_cmd->add_option("--vae-params", vae_params_path,
                          "reuse a pretrained VAE parameter file");
    train_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* score = app.add_subcommand("score", "score unlabeled samples with a trained model");
    score->add_option("--scenario", scenario_path, "scenario CSV")->required();
    score->add_option("--params", params_path, "trained model parameter file")->required();
    score->add_option("--set", sets, "config override key=value");
    score->add_option("--seed", seed, "root seed");
    score->add_option("--out", out_dir, "output directory")->required();

    auto* eval_cmd = app.add_subcommand("evaluate", "multi-seed experiment with a report");
    eval_cmd->add_option("--spec", spec_path, "scenario description file (default: built-in)");
    eval_cmd->add_option("--config", config_path, "pipeline config file");
    eval_cmd->add_option("--set", sets, "config override key=value");
    eval_cmd->add_option("--seeds", n_seeds, "number of seeds");
    eval_cmd->add_option("--first-seed", seed, "first seed value");
    eval_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* rep = app.add_subcommand("reproduce", "run the full verification battery");
    rep->add_option("--seeds", n_seeds, "number of seeds");
    rep->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(spec_path, seed, out_dir);
        if (pre->parsed()) return cmd_pretrain_vae(scenario_path, config_path, sets, seed, out_dir);
        if (train_cmd->parsed())
            return cmd_train(scenario_path, config_path, sets, seed, vae_params_path, out_dir);
        if (score->parsed()) return cmd_score(scenario_path, params_path, sets, seed, out_dir);
        if (eval_cmd->parsed())
            return cmd_evaluate(spec_path, config_path, sets, n_seeds, seed, out_dir);
        if (rep->parsed()) return cmd_reproduce(n_seeds, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

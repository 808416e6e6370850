// Plain key = value pipeline configuration files plus --set style overrides,
// resolved into a PipelineConfig and echoed into run manifests.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ussl/eval.hpp"

namespace ussl {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace detail

inline void apply_config_key(PipelineConfig& cfg, const std::string& key,
                             const std::string& value) {
    auto num = [&]() {
        try {
            return std::stod(value);
        } catch (...) {
            throw std::runtime_error("config: bad number for " + key + ": '" + value + "'");
        }
    };
    auto flag = [&]() {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        throw std::runtime_error("config: bad flag for " + key + ": '" + value + "'");
    };
    if (key == "total_epochs") cfg.train.total_epochs = static_cast<std::size_t>(num());
    else if (key == "warmup_epochs") cfg.train.warmup_epochs = static_cast<std::size_t>(num());
    else if (key == "lr") cfg.train.lr = num();
    else if (key == "batch_size") cfg.train.batch_size = static_cast<std::size_t>(num());
    else if (key == "alpha_max") cfg.train.alpha_max = num();
    else if (key == "beta_max") cfg.train.beta_max = num();
    else if (key == "aug_noise_std") cfg.train.aug.noise_std = num();
    else if (key == "aug_drop_prob") cfg.train.aug.drop_prob = num();
    else if (key == "vae_epochs") cfg.vae_epochs = static_cast<std::size_t>(num());
    else if (key == "vae_lr") cfg.vae_lr = num();
    else if (key == "vae_batch") cfg.vae_batch = static_cast<std::size_t>(num());
    else if (key == "vae_latent") cfg.vae_latent = static_cast<std::size_t>(num());
    else if (key == "vae_kl_weight") cfg.vae_kl_weight = num();
    else if (key == "gmm_max_iters") cfg.gmm_max_iters = static_cast<std::size_t>(num());
    else if (key == "gmm_tol") cfg.gmm_tol = num();
    else if (key == "drop_unlabeled") cfg.drop_unlabeled = flag();
    else throw std::runtime_error("config: unknown key '" + key + "'");
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    PipelineConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        apply_config_key(cfg, detail::trim(line.substr(0, eq)),
                         detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

// "key=value" strings from the command line, applied after any file.
inline void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: --set expects key=value, got '" + s + "'");
        apply_config_key(cfg, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
    }
}

inline std::map<std::string, std::string> config_to_map(const PipelineConfig& cfg) {
    auto str = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };
    return {
        {"total_epochs", std::to_string(cfg.train.total_epochs)},
        {"warmup_epochs", std::to_string(cfg.train.warmup_epochs)},
        {"lr", str(cfg.train.lr)},
        {"batch_size", std::to_string(cfg.train.batch_size)},
        {"alpha_max", str(cfg.train.alpha_max)},
        {"beta_max", str(cfg.train.beta_max)},
        {"aug_noise_std", str(cfg.train.aug.noise_std)},
        {"aug_drop_prob", str(cfg.train.aug.drop_prob)},
        {"vae_epochs", std::to_string(cfg.vae_epochs)},
        {"vae_lr", str(cfg.vae_lr)},
        {"vae_batch", std::to_string(cfg.vae_batch)},
        {"vae_latent", std::to_string(cfg.vae_latent)},
        {"vae_kl_weight", str(cfg.vae_kl_weight)},
        {"gmm_max_iters", std::to_string(cfg.gmm_max_iters)},
        {"gmm_tol", str(cfg.gmm_tol)},
        {"drop_unlabeled", cfg.drop_unlabeled ? "true" : "false"},
    };
}

}  // namespace ussl

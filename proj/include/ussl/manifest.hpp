// Run manifests: enough metadata next to every output directory to rerun the
// command exactly. Written once when a run starts and finalized when it ends.
#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ussl/version.hpp"

namespace ussl {

struct RunManifest {
    std::string subcommand;
    std::map<std::string, std::string> config;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string started_at;
    std::string finished_at;
    std::string status = "running";
};

namespace detail {

inline std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

inline void write_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::json j;
    j["tool"] = "ussl";
    j["tool_version"] = kVersion;
    j["subcommand"] = m.subcommand;
    j["config"] = m.config;
    j["seeds"] = m.seeds;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    j["status"] = m.status;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace ussl

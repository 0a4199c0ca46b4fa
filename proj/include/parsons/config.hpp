#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "parsons/exec_harness.hpp"

namespace parsons {

struct ProviderSettings {
    std::string kind = "http";  // "http" or "scripted"
    std::string endpoint;
    std::string token_env = "PARSONS_PROVIDER_TOKEN";
    std::string model = "gpt-4";
    int timeout_ms = 30000;
    std::filesystem::path fixtures_dir;  // scripted only
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "parsons-data";
    std::filesystem::path problem_bank;  // ingested at startup when set

    std::string runner_command;
    RunLimits limits;
    int max_children = 4;
    bool cache_runs = false;

    ProviderSettings provider;

    std::uint64_t seed = 0;
    int min_attempts = 3;
    int distractor_cap = 3;
    int retry_budget = 3;
    int tab_width = 4;
    double fast_finisher_minutes = 2.0;
};

/// Reads a JSON config. Relative paths resolve against the file's directory.
/// Environment overrides: PARSONS_RUNNER, PARSONS_PROVIDER_ENDPOINT,
/// PARSONS_SEED, PARSONS_MIN_ATTEMPTS, PARSONS_DISTRACTOR_CAP.
/// Throws ConfigError naming the offending key (or line/column for syntax).
ServiceConfig load_config(const std::filesystem::path& path);
ServiceConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

}  // namespace parsons

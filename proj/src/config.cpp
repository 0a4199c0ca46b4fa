#include "parsons/config.hpp"

#include <cstdlib>

#include <json.hpp>

#include "parsons/error.hpp"
#include "parsons/storage.hpp"

namespace parsons {

namespace {

using nlohmann::json;

const json* lookup(const json& root, const std::string& dotted) {
    const json* node = &root;
    std::size_t start = 0;
    while (start <= dotted.size()) {
        const auto dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) return nullptr;
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return node;
}

template <typename T>
void read(const json& root, const std::string& key, T& out) {
    const json* node = lookup(root, key);
    if (!node || node->is_null()) return;
    try {
        out = node->get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::ConfigError, "field '" + key + "' has the wrong type");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

template <typename T>
void env_number(const char* name, T& out) {
    const char* v = std::getenv(name);
    if (!v || !*v) return;
    try {
        if constexpr (std::is_same_v<T, std::uint64_t>) {
            out = std::stoull(v);
        } else {
            out = static_cast<T>(std::stoll(v));
        }
    } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, std::string("environment variable ") + name + " is not a number");
    }
}

}  // namespace

ServiceConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, std::string("syntax error: ") + e.what());
    }
    if (!root.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");

    ServiceConfig cfg;
    read(root, "listen.host", cfg.host);
    read(root, "listen.port", cfg.port);
    std::string data_dir = cfg.data_dir.string(), bank, fixtures;
    read(root, "data_dir", data_dir);
    read(root, "problem_bank", bank);
    cfg.data_dir = resolve(base_dir, data_dir);
    cfg.problem_bank = resolve(base_dir, bank);

    read(root, "runner.command", cfg.runner_command);
    read(root, "runner.timeout_ms", cfg.limits.timeout_ms);
    read(root, "runner.memory_hint", cfg.limits.memory_hint);
    read(root, "runner.max_concurrent", cfg.max_children);
    read(root, "runner.cache", cfg.cache_runs);

    read(root, "provider.kind", cfg.provider.kind);
    read(root, "provider.endpoint", cfg.provider.endpoint);
    read(root, "provider.token_env", cfg.provider.token_env);
    read(root, "provider.model", cfg.provider.model);
    read(root, "provider.timeout_ms", cfg.provider.timeout_ms);
    read(root, "provider.fixtures_dir", fixtures);
    cfg.provider.fixtures_dir = resolve(base_dir, fixtures);

    read(root, "seed", cfg.seed);
    read(root, "min_attempts", cfg.min_attempts);
    read(root, "distractor_cap", cfg.distractor_cap);
    read(root, "retry_budget", cfg.retry_budget);
    read(root, "tab_width", cfg.tab_width);
    read(root, "fast_finisher_minutes", cfg.fast_finisher_minutes);

    if (const char* v = std::getenv("PARSONS_RUNNER"); v && *v) cfg.runner_command = v;
    if (const char* v = std::getenv("PARSONS_PROVIDER_ENDPOINT"); v && *v) cfg.provider.endpoint = v;
    env_number("PARSONS_SEED", cfg.seed);
    env_number("PARSONS_MIN_ATTEMPTS", cfg.min_attempts);
    env_number("PARSONS_DISTRACTOR_CAP", cfg.distractor_cap);

    if (cfg.runner_command.empty())
        throw Error(ErrorCode::ConfigError, "missing required key 'runner.command' (or set PARSONS_RUNNER)");
    if (cfg.provider.kind == "http") {
        if (cfg.provider.endpoint.empty())
            throw Error(ErrorCode::ConfigError, "missing required key 'provider.endpoint' for provider.kind \"http\"");
    } else if (cfg.provider.kind == "scripted") {
        if (cfg.provider.fixtures_dir.empty())
            throw Error(ErrorCode::ConfigError, "missing required key 'provider.fixtures_dir' for provider.kind \"scripted\"");
    } else {
        throw Error(ErrorCode::ConfigError, "field 'provider.kind' must be \"http\" or \"scripted\"");
    }
    if (cfg.port < 0 || cfg.port > 65535) throw Error(ErrorCode::ConfigError, "field 'listen.port' out of range");
    if (cfg.min_attempts < 0) throw Error(ErrorCode::ConfigError, "field 'min_attempts' must be >= 0");
    if (cfg.distractor_cap < 0) throw Error(ErrorCode::ConfigError, "field 'distractor_cap' must be >= 0");
    if (cfg.retry_budget < 1) throw Error(ErrorCode::ConfigError, "field 'retry_budget' must be >= 1");
    if (cfg.tab_width < 1) throw Error(ErrorCode::ConfigError, "field 'tab_width' must be >= 1");
    if (!(cfg.fast_finisher_minutes > 0))
        throw Error(ErrorCode::ConfigError, "field 'fast_finisher_minutes' must be > 0");
    if (cfg.limits.timeout_ms < 1) throw Error(ErrorCode::ConfigError, "field 'runner.timeout_ms' must be >= 1");
    return cfg;
}

ServiceConfig load_config(const std::filesystem::path& path) {
    auto text = read_file(path);
    if (!text) throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string());
    return parse_config(*text, path.parent_path());
}

}  // namespace parsons

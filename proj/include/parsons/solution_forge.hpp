#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "parsons/exec_harness.hpp"
#include "parsons/problem.hpp"

namespace parsons {

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    std::string problem_id;
    std::string session_id;
};

/// Raised by providers for transport-level failures (connection refused,
/// timeout, non-2xx, unparseable body). generate_solution treats these as a
/// failed attempt.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Synchronous request/response text generation. Implementations own their
/// connection per call; one instance may serve concurrent calls.
class ProviderPort {
public:
    virtual ~ProviderPort() = default;
    /// `attempt` is 1-based within one generate_solution call.
    virtual std::string complete(const PromptBundle& prompt, int attempt) = 0;
};

struct HttpProviderConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8089/v1/chat/completions
    std::string token_env = "PARSONS_PROVIDER_TOKEN";
    std::string model = "gpt-4";
    double temperature = 0.0;
    int timeout_ms = 30000;
};

/// Chat-completions style JSON over HTTP. Accepts `choices[0].message.content`,
/// `text`, or `content` in the response body.
class HttpProvider final : public ProviderPort {
public:
    explicit HttpProvider(HttpProviderConfig config);
    std::string complete(const PromptBundle& prompt, int attempt) override;

    nlohmann::json request_body(const PromptBundle& prompt) const;

private:
    HttpProviderConfig config_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
};

/// Canned responses keyed by (problem id, attempt). A missing key behaves like
/// a transport failure.
class ScriptedProvider final : public ProviderPort {
public:
    using Key = std::pair<std::string, int>;

    ScriptedProvider() = default;
    explicit ScriptedProvider(std::map<Key, std::string> responses) : responses_(std::move(responses)) {}

    /// Loads `<dir>/<problem id>/<attempt>.txt`.
    static ScriptedProvider from_directory(const std::filesystem::path& dir);

    void set(const std::string& problem_id, int attempt, std::string response);
    std::string complete(const PromptBundle& prompt, int attempt) override;

private:
    std::map<Key, std::string> responses_;
};

enum class Provenance { Generated, FallbackReference };
std::string_view to_string(Provenance p);

struct VerifiedSolution {
    std::string source;  // canonical form, see canonical_source()
    bool passed_all_tests = true;
    Provenance provenance = Provenance::Generated;
    int attempts_used = 1;
    int closeness = 0;  // aligned line pairs against the student's code
};

inline constexpr int kDefaultRetryBudget = 3;

PromptBundle build_prompt(const Problem& problem, const std::string& student_code,
                          const std::string& session_id = {});

/// First fenced region's interior, else the whole response with surrounding
/// blank lines removed. Throws NoCode when nothing remains.
std::string extract_code(const std::string& provider_response);

/// Prompt, call, extract, and verify up to `budget` times. Falls back to the
/// problem's reference solution (re-verified) when no candidate passes.
VerifiedSolution generate_solution(const Problem& problem, const std::string& student_code,
                                   ProviderPort& provider, TestRunner& runner,
                                   int budget = kDefaultRetryBudget,
                                   const std::string& session_id = {},
                                   const RunLimits& limits = {});

}  // namespace parsons

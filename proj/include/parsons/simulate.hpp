#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "parsons/analytics.hpp"
#include "parsons/service.hpp"

namespace parsons {

/// One scripted student action at virtual time `t` (ms after the script start).
/// Actions: open, write, run, help, regenerate, move, solve, check, help_me,
/// copy, paste, submit. `code` on write/run/help/regenerate/submit replaces
/// the student's editor contents first.
struct SimAction {
    std::int64_t t = 0;
    std::string action;
    std::string problem;
    std::optional<std::string> code;
    std::string block;              // move
    std::string to = "area";        // move: "area" or "tray"
    std::size_t position = 0;       // move to area
};

struct SimStudent {
    std::string id;
    std::optional<Condition> condition;  // unset: the service draws it
    std::string tag;                     // free-form label echoed in the summary
    std::vector<SimAction> timeline;
};

struct SimScript {
    std::uint64_t seed = 0;
    std::int64_t start_ms = 0;
    std::vector<SimStudent> students;
};

void to_json(nlohmann::json& j, const SimScript& s);
/// Throws ScriptError on malformed input or an out-of-order timeline.
SimScript parse_sim_script(const std::string& text);
SimScript load_sim_script(const std::filesystem::path& path);

struct SimSetup {
    std::shared_ptr<TestRunner> runner;
    std::shared_ptr<ProviderPort> provider;
    std::vector<Problem> problems;
    ServiceOptions options;             // seed and deterministic_tokens are taken from the script
    std::filesystem::path log_path;     // empty: keep the log in memory only
};

struct StudentSummary {
    std::string student_id;
    std::string session_id;
    Condition condition = Condition::PC;
    std::string tag;
    double practice_minutes = 0.0;
    int attempts = 0;
    bool fast_finisher = false;
    int puzzle_payloads = 0;
    int solution_payloads = 0;
};

struct SimResult {
    std::vector<StudentSummary> students;
    std::vector<SessionEvent> events;
    std::optional<stats::StatReport> practice_time;  // unset when a condition is absent
    std::optional<stats::StatReport> attempts;
};

/// Drives an in-process service on a virtual clock. Actions from all students
/// run in (t, student, action) order. Any failing action raises ScriptError.
SimResult simulate(const SimScript& script, const SimSetup& setup);

std::string render_summary(const SimResult& r);

/// Synthetic cohort over `problems`. The first `fast_cc` CC students open,
/// ask for help, copy, paste and submit every question within 25 s and are
/// tagged "fast"; everyone else spends at least a minute per question.
SimScript make_cohort_script(const std::vector<Problem>& problems, std::size_t n_pc, std::size_t n_cc,
                             std::uint64_t seed, std::size_t fast_cc = 0);

}  // namespace parsons

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "parsons/analytics.hpp"
#include "parsons/config.hpp"
#include "parsons/exec_harness.hpp"
#include "parsons/problem.hpp"
#include "parsons/puzzle_engine.hpp"
#include "parsons/solution_forge.hpp"
#include "parsons/telemetry.hpp"

namespace parsons {

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
};

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() override;
};

/// Virtual clock for simulation and tests.
class ManualClock final : public Clock {
public:
    explicit ManualClock(std::int64_t start = 0) : now_(start) {}
    std::int64_t now_ms() override { return now_.load(); }
    void set(std::int64_t t) { now_.store(t); }
    void advance(std::int64_t dt) { now_ += dt; }

private:
    std::atomic<std::int64_t> now_;
};

struct Session {
    std::string session_id;
    std::string student_id;
    std::string token;
    Condition condition = Condition::PC;
    std::vector<std::string> problem_order;
    std::map<std::string, std::string> code;            // latest snapshot per problem
    std::map<std::string, PuzzleState> puzzles;         // active puzzle per problem (PC)
    std::map<std::string, std::string> last_solution;   // last delivered solution text
    std::map<std::string, int> help_count;
    std::map<std::string, int> generations;             // puzzles minted per problem
    std::map<std::string, std::string> provenance;      // of the last delivered solution
    std::set<std::string> opened;
    std::set<std::string> completed;
    std::int64_t created_at = 0;
    std::int64_t last_event_ms = 0;
};

void to_json(nlohmann::json& j, const Session& s);
void from_json(const nlohmann::json& j, Session& s);

/// Storage port: problem bank plus one record per session.
class Storage {
public:
    virtual ~Storage() = default;
    virtual std::vector<Problem> load_problems() = 0;
    virtual void save_problems(const std::vector<Problem>& problems) = 0;
    virtual std::vector<Session> load_sessions() = 0;
    virtual void save_session(const Session& s) = 0;
};

class MemoryStorage final : public Storage {
public:
    std::vector<Problem> load_problems() override;
    void save_problems(const std::vector<Problem>& problems) override;
    std::vector<Session> load_sessions() override;
    void save_session(const Session& s) override;

private:
    std::mutex mutex_;
    std::vector<Problem> problems_;
    std::map<std::string, Session> sessions_;
};

/// `<dir>/problems.json` and `<dir>/sessions/<id>.json`, written atomically.
class FileStorage final : public Storage {
public:
    explicit FileStorage(std::filesystem::path dir);
    std::vector<Problem> load_problems() override;
    void save_problems(const std::vector<Problem>& problems) override;
    std::vector<Session> load_sessions() override;
    void save_session(const Session& s) override;

private:
    std::filesystem::path dir_;
    std::mutex mutex_;
};

struct ServiceOptions {
    std::uint64_t seed = 0;
    int min_attempts = kDefaultMinAttempts;
    int retry_budget = kDefaultRetryBudget;
    PuzzleConfig puzzle;
    RunLimits limits;
    double fast_finisher_minutes = kFastFinisherMinutes;
    /// Derive session tokens from the seed instead of std::random_device.
    /// Only for simulation, where byte-identical output matters.
    bool deterministic_tokens = false;
};

ServiceOptions options_from_config(const ServiceConfig& cfg);

struct IngestReport {
    std::size_t accepted = 0;
    std::vector<std::pair<std::string, std::string>> rejected;  // (problem id, reason)
};

struct HelpPayload {
    enum class Kind { Puzzle, FullSolution };
    Kind kind = Kind::Puzzle;
    std::optional<PuzzleState> puzzle;
    std::optional<std::string> solution_text;
    Provenance provenance = Provenance::Generated;
    int closeness = 0;
    bool resumed = false;  // PC: an active puzzle was handed back unchanged
};

std::string_view to_string(HelpPayload::Kind k);
/// Client-facing rendering; puzzles go through client_view().
nlohmann::json to_json(const HelpPayload& p);

struct CheckCommand {};
struct HelpMeCommand {};
struct CopyCommand {};
using PuzzleCommand = std::variant<Move, CheckCommand, HelpMeCommand, CopyCommand>;

struct PuzzleResponse {
    PuzzleState state;
    std::optional<Feedback> feedback;
    std::optional<AdaptationAction> adaptation;
    std::optional<std::string> text;  // CopyAnswer
};

nlohmann::json to_json(const PuzzleResponse& r);

struct SubmitResult {
    TestReport report;
    bool completed = false;
};

/// Ties the modules together behind one in-process API; the HTTP layer is a
/// thin adapter over it. Commands on one session are serialized by that
/// session's mutex; different sessions run in parallel.
class ScaffoldService {
public:
    ScaffoldService(ServiceOptions options, std::shared_ptr<TestRunner> runner,
                    std::shared_ptr<ProviderPort> provider, std::shared_ptr<Clock> clock,
                    std::shared_ptr<Storage> storage, std::shared_ptr<EventLog> log);

    /// Verifies every reference solution; failures are rejected and reported,
    /// the rest are added to the bank (replacing same-id problems) and persisted.
    IngestReport ingest_problems(const std::vector<Problem>& problems);
    IngestReport ingest_problems(const std::filesystem::path& path);

    std::vector<Problem> problems() const;
    Problem problem(const std::string& id) const;

    Session create_session(const std::string& student_id, std::optional<std::uint64_t> seed = std::nullopt,
                           std::optional<Condition> assign = std::nullopt);
    Session session(const std::string& session_id) const;
    void authorize(const std::string& session_id, const std::string& token) const;

    void open_question(const std::string& sid, const std::string& pid);
    TestReport save_and_run(const std::string& sid, const std::string& pid, const std::string& code);
    SubmitResult submit(const std::string& sid, const std::string& pid, const std::string& code);
    HelpPayload request_help(const std::string& sid, const std::string& pid, const std::string& code);
    HelpPayload regenerate(const std::string& sid, const std::string& pid, const std::string& code);
    PuzzleResponse puzzle_command(const std::string& sid, const std::string& pid, const PuzzleCommand& cmd);
    /// "Copy Answer to Clipboard" for either condition.
    std::string copy_answer(const std::string& sid, const std::string& pid);

    std::optional<PuzzleState> active_puzzle(const std::string& sid, const std::string& pid) const;

    std::vector<SessionEvent> events() const { return log_->snapshot(); }
    stats::StatReport report(stats::Metric metric) const;

    const ServiceOptions& options() const { return options_; }

private:
    struct Slot {
        mutable std::mutex mutex;
        Session session;
    };

    Slot& slot(const std::string& sid) const;
    void log(Session& s, const std::string& pid, EventKind kind, nlohmann::json payload);
    void ensure_open(Session& s, const std::string& pid);
    void persist(const Session& s);
    std::uint64_t puzzle_seed(const Session& s, const std::string& pid) const;
    HelpPayload fresh_puzzle(Session& s, const Problem& p, const std::string& code);
    std::string make_token(const std::string& session_id);

    ServiceOptions options_;
    std::shared_ptr<TestRunner> runner_;
    std::shared_ptr<ProviderPort> provider_;
    std::shared_ptr<Clock> clock_;
    std::shared_ptr<Storage> storage_;
    std::shared_ptr<EventLog> log_;

    mutable std::shared_mutex bank_mutex_;
    std::vector<Problem> bank_;

    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::unique_ptr<Slot>> sessions_;
    std::map<std::string, std::string> session_by_student_;
    std::uint64_t session_counter_ = 0;
};

/// Latest code per (session, problem) reconstructed from event payloads.
std::map<std::string, std::map<std::string, std::string>> replay_code_snapshots(const std::vector<SessionEvent>& log);

/// Builds runner, provider, storage, and log from a config.
struct ServiceBundle {
    std::shared_ptr<ScaffoldService> service;
    std::shared_ptr<EventLog> log;
};
ServiceBundle build_service(const ServiceConfig& cfg, std::shared_ptr<Clock> clock = nullptr);

std::shared_ptr<ProviderPort> make_provider(const ProviderSettings& settings);

}  // namespace parsons

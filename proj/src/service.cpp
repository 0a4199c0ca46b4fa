#include "parsons/service.hpp"

#include <chrono>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "parsons/error.hpp"
#include "parsons/rng.hpp"
#include "parsons/storage.hpp"

namespace parsons {

using nlohmann::json;

std::int64_t SystemClock::now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

// --- serialization ---------------------------------------------------------

void to_json(json& j, const Session& s) {
    j = {{"session_id", s.session_id},
         {"student_id", s.student_id},
         {"token", s.token},
         {"condition", std::string(to_string(s.condition))},
         {"problem_order", s.problem_order},
         {"code", s.code},
         {"puzzles", s.puzzles},
         {"last_solution", s.last_solution},
         {"help_count", s.help_count},
         {"generations", s.generations},
         {"provenance", s.provenance},
         {"opened", s.opened},
         {"completed", s.completed},
         {"created_at", s.created_at},
         {"last_event_ms", s.last_event_ms}};
}

void from_json(const json& j, Session& s) {
    s.session_id = j.at("session_id").get<std::string>();
    s.student_id = j.at("student_id").get<std::string>();
    s.token = j.value("token", std::string());
    s.condition = condition_from_string(j.at("condition").get<std::string>());
    s.problem_order = j.value("problem_order", std::vector<std::string>{});
    s.code = j.value("code", std::map<std::string, std::string>{});
    s.puzzles = j.value("puzzles", std::map<std::string, PuzzleState>{});
    s.last_solution = j.value("last_solution", std::map<std::string, std::string>{});
    s.help_count = j.value("help_count", std::map<std::string, int>{});
    s.generations = j.value("generations", std::map<std::string, int>{});
    s.provenance = j.value("provenance", std::map<std::string, std::string>{});
    s.opened = j.value("opened", std::set<std::string>{});
    s.completed = j.value("completed", std::set<std::string>{});
    s.created_at = j.value("created_at", std::int64_t{0});
    s.last_event_ms = j.value("last_event_ms", std::int64_t{0});
}

std::string_view to_string(HelpPayload::Kind k) {
    return k == HelpPayload::Kind::Puzzle ? "puzzle" : "full_solution";
}

json to_json(const HelpPayload& p) {
    json j = {{"kind", std::string(to_string(p.kind))},
              {"provenance", std::string(to_string(p.provenance))},
              {"closeness", p.closeness},
              {"resumed", p.resumed}};
    j["puzzle"] = p.puzzle ? client_view(*p.puzzle) : json(nullptr);
    j["solution_text"] = p.solution_text ? json(*p.solution_text) : json(nullptr);
    return j;
}

json to_json(const PuzzleResponse& r) {
    json j = {{"state", client_view(r.state)}};
    if (r.feedback) j["feedback"] = *r.feedback;
    if (r.adaptation) j["adaptation"] = *r.adaptation;
    if (r.text) j["text"] = *r.text;
    return j;
}

// --- storage ---------------------------------------------------------------

std::vector<Problem> MemoryStorage::load_problems() {
    std::lock_guard lock(mutex_);
    return problems_;
}

void MemoryStorage::save_problems(const std::vector<Problem>& problems) {
    std::lock_guard lock(mutex_);
    problems_ = problems;
}

std::vector<Session> MemoryStorage::load_sessions() {
    std::lock_guard lock(mutex_);
    std::vector<Session> out;
    for (const auto& [id, s] : sessions_) out.push_back(s);
    return out;
}

void MemoryStorage::save_session(const Session& s) {
    std::lock_guard lock(mutex_);
    sessions_[s.session_id] = s;
}

FileStorage::FileStorage(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_ / "sessions");
}

std::vector<Problem> FileStorage::load_problems() {
    std::lock_guard lock(mutex_);
    if (!std::filesystem::exists(dir_ / "problems.json")) return {};
    return load_problem_bank(dir_ / "problems.json");
}

void FileStorage::save_problems(const std::vector<Problem>& problems) {
    std::lock_guard lock(mutex_);
    save_problem_bank(dir_ / "problems.json", problems);
}

std::vector<Session> FileStorage::load_sessions() {
    std::lock_guard lock(mutex_);
    std::vector<Session> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir_ / "sessions")) {
        if (entry.path().extension() != ".json") continue;
        auto text = read_file(entry.path());
        if (!text) continue;
        out.push_back(json::parse(*text).get<Session>());
    }
    std::sort(out.begin(), out.end(), [](const Session& a, const Session& b) { return a.session_id < b.session_id; });
    return out;
}

void FileStorage::save_session(const Session& s) {
    std::lock_guard lock(mutex_);
    write_file_atomic(dir_ / "sessions" / (s.session_id + ".json"), json(s).dump(2) + "\n");
}

// --- service ---------------------------------------------------------------

ServiceOptions options_from_config(const ServiceConfig& cfg) {
    ServiceOptions o;
    o.seed = cfg.seed;
    o.min_attempts = cfg.min_attempts;
    o.retry_budget = cfg.retry_budget;
    o.puzzle.distractor_cap = cfg.distractor_cap;
    o.puzzle.tab_width = cfg.tab_width;
    o.limits = cfg.limits;
    o.fast_finisher_minutes = cfg.fast_finisher_minutes;
    return o;
}

ScaffoldService::ScaffoldService(ServiceOptions options, std::shared_ptr<TestRunner> runner,
                                 std::shared_ptr<ProviderPort> provider, std::shared_ptr<Clock> clock,
                                 std::shared_ptr<Storage> storage, std::shared_ptr<EventLog> log)
    : options_(std::move(options)),
      runner_(std::move(runner)),
      provider_(std::move(provider)),
      clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()),
      storage_(storage ? std::move(storage) : std::make_shared<MemoryStorage>()),
      log_(log ? std::move(log) : std::make_shared<EventLog>()) {
    bank_ = storage_->load_problems();
    for (auto& s : storage_->load_sessions()) {
        unsigned long long ordinal = 0;
        if (std::sscanf(s.session_id.c_str(), "s%llu", &ordinal) == 1)
            session_counter_ = std::max<std::uint64_t>(session_counter_, ordinal);
        session_by_student_[s.student_id] = s.session_id;
        auto slot = std::make_unique<Slot>();
        slot->session = std::move(s);
        const std::string id = slot->session.session_id;
        sessions_.emplace(id, std::move(slot));
    }
}

IngestReport ScaffoldService::ingest_problems(const std::vector<Problem>& problems) {
    IngestReport report;
    std::vector<Problem> accepted;
    for (const auto& p : problems) {
        const std::string reference = canonical_source(p.reference_solution);
        if (reference.empty()) {
            report.rejected.emplace_back(p.id, "no reference solution");
            continue;
        }
        try {
            const TestReport r = runner_->run_tests(reference, p.tests, options_.limits);
            if (!r.all_passed) {
                std::string reason = "reference solution fails:";
                for (const auto& res : r.results)
                    if (res.status != TestStatus::Pass)
                        reason += " " + res.test_id + " (" + std::string(to_string(res.status)) + ")";
                report.rejected.emplace_back(p.id, reason);
                continue;
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::RunnerMissing) throw;
            report.rejected.emplace_back(p.id, e.what());
            continue;
        }
        accepted.push_back(p);
    }

    std::unique_lock lock(bank_mutex_);
    for (auto& p : accepted) {
        auto it = std::find_if(bank_.begin(), bank_.end(), [&](const Problem& q) { return q.id == p.id; });
        if (it != bank_.end()) {
            *it = std::move(p);
        } else {
            bank_.push_back(std::move(p));
        }
        ++report.accepted;
    }
    storage_->save_problems(bank_);
    return report;
}

IngestReport ScaffoldService::ingest_problems(const std::filesystem::path& path) {
    return ingest_problems(load_problem_bank(path));
}

std::vector<Problem> ScaffoldService::problems() const {
    std::shared_lock lock(bank_mutex_);
    return bank_;
}

Problem ScaffoldService::problem(const std::string& id) const {
    std::shared_lock lock(bank_mutex_);
    for (const auto& p : bank_)
        if (p.id == id) return p;
    throw Error(ErrorCode::UnknownProblem, "no problem '" + id + "'");
}

std::string ScaffoldService::make_token(const std::string& session_id) {
    std::uint64_t a, b;
    if (options_.deterministic_tokens) {
        a = mix_seed(options_.seed ^ 0x746f6b656eull, session_id);
        b = mix_seed(a, session_id);
    } else {
        std::random_device rd;
        a = (std::uint64_t{rd()} << 32) ^ rd();
        b = (std::uint64_t{rd()} << 32) ^ rd();
    }
    return fmt::format("{:016x}{:016x}", a, b);
}

Session ScaffoldService::create_session(const std::string& student_id, std::optional<std::uint64_t> seed,
                                        std::optional<Condition> assign) {
    if (student_id.empty()) throw std::invalid_argument("student_id must be non-empty");
    std::unique_lock lock(sessions_mutex_);
    if (auto it = session_by_student_.find(student_id); it != session_by_student_.end())
        throw Error(ErrorCode::DuplicateSession, "student '" + student_id + "' already has session " + it->second);

    const std::uint64_t ordinal = ++session_counter_;
    auto slot = std::make_unique<Slot>();
    Session& s = slot->session;
    s.session_id = fmt::format("s{:06}", ordinal);
    s.student_id = student_id;
    s.token = make_token(s.session_id);

    const std::uint64_t draw_seed = seed ? mix_seed(*seed, "condition") : mix_seed(options_.seed, ordinal);
    const bool pc = SplitMix64(draw_seed).below(2) == 0;
    s.condition = assign.value_or(pc ? Condition::PC : Condition::CC);
    for (const auto& p : problems()) s.problem_order.push_back(p.id);
    s.created_at = clock_->now_ms();

    log(s, "", EventKind::SessionStart,
        {{"assignment", assign ? "override" : (seed ? "seeded" : "random")}, {"problem_order", s.problem_order}});
    persist(s);
    Session copy = s;
    session_by_student_[student_id] = s.session_id;
    sessions_.emplace(s.session_id, std::move(slot));
    return copy;
}

ScaffoldService::Slot& ScaffoldService::slot(const std::string& sid) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(sid);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + sid + "'");
    return *it->second;
}

Session ScaffoldService::session(const std::string& sid) const {
    Slot& sl = slot(sid);
    std::lock_guard lock(sl.mutex);
    return sl.session;
}

void ScaffoldService::authorize(const std::string& sid, const std::string& token) const {
    Slot& sl = slot(sid);
    std::lock_guard lock(sl.mutex);
    if (token.empty() || token != sl.session.token)
        throw Error(ErrorCode::Unauthorized, "missing or wrong bearer token for session " + sid);
}

void ScaffoldService::log(Session& s, const std::string& pid, EventKind kind, json payload) {
    // Wall clocks can step backwards; a session's log never does.
    const std::int64_t ts = std::max(clock_->now_ms(), s.last_event_ms);
    s.last_event_ms = ts;
    log_->append({s.session_id, s.student_id, s.condition, pid, kind, ts, std::move(payload)});
}

void ScaffoldService::ensure_open(Session& s, const std::string& pid) {
    if (s.opened.insert(pid).second) log(s, pid, EventKind::QuestionOpen, json::object());
}

void ScaffoldService::persist(const Session& s) { storage_->save_session(s); }

std::uint64_t ScaffoldService::puzzle_seed(const Session& s, const std::string& pid) const {
    const auto it = s.generations.find(pid);
    const int generation = it == s.generations.end() ? 0 : it->second;
    return mix_seed(mix_seed(mix_seed(options_.seed, s.session_id), pid), static_cast<std::uint64_t>(generation));
}

void ScaffoldService::open_question(const std::string& sid, const std::string& pid) {
    Slot& sl = slot(sid);
    std::lock_guard lock(sl.mutex);
    problem(pid);
    ensure_open(sl.session, pid);
    persist(sl.session);
}

TestReport ScaffoldService::save_and_run(const std::string& sid, const std::string& pid, const std::string& code) {
    Slot& sl = slot(sid);
    std::lock_guard lock(sl.mutex);
    Session& s = sl.session;
    const Problem p = problem(pid);
    ensure_open(s, pid);
    s.code[pid] = code;
    TestReport report = runner_->run_tests(code, p.tests, options_.limits);
    log(s, pid, EventKind::Run,
        {{"passed", report.pass_count()}, {"total", report.results.size()}, {"code", code}});
    persist(s);
    return report;
}

SubmitResult ScaffoldService::submit(const std::string& sid, const std::string& pid, const std::string& code) {
    Slot& sl = slot(sid);
    std::lock_guard lock(sl.mutex);
    Session& s = sl.session;
    const Problem p = problem(pid);
    ensure_open(s, pid);
    s.code[pid] = code;
    SubmitResult result;
    result.report = runner_->run_tests(code, p.tests, options_.limits);
    log(s, pid, EventKind::Submit,
        {{"passed", result.report.pass_count()}, {"total", result.report.results.size()}, {"code", code}});
    if (result.report.all_passed && s.completed.insert(pid).second) {
        log(s, pid, EventKind::QuestionComplete, json::object());
        result.completed = true;
    }
    persist(s);
    return result;
}

HelpPayload ScaffoldService::fresh_puzzle(Session& s, const Problem& p, const std::string& code) {
    const VerifiedSolution sol =
        generate_solution(p, code, *provider_, *runner_, options_.retry_budget, s.session_id, options_.limits);
    const std::uint64_t seed = puzzle_seed(s, p.id);
    ++s.generations[p.id];
    PuzzleState state = new_state(make_puzzle(sol, code, options_.puzzle, seed));
    s.puzzles[p.id] = state;
    s.last_solution[p.id] = sol.source;
    s.provenance[p.id] = std::string(to_string(sol.provenance));

    HelpPayload payload;
    payload.kind = HelpPayload::Kind::Puzzle;
    payload.puzzle = std::move(state);
    payload.provenance = sol.provenance;
    payload.closeness = sol.closeness;
    return payload;
}

HelpPayload ScaffoldService::request_help(const std::string& sid, const std::string& pid, const std::string& code) {
    Slot& sl = slot(sid);
    std::lock_guard lock(sl.mutex);
    Session& s = sl.session;
    const Problem p = problem(pid);
    ensure_open(s, pid);
    s.code[pid] = code;

    HelpPayload payload;
    if (s.condition == Condition::PC) {
        auto active = s.puzzles.find(pid);
        if (active != s.puzzles.end() && !active->second.solved) {
            payload.kind = HelpPayload::Kind::Puzzle;
            payload.puzzle = active->second;
            payload.provenance = s.provenance[pid] == "generated" ? Provenance::Generated : Provenance::FallbackReference;
            payload.closeness = static_cast<int>(align_lines(code, active->second.puzzle.source_solution).pairs.size());
            payload.resumed = true;
        } else {
            payload = fresh_puzzle(s, p, code);
        }
    } else {
        // Control condition: a fresh, personalized full solution on every click.
        const VerifiedSolution sol =
            generate_solution(p, code, *provider_, *runner_, options_.retry_budget, s.session_id, options_.limits);
        payload.kind = HelpPayload::Kind::FullSolution;
        payload.solution_text = sol.source;
        payload.provenance = sol.provenance;
        payload.closeness = sol.closeness;
        s.last_solution[pid] = sol.source;
        s.provenance[pid] = std::string(to_string(sol.provenance));
    }
    ++s.help_count[pid];

    json event = {{"kind", std::string(to_string(payload.kind))},
                  {"provenance", std::string(to_string(payload.provenance))},
                  {"closeness", payload.closeness},
                  {"resumed", payload.resumed},
                  {"code", code}};
    if (payload.puzzle) event["seed"] = payload.puzzle->puzzle.seed;
    log(s, pid, EventKind::HelpRequest, std::move(event));
    persist(s);
    return payload;
}

HelpPayload ScaffoldService::regenerate(const std::string& sid, const std::string& pid, const std::string& code) {
    Slot& sl = slot(sid);
    std::lock_guard lock(sl.mutex);
    Session& s = sl.session;
    const Problem p = problem(pid);
    if (s.condition != Condition::PC)
        throw Error(ErrorCode::WrongCondition, "control sessions cannot regenerate puzzles");
    if (s.help_count[pid] == 0)
        throw Error(ErrorCode::NoActivePuzzle, "help has not been requested for '" + pid + "'");

    std::optional<std::uint64_t> old_seed;
    if (auto it = s.puzzles.find(pid); it != s.puzzles.end()) old_seed = it->second.puzzle.seed;
    s.puzzles.erase(pid);
    s.code[pid] = code;
    if (old_seed && puzzle_seed(s, pid) == *old_seed) ++s.generations[pid];

    HelpPayload payload = fresh_puzzle(s, p, code);
    log(s, pid, EventKind::Regenerate,
        {{"provenance", std::string(to_string(payload.provenance))},
         {"closeness", payload.closeness},
         {"seed", payload.puzzle->puzzle.seed},
         {"code", code}});
    persist(s);
    return payload;
}

PuzzleResponse ScaffoldService::puzzle_command(const std::string& sid, const std::string& pid,
                                               const PuzzleCommand& cmd) {
    Slot& sl = slot(sid);
    std::lock_guard lock(sl.mutex);
    Session& s = sl.session;
    problem(pid);
    auto it = s.puzzles.find(pid);
    if (it == s.puzzles.end()) throw Error(ErrorCode::NoActivePuzzle, "no active puzzle for '" + pid + "'");
    PuzzleState& state = it->second;

    PuzzleResponse response;
    if (const auto* move = std::get_if<Move>(&cmd)) {
        state = apply_move(state, *move);  // copy: a throw must leave the stored state intact
        json target = std::holds_alternative<ToTray>(move->target)
                          ? json("tray")
                          : json({{"area", std::get<ToArea>(move->target).position}});
        log(s, pid, EventKind::PuzzleMove, {{"block", move->block_id}, {"to", target}});
    } else if (std::holds_alternative<CheckCommand>(cmd)) {
        auto [next, feedback] = check(state);
        state = std::move(next);
        log(s, pid, EventKind::PuzzleCheck,
            {{"correct", feedback.correct},
             {"first_error_position",
              feedback.first_error_position ? json(*feedback.first_error_position) : json(nullptr)},
             {"attempts", state.attempts}});
        response.feedback = feedback;
    } else if (std::holds_alternative<HelpMeCommand>(cmd)) {
        auto [next, action] = help_me(state, options_.min_attempts);
        state = std::move(next);
        log(s, pid, EventKind::Adaptation, action);
        response.adaptation = action;
    } else {
        response.text = assemble(state);
        log(s, pid, EventKind::CopyAnswer, {{"chars", response.text->size()}});
    }
    response.state = state;
    persist(s);
    return response;
}

std::string ScaffoldService::copy_answer(const std::string& sid, const std::string& pid) {
    {
        Slot& sl = slot(sid);
        std::lock_guard lock(sl.mutex);
        Session& s = sl.session;
        problem(pid);
        if (s.condition == Condition::CC) {
            auto it = s.last_solution.find(pid);
            if (it == s.last_solution.end())
                throw Error(ErrorCode::NoActivePuzzle, "no solution has been delivered for '" + pid + "'");
            log(s, pid, EventKind::CopyAnswer, {{"chars", it->second.size()}});
            persist(s);
            return it->second;
        }
    }
    return *puzzle_command(sid, pid, CopyCommand{}).text;
}

std::optional<PuzzleState> ScaffoldService::active_puzzle(const std::string& sid, const std::string& pid) const {
    Slot& sl = slot(sid);
    std::lock_guard lock(sl.mutex);
    auto it = sl.session.puzzles.find(pid);
    if (it == sl.session.puzzles.end()) return std::nullopt;
    return it->second;
}

stats::StatReport ScaffoldService::report(stats::Metric metric) const {
    const auto records = engagement_records(log_->snapshot(), options_.fast_finisher_minutes);
    return stats::condition_report(records, metric);
}

std::map<std::string, std::map<std::string, std::string>> replay_code_snapshots(const std::vector<SessionEvent>& log) {
    std::map<std::string, std::map<std::string, std::string>> snapshots;
    for (const auto& e : log) {
        switch (e.kind) {
            case EventKind::Run:
            case EventKind::Submit:
            case EventKind::HelpRequest:
            case EventKind::Regenerate:
                if (e.payload.contains("code")) snapshots[e.session_id][e.question_id] = e.payload["code"].get<std::string>();
                break;
            default:
                break;
        }
    }
    return snapshots;
}

std::shared_ptr<ProviderPort> make_provider(const ProviderSettings& settings) {
    if (settings.kind == "scripted")
        return std::make_shared<ScriptedProvider>(ScriptedProvider::from_directory(settings.fixtures_dir));
    HttpProviderConfig http;
    http.endpoint = settings.endpoint;
    http.token_env = settings.token_env;
    http.model = settings.model;
    http.timeout_ms = settings.timeout_ms;
    return std::make_shared<HttpProvider>(http);
}

ServiceBundle build_service(const ServiceConfig& cfg, std::shared_ptr<Clock> clock) {
    set_max_concurrent_children(cfg.max_children);
    std::shared_ptr<TestRunner> runner = std::make_shared<ProcessRunner>(cfg.runner_command);
    if (cfg.cache_runs) runner = std::make_shared<CachingRunner>(runner);
    auto log = std::make_shared<EventLog>(cfg.data_dir / "events.jsonl");
    auto service = std::make_shared<ScaffoldService>(options_from_config(cfg), runner, make_provider(cfg.provider),
                                                     std::move(clock), std::make_shared<FileStorage>(cfg.data_dir), log);
    if (!cfg.problem_bank.empty()) {
        const IngestReport r = service->ingest_problems(cfg.problem_bank);
        spdlog::info("ingested {} problem(s) from {}", r.accepted, cfg.problem_bank.string());
        for (const auto& [id, reason] : r.rejected) spdlog::warn("rejected problem {}: {}", id, reason);
    }
    return {service, log};
}

}  // namespace parsons

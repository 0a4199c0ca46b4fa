#include "parsons/simulate.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "parsons/error.hpp"
#include "parsons/rng.hpp"
#include "parsons/storage.hpp"

namespace parsons {

using nlohmann::json;

namespace {

const std::vector<std::string> kActions = {"open", "write", "run",     "help", "regenerate", "move",
                                           "solve", "check", "help_me", "copy", "paste",      "submit"};
const std::vector<std::string> kPuzzleOnly = {"regenerate", "move", "solve", "check", "help_me"};

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

json action_json(const SimAction& a) {
    json j = {{"t", a.t}, {"action", a.action}};
    if (!a.problem.empty()) j["problem"] = a.problem;
    if (a.code) j["code"] = *a.code;
    if (a.action == "move") {
        j["block"] = a.block;
        j["to"] = a.to;
        if (a.to == "area") j["position"] = a.position;
    }
    return j;
}

}  // namespace

void to_json(json& j, const SimScript& s) {
    json students = json::array();
    for (const auto& st : s.students) {
        json sj = {{"id", st.id}};
        if (st.condition) sj["condition"] = std::string(to_string(*st.condition));
        if (!st.tag.empty()) sj["tag"] = st.tag;
        json timeline = json::array();
        for (const auto& a : st.timeline) timeline.push_back(action_json(a));
        sj["timeline"] = timeline;
        students.push_back(sj);
    }
    j = {{"seed", s.seed}, {"start_ms", s.start_ms}, {"students", students}};
}

SimScript parse_sim_script(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ScriptError, "script is not a JSON object");
    SimScript script;
    try {
        script.seed = j.value("seed", std::uint64_t{0});
        script.start_ms = j.value("start_ms", std::int64_t{0});
        if (!j.contains("students") || !j["students"].is_array())
            throw Error(ErrorCode::ScriptError, "script needs a 'students' array");
        std::set<std::string> ids;
        for (const auto& sj : j["students"]) {
            SimStudent st;
            st.id = sj.at("id").get<std::string>();
            if (st.id.empty() || !ids.insert(st.id).second)
                throw Error(ErrorCode::ScriptError, "student ids must be unique and non-empty ('" + st.id + "')");
            if (sj.contains("condition")) st.condition = condition_from_string(sj["condition"].get<std::string>());
            st.tag = sj.value("tag", std::string());
            std::int64_t last = 0;
            for (const auto& aj : sj.value("timeline", json::array())) {
                SimAction a;
                a.t = aj.at("t").get<std::int64_t>();
                a.action = aj.at("action").get<std::string>();
                a.problem = aj.value("problem", std::string());
                if (aj.contains("code")) a.code = aj["code"].get<std::string>();
                a.block = aj.value("block", std::string());
                a.to = aj.value("to", std::string("area"));
                a.position = aj.value("position", std::size_t{0});
                const std::string where = fmt::format("student '{}' action {}", st.id, st.timeline.size());
                if (!contains(kActions, a.action))
                    throw Error(ErrorCode::ScriptError, where + ": unknown action '" + a.action + "'");
                if (a.problem.empty()) throw Error(ErrorCode::ScriptError, where + ": missing 'problem'");
                if (a.t < 0 || a.t < last) throw Error(ErrorCode::ScriptError, where + ": timeline is not time-ordered");
                if (st.condition == Condition::CC && contains(kPuzzleOnly, a.action))
                    throw Error(ErrorCode::ScriptError, where + ": '" + a.action + "' is not available to CC students");
                last = a.t;
                st.timeline.push_back(std::move(a));
            }
            script.students.push_back(std::move(st));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ScriptError, e.what());
    } catch (const std::invalid_argument& e) {
        throw Error(ErrorCode::ScriptError, e.what());
    }
    return script;
}

SimScript load_sim_script(const std::filesystem::path& path) {
    auto text = read_file(path);
    if (!text) throw Error(ErrorCode::ScriptError, "cannot read script " + path.string());
    return parse_sim_script(*text);
}

SimResult simulate(const SimScript& script, const SimSetup& setup) {
    auto clock = std::make_shared<ManualClock>(script.start_ms);
    ServiceOptions options = setup.options;
    options.seed = script.seed;
    options.deterministic_tokens = true;

    if (!setup.log_path.empty()) std::filesystem::remove(setup.log_path);
    auto log = setup.log_path.empty() ? std::make_shared<EventLog>() : std::make_shared<EventLog>(setup.log_path);
    ScaffoldService service(options, setup.runner, setup.provider, clock, std::make_shared<MemoryStorage>(), log);
    const IngestReport ingest = service.ingest_problems(setup.problems);
    if (!ingest.rejected.empty())
        throw Error(ErrorCode::ScriptError, "problem '" + ingest.rejected.front().first + "' rejected: " +
                                                ingest.rejected.front().second);

    struct StudentState {
        std::string sid;
        std::map<std::string, std::string> editor;
        std::string clipboard;
    };
    std::vector<StudentState> state(script.students.size());
    SimResult result;
    for (std::size_t i = 0; i < script.students.size(); ++i) {
        const SimStudent& st = script.students[i];
        const Session s = service.create_session(st.id, std::nullopt, st.condition);
        state[i].sid = s.session_id;
        StudentSummary summary;
        summary.student_id = st.id;
        summary.session_id = s.session_id;
        summary.condition = s.condition;
        summary.tag = st.tag;
        result.students.push_back(summary);
    }

    std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> order;
    for (std::size_t i = 0; i < script.students.size(); ++i)
        for (std::size_t k = 0; k < script.students[i].timeline.size(); ++k)
            order.emplace_back(script.students[i].timeline[k].t, i, k);
    std::sort(order.begin(), order.end());

    for (const auto& [t, i, k] : order) {
        const SimAction& a = script.students[i].timeline[k];
        StudentState& st = state[i];
        StudentSummary& summary = result.students[i];
        clock->set(script.start_ms + t);
        std::string& code = st.editor[a.problem];
        if (a.code) code = *a.code;
        const bool pc = summary.condition == Condition::PC;
        try {
            if (!pc && contains(kPuzzleOnly, a.action))
                throw Error(ErrorCode::WrongCondition, "'" + a.action + "' is not available to CC students");
            if (a.action == "open") {
                service.open_question(st.sid, a.problem);
            } else if (a.action == "write" || a.action == "paste") {
                if (a.action == "paste") code = st.clipboard;
            } else if (a.action == "run") {
                service.save_and_run(st.sid, a.problem, code);
            } else if (a.action == "help" || a.action == "regenerate") {
                const HelpPayload p = a.action == "help" ? service.request_help(st.sid, a.problem, code)
                                                         : service.regenerate(st.sid, a.problem, code);
                (p.kind == HelpPayload::Kind::Puzzle ? summary.puzzle_payloads : summary.solution_payloads)++;
            } else if (a.action == "move") {
                Move m{a.block, a.to == "tray" ? std::variant<ToTray, ToArea>{ToTray{}} : std::variant<ToTray, ToArea>{ToArea{a.position}}};
                service.puzzle_command(st.sid, a.problem, m);
            } else if (a.action == "solve") {
                auto puzzle = service.active_puzzle(st.sid, a.problem);
                if (!puzzle) throw Error(ErrorCode::NoActivePuzzle, "nothing to solve");
                for (const Move& m : plan_optimal_moves(*puzzle)) service.puzzle_command(st.sid, a.problem, m);
            } else if (a.action == "check") {
                service.puzzle_command(st.sid, a.problem, CheckCommand{});
            } else if (a.action == "help_me") {
                service.puzzle_command(st.sid, a.problem, HelpMeCommand{});
            } else if (a.action == "copy") {
                st.clipboard = service.copy_answer(st.sid, a.problem);
            } else if (a.action == "submit") {
                service.submit(st.sid, a.problem, code);
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::RunnerMissing) throw;
            throw Error(ErrorCode::ScriptError,
                        fmt::format("student '{}' action {} ({} at t={}): {}", summary.student_id, k, a.action, t, e.what()));
        }
    }

    log->flush();
    result.events = log->snapshot();
    const auto records = engagement_records(result.events, options.fast_finisher_minutes);
    for (auto& summary : result.students) {
        for (const auto& r : records) {
            if (r.student_id != summary.student_id) continue;
            summary.practice_minutes = r.practice_minutes;
            summary.attempts = r.attempts;
            summary.fast_finisher = r.fast_finisher;
        }
    }
    const bool both = std::any_of(records.begin(), records.end(), [](auto& r) { return r.condition == Condition::PC; }) &&
                      std::any_of(records.begin(), records.end(), [](auto& r) { return r.condition == Condition::CC; });
    if (both) {
        result.practice_time = stats::condition_report(records, stats::Metric::PracticeTime);
        result.attempts = stats::condition_report(records, stats::Metric::Attempts);
    }
    return result;
}

std::string render_summary(const SimResult& r) {
    std::string out = fmt::format("{:<14}{:<10}{:<6}{:<8}{:>10}{:>10}  {}\n", "student", "session", "cond", "tag",
                                  "minutes", "attempts", "fast");
    for (const auto& s : r.students)
        out += fmt::format("{:<14}{:<10}{:<6}{:<8}{:>10.1f}{:>10}  {}\n", s.student_id, s.session_id,
                           to_string(s.condition), s.tag.empty() ? "-" : s.tag, s.practice_minutes, s.attempts,
                           s.fast_finisher ? "yes" : "no");
    out += fmt::format("events: {}\n", r.events.size());
    if (r.practice_time) out += "\n" + stats::render_text(*r.practice_time);
    if (r.attempts) out += "\n" + stats::render_text(*r.attempts);
    return out;
}

namespace {

std::vector<std::string> reference_lines(const Problem& p) {
    return split_lines(canonical_source(p.reference_solution));
}

std::string join_prefix(const std::vector<std::string>& lines, std::size_t n) {
    std::vector<std::string> head(lines.begin(), lines.begin() + static_cast<long>(std::min(n, lines.size())));
    return join_lines(head);
}

/// A few partial drafts per problem so cached runs cover the whole cohort.
std::string draft(const Problem& p, std::uint64_t variant) {
    const auto lines = reference_lines(p);
    switch (variant % 3) {
        case 0:
            return "";
        case 1:
            return join_prefix(lines, (lines.size() + 1) / 2);
        default: {
            std::string text = join_prefix(lines, lines.size() / 2);
            return text + (text.empty() ? "" : "\n") + "    return None";
        }
    }
}

}  // namespace

SimScript make_cohort_script(const std::vector<Problem>& problems, std::size_t n_pc, std::size_t n_cc,
                             std::uint64_t seed, std::size_t fast_cc) {
    if (fast_cc > n_cc) throw std::invalid_argument("fast_cc cannot exceed n_cc");
    SimScript script;
    script.seed = seed;
    SplitMix64 rng(mix_seed(seed, "cohort"));
    std::size_t cc_seen = 0;
    for (std::size_t i = 0; i < n_pc + n_cc; ++i) {
        SimStudent st;
        const bool pc = i < n_pc;
        st.id = fmt::format("{}{:03}", pc ? "pc" : "cc", pc ? i + 1 : i - n_pc + 1);
        st.condition = pc ? Condition::PC : Condition::CC;
        const bool fast = !pc && cc_seen++ < fast_cc;
        if (fast) st.tag = "fast";
        std::int64_t t = static_cast<std::int64_t>(rng.below(60)) * 1000;
        auto add = [&st](std::int64_t at, std::string action, const std::string& pid, std::optional<std::string> code = {}) {
            SimAction a;
            a.t = at;
            a.action = std::move(action);
            a.problem = pid;
            a.code = std::move(code);
            st.timeline.push_back(std::move(a));
        };
        for (const auto& p : problems) {
            if (fast) {
                const std::int64_t step = 3000 + static_cast<std::int64_t>(rng.below(3)) * 1000;  // <= 5 s
                add(t, "open", p.id);
                add(t + step, "help", p.id);
                add(t + 2 * step, "copy", p.id);
                add(t + 3 * step, "paste", p.id);
                add(t + 4 * step, "submit", p.id);  // <= 20 s after open
                t += 4 * step;
            } else {
                const std::int64_t d = 60000 + static_cast<std::int64_t>(rng.below(240)) * 1000;
                const std::string code = draft(p, rng.below(3));
                add(t, "open", p.id);
                add(t + d / 10, "write", p.id, code);
                add(t + d * 2 / 10, "run", p.id);
                add(t + d * 4 / 10, "help", p.id);
                if (pc) {
                    add(t + d * 6 / 10, "solve", p.id);
                    add(t + d * 7 / 10, "check", p.id);
                }
                add(t + d * 8 / 10, "copy", p.id);
                add(t + d * 9 / 10, "paste", p.id);
                add(t + d, "submit", p.id);
                t += d;
            }
            t += 5000 + static_cast<std::int64_t>(rng.below(55)) * 1000;
        }
        script.students.push_back(std::move(st));
    }
    return script;
}

}  // namespace parsons

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "oracles.hpp"
#include "parsons/analytics.hpp"
#include "parsons/error.hpp"
#include "parsons/puzzle_engine.hpp"
#include "parsons/puzzle_gen.hpp"
#include "parsons/simulate.hpp"
#include "service_fixture.hpp"

using namespace parsons;
namespace fs = std::filesystem;

namespace {

using Wall = std::chrono::steady_clock;

struct Outcome {
    bool ok = true;
    std::string detail;
};

/// Records the first failure; later ones only bump the counter.
struct Tally {
    Outcome out;
    int failures = 0;
    void expect(bool cond, const std::string& what) {
        if (cond) return;
        if (failures++ == 0) out.detail = what;
        out.ok = false;
    }
};

double ms_since(Wall::time_point t0) {
    return std::chrono::duration<double, std::milli>(Wall::now() - t0).count();
}

VerifiedSolution verified(const std::string& text) {
    VerifiedSolution v;
    v.source = canonical_source(text);
    return v;
}

std::vector<double> random_sample(SplitMix64& rng, std::size_t n, int spread) {
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng.below(static_cast<std::uint64_t>(spread)));
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Outcome cles_reproduction() {
    Tally t;
    const auto t0 = Wall::now();
    const std::string a = stats::format_two_decimals_no_lead(stats::cles(2368.0, 51, 67));
    const std::string b = stats::format_two_decimals_no_lead(stats::cles(1628.5, 51, 67));
    const std::string c = stats::format_two_decimals_no_lead(stats::cles(1595.5, 51, 67));
    const double elapsed = ms_since(t0);
    t.expect(a == ".69", "cles(2368.0) -> " + a);
    t.expect(b == ".48", "cles(1628.5) -> " + b);
    t.expect(c == ".47", "cles(1595.5) -> " + c);
    t.expect(elapsed < 1.0, fmt::format("took {:.3f} ms", elapsed));
    if (t.out.ok) t.out.detail = fmt::format("{} {} {} in {:.4f} ms", a, b, c, elapsed);
    return t.out;
}

Outcome p_consistency() {
    Tally t;
    const auto tie_free = stats::tie_free_ranking(118);
    const auto headline = stats::p_two_sided(2368.0, 51, 67, tie_free);
    const auto pretest = stats::p_two_sided(1628.5, 51, 67, tie_free);
    t.expect(headline.p < 0.001, fmt::format("U=2368 p={}", headline.p));
    t.expect(stats::format_p(headline.p) == "p < .001", stats::format_p(headline.p));
    t.expect(pretest.p >= 0.60 && pretest.p <= 0.70, fmt::format("U=1628.5 p={}", pretest.p));
    if (t.out.ok)
        t.out.detail = fmt::format("U=2368: p={:.2e} (z={:.2f}); U=1628.5: p={:.3f}", headline.p, headline.z, pretest.p);
    return t.out;
}

Outcome mann_whitney_oracles() {
    Tally t;
    const auto t0 = Wall::now();
    SplitMix64 rng(20240501);
    int exact_checked = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n1 = 1 + rng.below(12), n2 = 1 + rng.below(12);
        const auto a = random_sample(rng, n1, 1 + static_cast<int>(rng.below(20)));
        const auto b = random_sample(rng, n2, 1 + static_cast<int>(rng.below(20)));
        const auto u = stats::mann_whitney_u(a, b);
        t.expect(u.u_a == oracle::pairwise_u(a, b), fmt::format("pair {}: U mismatch", i));

        std::vector<double> pooled = a;
        pooled.insert(pooled.end(), b.begin(), b.end());
        const auto p = stats::p_two_sided(u.u_a, n1, n2, stats::rank_with_ties(pooled), stats::PMode::Exact);
        if (p.method == stats::PMethod::Degenerate) {
            t.expect(p.p == 1.0, fmt::format("pair {}: degenerate p {}", i, p.p));
            continue;
        }
        const double expected = oracle::enumerated_p_by_ranks(a, b);
        t.expect(std::abs(p.p - expected) <= 1e-12 * std::max(1.0, expected),
                 fmt::format("pair {} (n1={}, n2={}): exact p {} vs enumeration {}", i, n1, n2, p.p, expected));
        ++exact_checked;
    }
    const double elapsed = ms_since(t0) / 1000.0;
    t.expect(elapsed < 60.0, fmt::format("took {:.1f} s", elapsed));
    if (t.out.ok) t.out.detail = fmt::format("1000 pairs, {} exact p checked, {:.2f} s", exact_checked, elapsed);
    return t.out;
}

Outcome puzzle_round_trip() {
    Tally t;
    fixture::Harness h(11);
    const auto problems = h.service->problems();
    t.expect(problems.size() >= 4, "fixture bank has fewer than 4 problems");
    const Session s = h.service->create_session("acceptance", std::nullopt, Condition::PC);
    int passed = 0;
    for (const Problem& p : problems) {
        h.service->open_question(s.session_id, p.id);
        const auto first = split_lines(p.reference_solution).front();
        const HelpPayload help = h.service->request_help(s.session_id, p.id, first + "\n    return None\n");
        t.expect(help.kind == HelpPayload::Kind::Puzzle && help.puzzle.has_value(), p.id + ": no puzzle");
        if (!help.puzzle) continue;
        for (const Move& m : plan_optimal_moves(*help.puzzle)) h.service->puzzle_command(s.session_id, p.id, m);
        const PuzzleResponse checked = h.service->puzzle_command(s.session_id, p.id, CheckCommand{});
        t.expect(checked.feedback && checked.feedback->correct, p.id + ": check not correct");
        const std::string text = assemble(checked.state);
        const TestReport report = h.runner->run_tests(text, p.tests);
        t.expect(report.all_passed, p.id + ": assembled program fails tests");
        passed += report.all_passed && checked.feedback && checked.feedback->correct;
    }
    if (t.out.ok) t.out.detail = fmt::format("{}/{} fixtures", passed, problems.size());
    return t.out;
}

Outcome personalization_soundness() {
    Tally t;
    int preplaced = 0, distractors = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto fx = oracle::random_code_fixture(seed * 104729 + 3);
        const VerifiedSolution sol = verified(fx.solution);
        const Puzzle p = make_puzzle(sol, fx.student, {}, seed);
        const Alignment al = align_lines(fx.student, sol.source);
        const LineClassification cls = classify_student_lines(al);

        std::map<std::size_t, std::size_t> student_of;
        for (auto [s, l] : al.pairs) student_of[l] = s;
        for (const auto& id : p.preplaced) {
            ++preplaced;
            for (std::size_t line : p.find(id)->source_lines)
                t.expect(student_of.count(line) && cls.labels[student_of[line]] == LineLabel::Correct,
                         fmt::format("fixture {}: preplaced block {} not from a Correct line", seed, id));
        }
        std::set<std::string> incorrect;
        const auto student_lines = split_lines(fx.student);
        for (std::size_t i = 0; i < cls.labels.size(); ++i)
            if (cls.labels[i] == LineLabel::Incorrect) incorrect.insert(oracle::strip(student_lines[i]));
        for (const auto& d : p.distractors) {
            ++distractors;
            t.expect(incorrect.count(d.key()) > 0, fmt::format("fixture {}: distractor '{}' not from an Incorrect line",
                                                               seed, d.key()));
        }
        const auto sk = oracle::keys(fx.student), tk = oracle::keys(sol.source);
        if (sk.size() <= 10 && tk.size() <= 10)
            t.expect(al.pairs.size() == oracle::brute_force_lcs(sk, tk), fmt::format("fixture {}: LCS length", seed));
    }
    if (t.out.ok)
        t.out.detail = fmt::format("200 fixtures, {} preplaced blocks, {} distractors", preplaced, distractors);
    return t.out;
}

Outcome adaptation_exhaustion() {
    Tally t;
    auto runner = oracle::runner();
    int total_steps = 0;
    for (const Problem& problem : oracle::bank()) {
        const VerifiedSolution sol = verified(problem.reference_solution);
        PuzzleState s = new_state(make_puzzle(sol, "    return None\n    pass\nx = 1\n", {}, 77));
        for (int i = 0; i < kDefaultMinAttempts; ++i) s = check(s).first;
        int steps = 0;
        bool ended_right = false;
        while (steps < 200) {
            try {
                s = help_me(s, kDefaultMinAttempts).first;
                ++steps;
            } catch (const Error& e) {
                ended_right = e.code() == ErrorCode::NothingToAdapt;
                break;
            }
        }
        total_steps += steps;
        t.expect(ended_right, problem.id + ": did not end at NothingToAdapt");
        t.expect(s.puzzle.block_count() == 1, fmt::format("{}: {} blocks left", problem.id, s.puzzle.block_count()));
        for (const Move& m : plan_optimal_moves(s)) s = apply_move(s, m);
        const auto [done, fb] = check(s);
        t.expect(fb.correct, problem.id + ": final puzzle not solvable");
        t.expect(runner->run_tests(assemble(done), problem.tests).all_passed, problem.id + ": assembled text fails");
    }
    if (t.out.ok) t.out.detail = fmt::format("{} fixtures, {} adaptations total", oracle::bank().size(), total_steps);
    return t.out;
}

SimSetup sim_setup(const fs::path& log) {
    SimSetup s;
    s.runner = std::make_shared<CachingRunner>(oracle::runner());
    s.provider = oracle::mock_provider();
    s.problems = oracle::bank();
    s.log_path = log;
    return s;
}

constexpr std::size_t kFastCC = 9;

struct CohortRuns {
    fs::path dir;
    SimScript script;
    SimResult first, second;
};

CohortRuns& cohort() {
    static CohortRuns runs = [] {
        CohortRuns r;
        r.dir = fs::temp_directory_path() / fmt::format("parsons-acceptance-{}", ::getpid());
        fs::create_directories(r.dir);
        r.script = make_cohort_script(oracle::bank(), 51, 67, 20240501, kFastCC);
        r.first = simulate(r.script, sim_setup(r.dir / "run1.jsonl"));
        r.second = simulate(r.script, sim_setup(r.dir / "run2.jsonl"));
        return r;
    }();
    return runs;
}

Outcome condition_fidelity() {
    Tally t;
    const CohortRuns& runs = cohort();
    const SimResult& r = runs.first;
    t.expect(r.practice_time.has_value() && r.attempts.has_value(), "no report");
    if (!t.out.ok) return t.out;
    t.expect(r.practice_time->pc.n == 51 && r.practice_time->cc.n == 67,
             fmt::format("n1={}, n2={}", r.practice_time->pc.n, r.practice_time->cc.n));

    std::set<std::string> pc_sessions;
    for (const auto& s : r.students)
        if (s.condition == Condition::PC) pc_sessions.insert(s.session_id);
    int pc_help = 0;
    for (const auto& e : r.events) {
        if (!pc_sessions.count(e.session_id)) continue;
        if (e.kind == EventKind::HelpRequest || e.kind == EventKind::Regenerate) {
            ++pc_help;
            t.expect(e.payload.value("kind", "") == "puzzle", e.session_id + " received a full solution");
        }
        t.expect(e.condition == Condition::PC, e.session_id + " logged under CC");
    }
    for (const auto& s : r.students)
        if (s.condition == Condition::PC) t.expect(s.solution_payloads == 0, s.student_id + " got a solution payload");

    // replay from disk, and recompute minutes with an independent two-pass oracle
    const auto replayed_log = load_event_log(runs.dir / "run1.jsonl");
    t.expect(replayed_log.size() == r.events.size(), "replayed log size differs");
    const auto records = engagement_records(replayed_log, 2.0);
    const auto oracle_minutes = oracle::two_pass_minutes(replayed_log);
    std::map<std::string, const EngagementRecord*> by_student;
    for (const auto& rec : records) by_student[rec.student_id] = &rec;
    std::set<std::string> flagged, tagged;
    for (const auto& s : r.students) {
        const EngagementRecord* rec = by_student.count(s.student_id) ? by_student[s.student_id] : nullptr;
        t.expect(rec != nullptr, s.student_id + " missing after replay");
        if (!rec) continue;
        t.expect(rec->practice_minutes == s.practice_minutes, s.student_id + ": practice time differs on replay");
        t.expect(rec->attempts == s.attempts, s.student_id + ": attempts differ on replay");
        t.expect(std::abs(oracle_minutes.at(s.student_id) - rec->practice_minutes) < 1e-9,
                 s.student_id + ": oracle minutes differ");
        if (rec->fast_finisher) flagged.insert(s.student_id);
        if (s.tag == "fast") tagged.insert(s.student_id);
    }
    t.expect(tagged.size() == kFastCC, fmt::format("{} tagged fast students", tagged.size()));
    t.expect(flagged == tagged, fmt::format("flagged {} students, scripted {}", flagged.size(), tagged.size()));

    for (auto metric : {stats::Metric::PracticeTime, stats::Metric::Attempts}) {
        const auto again = stats::render_text(stats::condition_report(records, metric));
        const auto& orig = metric == stats::Metric::PracticeTime ? *r.practice_time : *r.attempts;
        t.expect(again == stats::render_text(orig), std::string(stats::to_string(metric)) + " report differs on replay");
    }
    if (t.out.ok)
        t.out.detail = fmt::format("n1=51 n2=67, {} PC help events all puzzles, {} fast finishers; {}", pc_help,
                                   flagged.size(), stats::render_comparison(*r.practice_time));
    return t.out;
}

Outcome determinism() {
    Tally t;
    const CohortRuns& runs = cohort();
    const std::string a = slurp(runs.dir / "run1.jsonl"), b = slurp(runs.dir / "run2.jsonl");
    t.expect(!a.empty(), "empty log");
    t.expect(a == b, "event logs differ");

    // puzzles as handed out: the same seeds must mint the same blocks, ids and tray order
    fixture::Harness h1(99), h2(99);
    int puzzles = 0;
    for (const Problem& p : h1.service->problems()) {
        const Session s1 = h1.service->create_session("d-" + p.id, std::nullopt, Condition::PC);
        const Session s2 = h2.service->create_session("d-" + p.id, std::nullopt, Condition::PC);
        const std::string draft = split_lines(p.reference_solution).front() + "\n    return 0\n";
        const HelpPayload x = h1.service->request_help(s1.session_id, p.id, draft);
        const HelpPayload y = h2.service->request_help(s2.session_id, p.id, draft);
        t.expect(x.puzzle && y.puzzle && *x.puzzle == *y.puzzle, p.id + ": puzzles differ");
        const HelpPayload x2 = h1.service->regenerate(s1.session_id, p.id, draft);
        const HelpPayload y2 = h2.service->regenerate(s2.session_id, p.id, draft);
        t.expect(x2.puzzle && y2.puzzle && *x2.puzzle == *y2.puzzle, p.id + ": regenerated puzzles differ");
        puzzles += 2;
    }
    std::string e1, e2;
    for (const auto& e : h1.service->events()) e1 += serialize_event(e) + "\n";
    for (const auto& e : h2.service->events()) e2 += serialize_event(e) + "\n";
    t.expect(e1 == e2, "service event logs differ");
    if (t.out.ok)
        t.out.detail = fmt::format("{} bytes of log identical across runs, {} puzzles identical", a.size(), puzzles);
    return t.out;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"CLES reproduction", cles_reproduction},
        {"p-value consistency", p_consistency},
        {"Mann-Whitney oracle equivalence", mann_whitney_oracles},
        {"Puzzle round-trip", puzzle_round_trip},
        {"Personalization soundness", personalization_soundness},
        {"Adaptation exhaustion", adaptation_exhaustion},
        {"Condition fidelity + metric replay", condition_fidelity},
        {"Determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        const auto t0 = Wall::now();
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.ok;
        std::printf("%s  %-36s %s  [%.1f s]\n", o.ok ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                    ms_since(t0) / 1000.0);
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(fs::temp_directory_path() / fmt::format("parsons-acceptance-{}", ::getpid()), ec);
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

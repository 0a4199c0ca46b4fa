#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "parsons/config.hpp"
#include "parsons/error.hpp"
#include "parsons/simulate.hpp"

using namespace parsons;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    throw std::runtime_error("expected an error");
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

SimSetup setup(const std::filesystem::path& log = {}) {
    SimSetup s;
    s.runner = std::make_shared<CachingRunner>(oracle::runner());
    s.provider = oracle::mock_provider();
    s.problems = oracle::bank();
    s.log_path = log;
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const json kBaseConfig = {{"runner", {{"command", "python3 -I"}}},
                          {"provider", {{"kind", "scripted"}, {"fixtures_dir", "mock"}}}};

}  // namespace

TEST_CASE("config parsing") {
    ::unsetenv("PARSONS_RUNNER");
    ::unsetenv("PARSONS_SEED");
    ::unsetenv("PARSONS_MIN_ATTEMPTS");
    ::unsetenv("PARSONS_DISTRACTOR_CAP");
    ::unsetenv("PARSONS_PROVIDER_ENDPOINT");

    SUBCASE("defaults and relative paths") {
        const ServiceConfig cfg = parse_config(kBaseConfig.dump(), "/etc/parsons");
        CHECK(cfg.runner_command == "python3 -I");
        CHECK(cfg.provider.fixtures_dir == std::filesystem::path("/etc/parsons/mock"));
        CHECK(cfg.min_attempts == 3);
        CHECK(cfg.distractor_cap == 3);
        CHECK(cfg.retry_budget == 3);
        CHECK(cfg.fast_finisher_minutes == 2.0);
    }
    SUBCASE("missing runner.command is named") {
        json j = kBaseConfig;
        j["runner"].erase("command");
        const std::string msg = message_of([&] { parse_config(j.dump()); });
        CHECK(msg.find("runner.command") != std::string::npos);
        CHECK(msg.rfind("ConfigError", 0) == 0);
    }
    SUBCASE("environment overrides") {
        json j = kBaseConfig;
        j["runner"].erase("command");
        ::setenv("PARSONS_RUNNER", "python3", 1);
        ::setenv("PARSONS_MIN_ATTEMPTS", "5", 1);
        const ServiceConfig cfg = parse_config(j.dump());
        CHECK(cfg.runner_command == "python3");
        CHECK(cfg.min_attempts == 5);
        ::setenv("PARSONS_SEED", "abc", 1);
        CHECK(code_of([&] { parse_config(j.dump()); }) == ErrorCode::ConfigError);
        ::unsetenv("PARSONS_RUNNER");
        ::unsetenv("PARSONS_MIN_ATTEMPTS");
        ::unsetenv("PARSONS_SEED");
    }
    SUBCASE("bad values") {
        json j = kBaseConfig;
        j["retry_budget"] = 0;
        CHECK(message_of([&] { parse_config(j.dump()); }).find("retry_budget") != std::string::npos);
        j = kBaseConfig;
        j["min_attempts"] = "three";
        CHECK(message_of([&] { parse_config(j.dump()); }).find("min_attempts") != std::string::npos);
        j = kBaseConfig;
        j["provider"] = {{"kind", "http"}};
        CHECK(message_of([&] { parse_config(j.dump()); }).find("provider.endpoint") != std::string::npos);
        CHECK(code_of([] { parse_config("{\"runner\": "); }) == ErrorCode::ConfigError);
        CHECK(code_of([] { load_config("/nonexistent/parsons.json"); }) == ErrorCode::ConfigError);
    }
    SUBCASE("shipped example config loads") {
        const ServiceConfig cfg = load_config(oracle::source_dir() / "config" / "example.json");
        CHECK(cfg.provider.kind == "scripted");
        CHECK(cfg.cache_runs);
        CHECK(std::filesystem::exists(cfg.problem_bank));
    }
}

TEST_CASE("one student, one five-minute question") {
    const Problem p = oracle::bank().front();
    SimScript script;
    script.seed = 1;
    SimStudent st{"solo", Condition::PC, "", {}};
    st.timeline.push_back({0, "open", p.id});
    st.timeline.push_back({300000, "submit", p.id, p.reference_solution});
    script.students.push_back(st);

    const SimResult r = simulate(script, setup());
    REQUIRE(r.students.size() == 1);
    CHECK(r.students[0].practice_minutes == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(r.students[0].attempts == 1);
    CHECK_FALSE(r.students[0].fast_finisher);
    CHECK_FALSE(r.practice_time.has_value());  // only one condition present
}

TEST_CASE("copy-paste CC student under two minutes is flagged") {
    const Problem p = oracle::bank().front();
    SimScript script;
    script.seed = 2;
    SimStudent fast{"fast", Condition::CC, "fast", {}};
    fast.timeline = {{0, "open", p.id}, {5000, "help", p.id}, {9000, "copy", p.id}, {12000, "paste", p.id},
                     {15000, "submit", p.id}};
    SimStudent slow{"slow", Condition::PC, "", {}};
    slow.timeline = {{0, "open", p.id}, {200000, "submit", p.id, p.reference_solution}};
    script.students = {fast, slow};

    const SimResult r = simulate(script, setup());
    CHECK(r.students[0].fast_finisher);
    CHECK(r.students[0].solution_payloads == 1);
    CHECK(r.students[0].practice_minutes == doctest::Approx(0.25));
    CHECK_FALSE(r.students[1].fast_finisher);
    bool completed = false;
    for (const auto& e : r.events)
        completed |= e.student_id == "fast" && e.kind == EventKind::QuestionComplete;
    CHECK(completed);
    REQUIRE(r.practice_time.has_value());
    CHECK(r.practice_time->pc.n == 1);
}

TEST_CASE("script validation") {
    auto parse = [](const json& j) { return parse_sim_script(j.dump()); };
    const json ok = {{"seed", 3}, {"students", {{{"id", "a"}, {"timeline", {{{"t", 0}, {"action", "open"}, {"problem", "get_city"}}}}}}}};
    CHECK(parse(ok).students.size() == 1);

    json bad = ok;
    bad["students"][0]["timeline"][0]["action"] = "dance";
    CHECK(code_of([&] { parse(bad); }) == ErrorCode::ScriptError);
    bad = ok;
    bad["students"][0]["timeline"][0].erase("problem");
    CHECK(code_of([&] { parse(bad); }) == ErrorCode::ScriptError);
    bad = ok;
    bad["students"][0]["timeline"].push_back({{"t", -1}, {"action", "run"}, {"problem", "get_city"}});
    CHECK(code_of([&] { parse(bad); }) == ErrorCode::ScriptError);
    bad = ok;
    bad["students"].push_back(ok["students"][0]);
    CHECK(code_of([&] { parse(bad); }) == ErrorCode::ScriptError);
    bad = ok;
    bad["students"][0]["condition"] = "CC";
    bad["students"][0]["timeline"].push_back({{"t", 5}, {"action", "solve"}, {"problem", "get_city"}});
    CHECK(code_of([&] { parse(bad); }) == ErrorCode::ScriptError);
    CHECK(code_of([] { parse_sim_script("[1, 2]"); }) == ErrorCode::ScriptError);

    SUBCASE("runtime failures surface as ScriptError") {
        json j = ok;
        j["students"][0]["timeline"].push_back({{"t", 5}, {"action", "solve"}, {"problem", "get_city"}});
        j["students"][0]["condition"] = "PC";
        CHECK(code_of([&] { simulate(parse(j), setup()); }) == ErrorCode::ScriptError);
        j = ok;
        j["students"][0]["timeline"][0]["problem"] = "nope";
        CHECK(code_of([&] { simulate(parse(j), setup()); }) == ErrorCode::ScriptError);
    }
    SUBCASE("round trip") {
        const SimScript s = make_cohort_script(oracle::bank(), 2, 2, 9, 1);
        const json once = s;
        const json twice = parse_sim_script(once.dump());
        CHECK(once == twice);
    }
}

TEST_CASE("simulation is deterministic") {
    const auto dir = std::filesystem::temp_directory_path() / ("parsons-sim-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const SimScript script = make_cohort_script(oracle::bank(), 3, 3, 77, 1);

    const SimResult a = simulate(script, setup(dir / "a.jsonl"));
    const SimResult b = simulate(script, setup(dir / "b.jsonl"));
    const std::string log_a = slurp(dir / "a.jsonl");
    CHECK_FALSE(log_a.empty());
    CHECK(log_a == slurp(dir / "b.jsonl"));
    CHECK(render_summary(a) == render_summary(b));

    // every puzzle handed out is identical, including opaque block ids
    std::vector<json> puzzles_a, puzzles_b;
    for (const auto& e : a.events)
        if (e.kind == EventKind::HelpRequest) puzzles_a.push_back(e.payload);
    for (const auto& e : b.events)
        if (e.kind == EventKind::HelpRequest) puzzles_b.push_back(e.payload);
    CHECK(puzzles_a == puzzles_b);
    CHECK_FALSE(puzzles_a.empty());

    // a different seed changes the draw
    SimScript other = script;
    other.seed = 78;
    const SimResult c = simulate(other, setup());
    std::string events_c;
    for (const auto& e : c.events) events_c += serialize_event(e) + "\n";
    CHECK(events_c != log_a);

    std::filesystem::remove_all(dir);
}

TEST_CASE("cohort script shape") {
    const SimScript s = make_cohort_script(oracle::bank(), 4, 5, 11, 2);
    REQUIRE(s.students.size() == 9);
    std::size_t pc = 0, cc = 0, fast = 0;
    for (const auto& st : s.students) {
        REQUIRE(st.condition.has_value());
        (*st.condition == Condition::PC ? pc : cc)++;
        fast += st.tag == "fast";
        if (st.tag == "fast") CHECK(*st.condition == Condition::CC);
    }
    CHECK(pc == 4);
    CHECK(cc == 5);
    CHECK(fast == 2);
    CHECK_THROWS_AS(make_cohort_script(oracle::bank(), 1, 1, 0, 2), std::invalid_argument);
}

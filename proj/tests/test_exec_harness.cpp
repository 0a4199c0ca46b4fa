#include <doctest.h>

#include <chrono>

#include "oracles.hpp"
#include "parsons/error.hpp"
#include "parsons/exec_harness.hpp"

using namespace parsons;

namespace {

const Problem& add_grade() {
    static const std::vector<Problem> problems = oracle::bank();
    return problems.front();
}

}  // namespace

TEST_CASE("reference solutions pass their tests") {
    ProcessRunner runner;
    for (const auto& p : oracle::bank()) {
        const TestReport r = runner.run_tests(p.reference_solution, p.tests);
        CHECK_MESSAGE(r.all_passed, p.id);
        REQUIRE(r.results.size() == p.tests.size());
        for (std::size_t i = 0; i < p.tests.size(); ++i) CHECK(r.results[i].test_id == p.tests[i].id);
    }
}

TEST_CASE("empty program makes every test an Error") {
    ProcessRunner runner;
    const TestReport r = runner.run_tests("", add_grade().tests);
    CHECK_FALSE(r.all_passed);
    for (const auto& res : r.results) {
        CHECK(res.status == TestStatus::Error);
        CHECK(res.detail.find("NameError") != std::string::npos);
    }
}

TEST_CASE("a mutated expected literal fails exactly that test") {
    const Problem& p = add_grade();
    for (std::size_t victim = 0; victim < p.tests.size(); ++victim) {
        std::vector<TestCase> tests = p.tests;
        tests[victim].expected = "{'mutated': True}";
        ProcessRunner runner;
        const TestReport r = runner.run_tests(p.reference_solution, tests);
        for (std::size_t i = 0; i < tests.size(); ++i)
            CHECK(r.results[i].status == (i == victim ? TestStatus::Fail : TestStatus::Pass));
    }
}

TEST_CASE("Stdout comparison") {
    ProcessRunner runner;
    std::vector<TestCase> tests = {{"out", "greet('ana')", "hi ana\n", Comparison::Stdout},
                                   {"wrong", "greet('bo')", "hello bo", Comparison::Stdout}};
    const TestReport r = runner.run_tests("def greet(n):\n    print('hi', n)\n", tests);
    CHECK(r.results[0].status == TestStatus::Pass);
    CHECK(r.results[1].status == TestStatus::Fail);
}

TEST_CASE("dict comparison ignores insertion order") {
    ProcessRunner runner;
    std::vector<TestCase> tests = {{"t", "{'b': 1, 'a': {'y': 2, 'x': 1}}", "{'a': {'x': 1, 'y': 2}, 'b': 1}"}};
    CHECK(runner.run_tests("", tests).all_passed);
}

TEST_CASE("an infinite loop times out without affecting its siblings") {
    ProcessRunner runner;
    std::vector<TestCase> tests = {{"fast", "ok()", "1"}, {"spin", "spin()", "0"}, {"also_fast", "ok() + 1", "2"}};
    const std::string source = "def ok():\n    return 1\ndef spin():\n    while True:\n        pass\n";
    RunLimits limits;
    limits.timeout_ms = 700;
    const auto start = std::chrono::steady_clock::now();
    const TestReport r = runner.run_tests(source, tests, limits);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(r.results[0].status == TestStatus::Pass);
    CHECK(r.results[1].status == TestStatus::Error);
    CHECK(r.results[1].detail == "timeout");
    CHECK(r.results[2].status == TestStatus::Pass);
    CHECK(elapsed < std::chrono::seconds(10));
}

TEST_CASE("a child that forks and sleeps is killed with its group") {
    ProcessRunner runner;
    std::vector<TestCase> tests = {{"fork", "go()", "0"}};
    const std::string source =
        "import os, time\ndef go():\n    if os.fork() == 0:\n        time.sleep(60)\n    time.sleep(60)\n";
    RunLimits limits;
    limits.timeout_ms = 500;
    const auto start = std::chrono::steady_clock::now();
    const TestReport r = runner.run_tests(source, tests, limits);
    CHECK(r.results[0].detail == "timeout");
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
}

TEST_CASE("deterministic programs give identical statuses") {
    ProcessRunner runner;
    const Problem& p = add_grade();
    const std::string buggy = "def add_grade(g, s, c, x):\n    return {s: {c: [x]}}\n";
    const TestReport a = runner.run_tests(buggy, p.tests);
    const TestReport b = runner.run_tests(buggy, p.tests);
    CHECK(a.results == b.results);
}

TEST_CASE("malformed test input") {
    ProcessRunner runner;
    CHECK_THROWS_AS(runner.run_tests("x = 1", std::vector<TestCase>{}), Error);
    std::vector<TestCase> dup = {{"a", "1", "1"}, {"a", "2", "2"}};
    CHECK_THROWS_AS(runner.run_tests("", dup), Error);
    std::vector<TestCase> blank = {{"a", "", "1"}};
    CHECK_THROWS_AS(runner.run_tests("", blank), Error);
}

TEST_CASE("missing interpreter raises RunnerMissing") {
    ProcessRunner runner("definitely-not-a-python-binary-xyz");
    std::vector<TestCase> tests = {{"a", "1", "1"}};
    try {
        runner.run_tests("", tests);
        FAIL("expected RunnerMissing");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RunnerMissing);
    }
}

TEST_CASE("escaped protocol details survive the round trip") {
    ProcessRunner runner;
    std::vector<TestCase> tests = {{"t", "f()", "'a'"}};
    const TestReport r = runner.run_tests("def f():\n    return 'x\\ty\\nz'\n", tests);
    REQUIRE(r.results[0].status == TestStatus::Fail);
    CHECK(r.results[0].detail.find("x\\ty\\nz") != std::string::npos);

    TestResult out;
    CHECK(parse_result_line("t1\tFail\tgot a\\tb\\nc\\\\d", out));
    CHECK(out.detail == "got a\tb\nc\\d");
    CHECK_FALSE(parse_result_line("garbage", out));
    CHECK_FALSE(parse_result_line("t1\tMaybe\t", out));
}

TEST_CASE("CachingRunner memoizes identical requests") {
    auto inner = std::make_shared<ProcessRunner>();
    CachingRunner cache(inner);
    const Problem& p = add_grade();
    const TestReport a = cache.run_tests(p.reference_solution, p.tests);
    const TestReport b = cache.run_tests(p.reference_solution, p.tests);
    CHECK(cache.hits() == 1);
    CHECK(a.results == b.results);
    cache.run_tests(p.reference_solution + "\n", p.tests);
    CHECK(cache.hits() == 1);
}

TEST_CASE("concurrency cap is configurable") {
    const int before = max_concurrent_children();
    set_max_concurrent_children(1);
    CHECK(max_concurrent_children() == 1);
    ProcessRunner runner;
    CHECK(runner.run_tests(add_grade().reference_solution, add_grade().tests).all_passed);
    set_max_concurrent_children(before);
}

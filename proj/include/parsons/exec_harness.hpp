#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace parsons {

enum class Comparison { Equal, Stdout };

struct TestCase {
    std::string id;
    std::string invocation;  // expression (Equal) or statement (Stdout)
    std::string expected;    // literal rendering, or expected stdout
    Comparison comparison = Comparison::Equal;

    bool operator==(const TestCase&) const = default;
};

enum class TestStatus { Pass, Fail, Error };

struct TestResult {
    std::string test_id;
    TestStatus status = TestStatus::Error;
    std::string detail;

    bool operator==(const TestResult&) const = default;
};

struct TestReport {
    std::vector<TestResult> results;
    bool all_passed = false;
    std::int64_t duration_ms = 0;

    std::size_t pass_count() const;
};

struct RunLimits {
    int timeout_ms = 5000;
    /// Address-space cap for the child in bytes; 0 leaves it unlimited.
    std::uint64_t memory_hint = 0;
};

/// Runs source code against unit tests. All implementations must return one
/// result per test, in submission order.
class TestRunner {
public:
    virtual ~TestRunner() = default;
    virtual TestReport run_tests(const std::string& source, std::span<const TestCase> tests,
                                 const RunLimits& limits) = 0;
    TestReport run_tests(const std::string& source, std::span<const TestCase> tests) {
        return run_tests(source, tests, RunLimits{});
    }
};

/// Caps the number of live child processes across every ProcessRunner.
void set_max_concurrent_children(int n);
int max_concurrent_children();

/// Spawns one fresh interpreter per test inside a private temp directory.
/// The command is split on whitespace: "python3 -I" runs `python3 -I driver.py test.json`.
class ProcessRunner final : public TestRunner {
public:
    explicit ProcessRunner(std::string command = "python3 -I");

    /// Honors PARSONS_RUNNER when set, otherwise the given fallback.
    static std::string command_from_env(const std::string& fallback = "python3 -I");

    using TestRunner::run_tests;
    TestReport run_tests(const std::string& source, std::span<const TestCase> tests,
                         const RunLimits& limits) override;

    const std::string& command() const { return command_; }

    /// Absolute path of the interpreter, or RunnerMissing.
    std::string resolve_executable() const;

private:
    TestResult run_one(const std::string& executable, const std::string& source,
                       const TestCase& test, const RunLimits& limits) const;

    std::string command_;
    std::vector<std::string> argv_;
};

/// Memoizes reports by (source, tests). Only sound for deterministic programs,
/// which is what practice problems are; used by cohort simulation.
class CachingRunner final : public TestRunner {
public:
    explicit CachingRunner(std::shared_ptr<TestRunner> inner) : inner_(std::move(inner)) {}

    using TestRunner::run_tests;
    TestReport run_tests(const std::string& source, std::span<const TestCase> tests,
                         const RunLimits& limits) override;

    std::size_t hits() const;

private:
    std::shared_ptr<TestRunner> inner_;
    mutable std::mutex mutex_;
    std::map<std::string, TestReport> cache_;
    std::size_t hits_ = 0;
};

/// Parses one `<id>\t<status>\t<detail>` protocol line. Returns false on
/// anything malformed.
bool parse_result_line(const std::string& line, TestResult& out);

std::string_view to_string(TestStatus status);
std::string_view to_string(Comparison comparison);

void to_json(nlohmann::json& j, const TestCase& t);
void from_json(const nlohmann::json& j, TestCase& t);
void to_json(nlohmann::json& j, const TestReport& r);

}  // namespace parsons

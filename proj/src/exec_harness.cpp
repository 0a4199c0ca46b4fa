#include "parsons/exec_harness.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "parsons/error.hpp"

namespace parsons {

namespace fs = std::filesystem;

namespace {

// Loads solution.py into a fresh namespace, evaluates one test, and prints a
// single protocol line on the real stdout. Mapping keys are sorted before
// comparison so dict ordering never matters.
constexpr const char* kDriverScript = R"PY(import ast
import contextlib
import io
import json
import sys


def canon(v):
    if isinstance(v, dict):
        items = sorted((canon(k), canon(x)) for k, x in v.items())
        return "{" + ", ".join(k + ": " + x for k, x in items) + "}"
    if isinstance(v, list):
        return "[" + ", ".join(canon(x) for x in v) + "]"
    if isinstance(v, tuple):
        if len(v) == 1:
            return "(" + canon(v[0]) + ",)"
        return "(" + ", ".join(canon(x) for x in v) + ")"
    if isinstance(v, (set, frozenset)):
        body = ", ".join(sorted(canon(x) for x in v))
        if isinstance(v, frozenset):
            return "frozenset({" + body + "})"
        return "{" + body + "}" if v else "set()"
    return repr(v)


def emit(tid, status, detail):
    detail = detail.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")
    sys.__stdout__.write(tid + "\t" + status + "\t" + detail + "\n")
    sys.__stdout__.flush()


def describe(exc):
    return type(exc).__name__ + ": " + str(exc)


def main():
    with open(sys.argv[1], encoding="utf-8") as fh:
        spec = json.load(fh)
    tid = spec["id"]
    with open("solution.py", encoding="utf-8") as fh:
        source = fh.read()
    ns = {"__name__": "__solution__"}
    sink = io.StringIO()
    try:
        with contextlib.redirect_stdout(sink):
            exec(compile(source, "solution.py", "exec"), ns)
    except BaseException as exc:
        emit(tid, "Error", "solution failed to load: " + describe(exc))
        return
    if spec["comparison"] == "Equal":
        try:
            expected = ast.literal_eval(spec["expected"])
        except BaseException:
            emit(tid, "Error", "malformed expected literal")
            return
        try:
            with contextlib.redirect_stdout(sink):
                actual = eval(compile(spec["invocation"], "<test>", "eval"), ns)
        except BaseException as exc:
            emit(tid, "Error", describe(exc))
            return
        got, want = canon(actual), canon(expected)
        if got == want:
            emit(tid, "Pass", "")
        else:
            emit(tid, "Fail", "expected " + want + ", got " + got)
    else:
        out = io.StringIO()
        try:
            with contextlib.redirect_stdout(out):
                exec(compile(spec["invocation"], "<test>", "exec"), ns)
        except BaseException as exc:
            emit(tid, "Error", describe(exc))
            return
        got = out.getvalue().rstrip("\n")
        want = spec["expected"].rstrip("\n")
        if got == want:
            emit(tid, "Pass", "")
        else:
            emit(tid, "Fail", "expected output " + repr(want) + ", got " + repr(got))


main()
)PY";

class Slots {
public:
    void set_max(int n) {
        std::lock_guard lock(mutex_);
        max_ = n < 1 ? 1 : n;
        cv_.notify_all();
    }
    int max() const {
        std::lock_guard lock(mutex_);
        return max_;
    }
    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_use_ < max_; });
        ++in_use_;
    }
    void release() {
        std::lock_guard lock(mutex_);
        --in_use_;
        cv_.notify_one();
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    int max_ = 4;
    int in_use_ = 0;
};

Slots& child_slots() {
    static Slots slots;
    return slots;
}

struct SlotGuard {
    SlotGuard() { child_slots().acquire(); }
    ~SlotGuard() { child_slots().release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;
};

class TempDir {
public:
    TempDir() {
        std::string pattern = (fs::temp_directory_path() / "parsons-run-XXXXXX").string();
        if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string unescape_detail(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            const char n = s[++i];
            out += n == 't' ? '\t' : n == 'n' ? '\n' : n;
        } else {
            out += s[i];
        }
    }
    return out;
}

std::vector<std::string> split_command(const std::string& command) {
    std::istringstream in(command);
    std::vector<std::string> parts;
    for (std::string part; in >> part;) parts.push_back(part);
    return parts;
}

bool is_executable(const fs::path& p) {
    std::error_code ec;
    return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
}

}  // namespace

void set_max_concurrent_children(int n) { child_slots().set_max(n); }
int max_concurrent_children() { return child_slots().max(); }

std::size_t TestReport::pass_count() const {
    std::size_t n = 0;
    for (const auto& r : results) n += r.status == TestStatus::Pass;
    return n;
}

std::string_view to_string(TestStatus status) {
    switch (status) {
        case TestStatus::Pass: return "Pass";
        case TestStatus::Fail: return "Fail";
        case TestStatus::Error: return "Error";
    }
    return "Error";
}

std::string_view to_string(Comparison comparison) {
    return comparison == Comparison::Equal ? "Equal" : "Stdout";
}

bool parse_result_line(const std::string& line, TestResult& out) {
    const auto first = line.find('\t');
    if (first == std::string::npos) return false;
    const auto second = line.find('\t', first + 1);
    if (second == std::string::npos) return false;
    const std::string status = line.substr(first + 1, second - first - 1);
    if (status == "Pass") {
        out.status = TestStatus::Pass;
    } else if (status == "Fail") {
        out.status = TestStatus::Fail;
    } else if (status == "Error") {
        out.status = TestStatus::Error;
    } else {
        return false;
    }
    out.test_id = line.substr(0, first);
    out.detail = unescape_detail(std::string_view(line).substr(second + 1));
    return true;
}

ProcessRunner::ProcessRunner(std::string command)
    : command_(std::move(command)), argv_(split_command(command_)) {}

std::string ProcessRunner::command_from_env(const std::string& fallback) {
    if (const char* env = std::getenv("PARSONS_RUNNER"); env && *env) return env;
    return fallback;
}

std::string ProcessRunner::resolve_executable() const {
    if (argv_.empty()) throw Error(ErrorCode::RunnerMissing, "runner command is empty");
    const std::string& exe = argv_.front();
    if (exe.find('/') != std::string::npos) {
        if (is_executable(exe)) return exe;
        throw Error(ErrorCode::RunnerMissing, "runner '" + exe + "' is not an executable file");
    }
    const char* path_env = std::getenv("PATH");
    std::istringstream dirs(path_env ? path_env : "/usr/bin:/bin");
    for (std::string dir; std::getline(dirs, dir, ':');) {
        if (dir.empty()) continue;
        fs::path candidate = fs::path(dir) / exe;
        if (is_executable(candidate)) return candidate.string();
    }
    throw Error(ErrorCode::RunnerMissing, "runner '" + exe + "' not found on PATH");
}

TestReport ProcessRunner::run_tests(const std::string& source, std::span<const TestCase> tests,
                                    const RunLimits& limits) {
    if (tests.empty()) throw Error(ErrorCode::MalformedTest, "no test cases submitted");
    std::set<std::string> ids;
    for (const auto& t : tests) {
        if (t.id.empty() || t.id.find_first_of("\t\n") != std::string::npos)
            throw Error(ErrorCode::MalformedTest, "test id must be non-empty without tabs/newlines");
        if (t.invocation.empty())
            throw Error(ErrorCode::MalformedTest, "test '" + t.id + "' has an empty invocation");
        if (!ids.insert(t.id).second)
            throw Error(ErrorCode::MalformedTest, "duplicate test id '" + t.id + "'");
    }
    const std::string executable = resolve_executable();

    const auto start = std::chrono::steady_clock::now();
    TestReport report;
    report.results.resize(tests.size());
    {
        std::vector<std::jthread> workers;
        workers.reserve(tests.size());
        for (std::size_t i = 0; i < tests.size(); ++i) {
            workers.emplace_back([&, i] {
                SlotGuard slot;
                report.results[i] = run_one(executable, source, tests[i], limits);
            });
        }
    }
    report.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    report.all_passed = true;
    for (const auto& r : report.results) report.all_passed &= r.status == TestStatus::Pass;
    return report;
}

TestResult ProcessRunner::run_one(const std::string& executable, const std::string& source,
                                  const TestCase& test, const RunLimits& limits) const {
    TestResult result{test.id, TestStatus::Error, ""};
    TempDir dir;
    write_file(dir.path() / "solution.py", source);
    write_file(dir.path() / "driver.py", kDriverScript);
    nlohmann::json spec = test;
    write_file(dir.path() / "test.json", spec.dump());

    // Everything the child touches is prepared before fork.
    std::vector<std::string> args = argv_;
    args.front() = executable;
    args.push_back("driver.py");
    args.push_back("test.json");
    std::vector<char*> cargv;
    for (auto& a : args) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    const std::string workdir = dir.path().string();

    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) {
        result.detail = "pipe failed";
        return result;
    }

    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        result.detail = "fork failed";
        return result;
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        if (::chdir(workdir.c_str()) != 0) ::_exit(126);
        const int devnull = ::open("/dev/null", O_RDWR);
        ::dup2(devnull, STDIN_FILENO);
        ::dup2(devnull, STDERR_FILENO);
        ::dup2(fds[1], STDOUT_FILENO);
        if (limits.memory_hint > 0) {
            rlimit rl{limits.memory_hint, limits.memory_hint};
            ::setrlimit(RLIMIT_AS, &rl);
        }
        ::execv(cargv[0], cargv.data());
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(fds[1]);

    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(limits.timeout_ms);
    auto remaining_ms = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   deadline - std::chrono::steady_clock::now())
            .count();
    };

    std::string output;
    bool timed_out = false;
    char buf[4096];
    for (;;) {
        const auto left = remaining_ms();
        if (left <= 0) {
            timed_out = true;
            break;
        }
        pollfd pfd{fds[0], POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(left));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) {
            timed_out = rc == 0;
            break;
        }
        const ssize_t n = ::read(fds[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
        if (output.size() > (1u << 20)) break;
    }
    ::close(fds[0]);

    int status = 0;
    for (;;) {
        if (!timed_out && remaining_ms() <= 0) timed_out = true;
        if (timed_out) {
            ::killpg(pid, SIGKILL);
            while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
            }
            break;
        }
        const pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid || (done < 0 && errno != EINTR)) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    // Reap stragglers the program may have spawned.
    ::killpg(pid, SIGKILL);

    if (timed_out) {
        result.detail = "timeout";
        return result;
    }

    std::istringstream lines(output);
    bool parsed = false;
    for (std::string line; std::getline(lines, line);) {
        TestResult candidate;
        if (parse_result_line(line, candidate) && candidate.test_id == test.id) {
            result = std::move(candidate);
            parsed = true;
        }
    }
    if (!parsed) {
        result.detail = "runner produced no result";
        if (WIFEXITED(status)) result.detail += " (exit " + std::to_string(WEXITSTATUS(status)) + ")";
        if (WIFSIGNALED(status)) result.detail += " (signal " + std::to_string(WTERMSIG(status)) + ")";
    }
    return result;
}

TestReport CachingRunner::run_tests(const std::string& source, std::span<const TestCase> tests,
                                    const RunLimits& limits) {
    nlohmann::json key = {{"source", source}, {"timeout", limits.timeout_ms}};
    for (const auto& t : tests) key["tests"].push_back(t);
    const std::string k = key.dump();
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(k); it != cache_.end()) {
            ++hits_;
            return it->second;
        }
    }
    TestReport report = inner_->run_tests(source, tests, limits);
    std::lock_guard lock(mutex_);
    cache_.emplace(k, report);
    return report;
}

std::size_t CachingRunner::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

void to_json(nlohmann::json& j, const TestCase& t) {
    j = {{"id", t.id},
         {"invocation", t.invocation},
         {"expected", t.expected},
         {"comparison", std::string(to_string(t.comparison))}};
}

void from_json(const nlohmann::json& j, TestCase& t) {
    t.id = j.at("id").get<std::string>();
    t.invocation = j.at("invocation").get<std::string>();
    t.expected = j.at("expected").get<std::string>();
    const std::string cmp = j.value("comparison", std::string("Equal"));
    if (cmp == "Equal") {
        t.comparison = Comparison::Equal;
    } else if (cmp == "Stdout") {
        t.comparison = Comparison::Stdout;
    } else {
        throw Error(ErrorCode::MalformedTest, "unknown comparison '" + cmp + "'");
    }
}

void to_json(nlohmann::json& j, const TestReport& r) {
    j = nlohmann::json::object();
    j["all_passed"] = r.all_passed;
    j["duration_ms"] = r.duration_ms;
    j["results"] = nlohmann::json::array();
    for (const auto& res : r.results) {
        j["results"].push_back(
            {{"id", res.test_id}, {"status", std::string(to_string(res.status))}, {"detail", res.detail}});
    }
}

}  // namespace parsons

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "parsons/config.hpp"
#include "parsons/error.hpp"
#include "parsons/http_api.hpp"
#include "parsons/service.hpp"
#include "parsons/simulate.hpp"
#include "parsons/storage.hpp"

using namespace parsons;

namespace {

// Exit codes by error category; 2 is left to CLI11 for usage errors.
int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigError:
            return 3;
        case ErrorCode::ParseError:
        case ErrorCode::MalformedLog:
        case ErrorCode::ScriptError:
        case ErrorCode::MalformedTest:
            return 4;
        case ErrorCode::MissingCondition:
        case ErrorCode::EmptySample:
        case ErrorCode::NonFiniteValue:
        case ErrorCode::URangeViolation:
            return 5;
        case ErrorCode::RunnerMissing:
            return 6;
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::NoVerifiedSolution:
            return 7;
        case ErrorCode::VerificationFailed:
            return 8;
        default:
            return 1;
    }
}

int cmd_serve(const std::string& config_path, std::optional<int> port) {
    ServiceConfig cfg = load_config(config_path);
    if (port) cfg.port = *port;

    // Block the shutdown signals before any thread starts so only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ServiceBundle bundle = build_service(cfg);
    HttpServer server(bundle.service);
    const int bound = server.bind(cfg.host, cfg.port);
    server.start();
    spdlog::info("parsons ready on http://{}:{} ({} problems, data in {})", cfg.host, bound,
                 bundle.service->problems().size(), cfg.data_dir.string());

    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("received signal {}, shutting down", sig);
    server.stop();
    bundle.log->flush();
    spdlog::info("event log flushed ({} events)", bundle.log->size());
    return 0;
}

int cmd_ingest(const std::string& config_path, const std::string& bank) {
    ServiceConfig cfg = load_config(config_path);
    cfg.problem_bank.clear();
    ServiceBundle bundle = build_service(cfg);
    const IngestReport r = bundle.service->ingest_problems(std::filesystem::path(bank));
    std::cout << "ingested " << r.accepted << " problem(s)\n";
    for (const auto& [id, reason] : r.rejected) std::cerr << "rejected " << id << ": " << reason << "\n";
    return r.rejected.empty() ? 0 : exit_code(ErrorCode::VerificationFailed);
}

struct SimulateArgs {
    std::string script;
    std::string config;
    std::string out;
    std::string emit_script;
    std::string summary_json;
    std::optional<std::uint64_t> seed;
    std::size_t cohort_pc = 0;
    std::size_t cohort_cc = 0;
    std::size_t fast_cc = 0;
};

int cmd_simulate(const SimulateArgs& a) {
    const ServiceConfig cfg = load_config(a.config);
    if (cfg.problem_bank.empty()) throw Error(ErrorCode::ConfigError, "simulate needs 'problem_bank' in the config");
    const std::vector<Problem> problems = load_problem_bank(cfg.problem_bank);

    SimScript script;
    if (!a.script.empty()) {
        script = load_sim_script(a.script);
    } else if (a.cohort_pc + a.cohort_cc > 0) {
        script = make_cohort_script(problems, a.cohort_pc, a.cohort_cc, a.seed.value_or(cfg.seed), a.fast_cc);
    } else {
        throw Error(ErrorCode::ScriptError, "give a script path or --cohort-pc/--cohort-cc");
    }
    if (a.seed) script.seed = *a.seed;
    if (!a.emit_script.empty()) write_file_atomic(a.emit_script, nlohmann::json(script).dump(2) + "\n");

    set_max_concurrent_children(cfg.max_children);
    SimSetup setup;
    // Simulated cohorts rerun the same drafts many times; memoizing keeps desk runs fast.
    setup.runner = std::make_shared<CachingRunner>(std::make_shared<ProcessRunner>(cfg.runner_command));
    setup.provider = make_provider(cfg.provider);
    setup.problems = problems;
    setup.options = options_from_config(cfg);
    setup.log_path = a.out;

    const SimResult result = simulate(script, setup);
    std::cout << render_summary(result);
    if (!a.summary_json.empty()) {
        nlohmann::json students = nlohmann::json::array();
        for (const auto& s : result.students)
            students.push_back({{"student_id", s.student_id},
                                {"session_id", s.session_id},
                                {"condition", std::string(to_string(s.condition))},
                                {"tag", s.tag},
                                {"practice_minutes", s.practice_minutes},
                                {"attempts", s.attempts},
                                {"fast_finisher", s.fast_finisher}});
        nlohmann::json doc = {{"students", students}, {"events", result.events.size()}};
        if (result.practice_time) doc["practice_time"] = stats::report_json(*result.practice_time);
        if (result.attempts) doc["attempts"] = stats::report_json(*result.attempts);
        write_file_atomic(a.summary_json, doc.dump(2) + "\n");
    }
    return 0;
}

int cmd_report(const std::string& log_path, const std::string& metric, const std::string& format, double threshold) {
    const auto log = load_event_log(log_path);
    const auto records = engagement_records(log, threshold);
    const stats::StatReport report = stats::condition_report(records, stats::metric_from_string(metric));
    if (format == "json") {
        std::cout << stats::report_json(report).dump(2) << "\n";
    } else {
        std::cout << stats::render_text(report);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Personalized Parsons-puzzle practice service"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "parsons 1.0.0");

    std::string config_path;
    std::optional<int> port;
    auto* serve = app.add_subcommand("serve", "Run the /v1 HTTP API");
    serve->add_option("--config,-c", config_path, "Config file")->required()->check(CLI::ExistingFile);
    serve->add_option("--port", port, "Override listen.port");

    std::string bank;
    auto* ingest = app.add_subcommand("ingest", "Verify and add a problem bank to the data directory");
    ingest->add_option("--config,-c", config_path, "Config file")->required()->check(CLI::ExistingFile);
    ingest->add_option("bank", bank, "Problem bank JSON")->required()->check(CLI::ExistingFile);

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Drive scripted students on a virtual clock");
    simulate_cmd->add_option("script", sim.script, "Simulation script JSON")->check(CLI::ExistingFile);
    simulate_cmd->add_option("--config,-c", sim.config, "Config file")->required()->check(CLI::ExistingFile);
    simulate_cmd->add_option("--out,-o", sim.out, "Event log to write")->required();
    simulate_cmd->add_option("--seed", sim.seed, "Override the script seed");
    simulate_cmd->add_option("--cohort-pc", sim.cohort_pc, "Generate a cohort with this many PC students");
    simulate_cmd->add_option("--cohort-cc", sim.cohort_cc, "Generate a cohort with this many CC students");
    simulate_cmd->add_option("--fast-cc", sim.fast_cc, "CC students scripted to finish in under two minutes");
    simulate_cmd->add_option("--emit-script", sim.emit_script, "Write the generated script here");
    simulate_cmd->add_option("--summary-json", sim.summary_json, "Write the summary as JSON here");

    std::string log_path, metric = "practice_time", format = "text";
    double threshold = 2.0;
    auto* report = app.add_subcommand("report", "Compare conditions from an event log");
    report->add_option("log", log_path, "Event log (JSON lines)")->required()->check(CLI::ExistingFile);
    report->add_option("--metric,-m", metric, "practice_time or attempts")
        ->check(CLI::IsMember({"practice_time", "attempts"}));
    report->add_option("--format,-f", format, "text or json")->check(CLI::IsMember({"text", "json"}));
    report->add_option("--fast-threshold", threshold, "Fast-finisher threshold in minutes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and --version exit 0; every usage error is 2
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*serve) return cmd_serve(config_path, port);
        if (*ingest) return cmd_ingest(config_path, bank);
        if (*simulate_cmd) return cmd_simulate(sim);
        if (*report) return cmd_report(log_path, metric, format, threshold);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

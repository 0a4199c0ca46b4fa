#include "parsons/http_api.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace parsons {

using nlohmann::json;

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownSession:
        case ErrorCode::UnknownProblem:
        case ErrorCode::NoActivePuzzle:
            return 404;
        case ErrorCode::Unauthorized:
            return 401;
        case ErrorCode::DuplicateSession:
        case ErrorCode::WrongCondition:
        case ErrorCode::TooFewAttempts:
        case ErrorCode::NothingToAdapt:
        case ErrorCode::PuzzleAlreadySolved:
        case ErrorCode::NotSolved:
            return 409;
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::NoVerifiedSolution:
            return 502;
        case ErrorCode::RunnerMissing:
        case ErrorCode::VerificationFailed:
        case ErrorCode::MalformedLog:
            return 500;
        default:
            return 400;
    }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, {{"error", code}, {"message", message}}, status);
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw Error(ErrorCode::ParseError, "request body is not a JSON object");
    return body;
}

std::string body_code(const json& body) {
    if (!body.contains("code")) return {};
    if (!body["code"].is_string()) throw Error(ErrorCode::ParseError, "'code' must be a string");
    return body["code"].get<std::string>();
}

std::string bearer_token(const httplib::Request& req) {
    const std::string header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) return {};
    return header.substr(prefix.size());
}

json problem_view(const Problem& p) {
    json tests = json::array();
    for (const auto& t : p.tests) tests.push_back(t.id);
    return {{"id", p.id}, {"title", p.title}, {"prompt", p.prompt}, {"topic", p.topic}, {"tests", tests}};
}

json session_view(const Session& s) {
    json puzzles = json::object();
    for (const auto& [pid, state] : s.puzzles) puzzles[pid] = client_view(state);
    return {{"session_id", s.session_id},
            {"student_id", s.student_id},
            {"condition", std::string(to_string(s.condition))},
            {"problem_order", s.problem_order},
            {"code", s.code},
            {"puzzles", puzzles},
            {"help_count", s.help_count},
            {"completed", s.completed},
            {"created_at", s.created_at}};
}

Move parse_move(const json& body) {
    if (!body.contains("block_id") || !body["block_id"].is_string())
        throw Error(ErrorCode::ParseError, "move needs a string 'block_id'");
    const std::string to = body.value("to", std::string("area"));
    Move m;
    m.block_id = body["block_id"].get<std::string>();
    if (to == "tray") {
        m.target = ToTray{};
    } else if (to == "area") {
        if (!body.contains("position") || !body["position"].is_number_unsigned())
            throw Error(ErrorCode::ParseError, "area move needs a non-negative integer 'position'");
        m.target = ToArea{body["position"].get<std::size_t>()};
    } else {
        throw Error(ErrorCode::ParseError, "'to' must be \"tray\" or \"area\"");
    }
    return m;
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

/// Wraps a handler so library errors become structured error responses.
Handler guarded(Handler inner) {
    return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
        try {
            inner(req, res);
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), to_string(e.code()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "ParseError", e.what());
        } catch (const std::invalid_argument& e) {
            send_error(res, 400, "InvalidArgument", e.what());
        } catch (const std::exception& e) {
            spdlog::error("{} {}: {}", req.method, req.path, e.what());
            send_error(res, 500, "Internal", e.what());
        }
    };
}

}  // namespace

void mount_routes(httplib::Server& server, std::shared_ptr<ScaffoldService> service) {
    auto& svc = *service;
    // Keep the service alive for as long as the server holds the handlers.
    auto hold = [service](Handler h) { return guarded([service, h = std::move(h)](auto& req, auto& res) { h(req, res); }); };

    auto authed = [&svc](const httplib::Request& req) {
        const std::string sid = req.path_params.at("sid");
        svc.authorize(sid, bearer_token(req));
        return sid;
    };

    server.Get("/v1/problems", hold([&svc](const auto&, auto& res) {
        json list = json::array();
        for (const auto& p : svc.problems()) list.push_back(problem_view(p));
        send_json(res, {{"problems", list}});
    }));

    server.Get("/v1/problems/:pid", hold([&svc](const auto& req, auto& res) {
        send_json(res, problem_view(svc.problem(req.path_params.at("pid"))));
    }));

    server.Post("/v1/sessions", hold([&svc](const auto& req, auto& res) {
        const json body = parse_body(req);
        if (!body.contains("student_id") || !body["student_id"].is_string())
            throw Error(ErrorCode::ParseError, "'student_id' is required");
        std::optional<std::uint64_t> seed;
        if (body.contains("seed")) seed = body["seed"].get<std::uint64_t>();
        const Session s = svc.create_session(body["student_id"].get<std::string>(), seed);
        json view = session_view(s);
        view["token"] = s.token;
        send_json(res, view, 201);
    }));

    server.Get("/v1/sessions/:sid", hold([&svc, authed](const auto& req, auto& res) {
        send_json(res, session_view(svc.session(authed(req))));
    }));

    server.Post("/v1/sessions/:sid/problems/:pid/open", hold([&svc, authed](const auto& req, auto& res) {
        const std::string sid = authed(req);
        svc.open_question(sid, req.path_params.at("pid"));
        send_json(res, {{"opened", true}});
    }));

    server.Post("/v1/sessions/:sid/problems/:pid/run", hold([&svc, authed](const auto& req, auto& res) {
        const std::string sid = authed(req);
        const json body = parse_body(req);
        send_json(res, json(svc.save_and_run(sid, req.path_params.at("pid"), body_code(body))));
    }));

    server.Post("/v1/sessions/:sid/problems/:pid/submit", hold([&svc, authed](const auto& req, auto& res) {
        const std::string sid = authed(req);
        const json body = parse_body(req);
        const SubmitResult r = svc.submit(sid, req.path_params.at("pid"), body_code(body));
        send_json(res, {{"report", json(r.report)}, {"completed", r.completed}});
    }));

    server.Post("/v1/sessions/:sid/problems/:pid/help", hold([&svc, authed](const auto& req, auto& res) {
        const std::string sid = authed(req);
        const json body = parse_body(req);
        send_json(res, to_json(svc.request_help(sid, req.path_params.at("pid"), body_code(body))));
    }));

    server.Post("/v1/sessions/:sid/problems/:pid/regenerate", hold([&svc, authed](const auto& req, auto& res) {
        const std::string sid = authed(req);
        const json body = parse_body(req);
        send_json(res, to_json(svc.regenerate(sid, req.path_params.at("pid"), body_code(body))));
    }));

    server.Post("/v1/sessions/:sid/problems/:pid/copy", hold([&svc, authed](const auto& req, auto& res) {
        const std::string sid = authed(req);
        send_json(res, {{"text", svc.copy_answer(sid, req.path_params.at("pid"))}});
    }));

    auto puzzle_route = [&](const std::string& verb, std::function<PuzzleCommand(const json&)> make) {
        server.Post("/v1/sessions/:sid/problems/:pid/puzzle/" + verb,
                    hold([&svc, authed, make](const auto& req, auto& res) {
                        const std::string sid = authed(req);
                        const json body = parse_body(req);
                        send_json(res, to_json(svc.puzzle_command(sid, req.path_params.at("pid"), make(body))));
                    }));
    };
    puzzle_route("move", [](const json& body) -> PuzzleCommand { return parse_move(body); });
    puzzle_route("check", [](const json&) -> PuzzleCommand { return CheckCommand{}; });
    puzzle_route("help-me", [](const json&) -> PuzzleCommand { return HelpMeCommand{}; });
    puzzle_route("copy", [](const json&) -> PuzzleCommand { return CopyCommand{}; });

    server.Get("/v1/analytics/report", hold([&svc](const auto& req, auto& res) {
        const std::string metric = req.has_param("metric") ? req.get_param_value("metric") : "practice_time";
        const std::string format = req.has_param("format") ? req.get_param_value("format") : "json";
        const stats::StatReport report = svc.report(stats::metric_from_string(metric));
        if (format == "text") {
            res.set_content(stats::render_text(report), "text/plain");
        } else if (format == "json") {
            send_json(res, stats::report_json(report));
        } else {
            throw std::invalid_argument("format must be json or text");
        }
    }));
}

HttpServer::HttpServer(std::shared_ptr<ScaffoldService> service) : server_(std::make_unique<httplib::Server>()) {
    mount_routes(*server_, std::move(service));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
    } else {
        port_ = server_->bind_to_port(host, port) ? port : -1;
    }
    if (port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    return port_;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::start() {
    thread_ = std::jthread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void HttpServer::stop() {
    if (server_->is_running()) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace parsons

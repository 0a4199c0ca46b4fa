#pragma once

#include <memory>
#include <string>
#include <thread>

#include "parsons/error.hpp"
#include "parsons/service.hpp"

namespace httplib {
class Server;
}

namespace parsons {

/// 400, 401, 404, 409, 500 or 502 depending on the error category.
int http_status(ErrorCode code);

/// Registers every /v1 route on `server`, delegating to `service`.
void mount_routes(httplib::Server& server, std::shared_ptr<ScaffoldService> service);

/// Owns an httplib server with the /v1 routes mounted.
class HttpServer {
public:
    explicit HttpServer(std::shared_ptr<ScaffoldService> service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and returns the port; port 0 picks a free one.
    int bind(const std::string& host, int port);
    /// Blocks until stop() is called.
    void listen();
    /// Runs listen() on a background thread and waits until it accepts.
    void start();
    void stop();

    int port() const { return port_; }

private:
    std::unique_ptr<httplib::Server> server_;
    std::jthread thread_;
    int port_ = -1;
};

}  // namespace parsons

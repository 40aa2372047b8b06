#pragma once

#include "iplan/service/store.hpp"

#include <memory>
#include <string>

namespace iplan::service {

// JSON API over a SessionStore:
//   POST /sessions              create; body {variant, seed, boundary | layout, types?, centers?, id?}
//   POST /sessions/{id}/step    one pipeline step
//   POST /sessions/{id}/edit    body {op, ...}
//   GET  /sessions/{id}/state   session view
//   GET  /sessions/{id}/log     event log
//   GET  /sessions/{id}/render  PNG of the current board
// Errors come back as {error, message} with a 4xx/5xx status.
class HttpService {
public:
    explicit HttpService(SessionStore& store);
    ~HttpService();

    // Binds to `port`, or to a free port when it is 0; returns the bound port.
    int bind(const std::string& host, int port);
    // Serves until stop(); call bind() first.
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Status code for an error kind.
int http_status(const std::string& kind);

} // namespace iplan::service

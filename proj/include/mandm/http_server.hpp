#pragma once

#include <memory>
#include <string>

namespace mandm {

class TwinService;

/// HTTP/1.1 + JSON front end for a TwinService. /api/v1/live is a chunked
/// response carrying one JSON message per line.
class HttpServer {
public:
    explicit HttpServer(TwinService& service, std::string static_dir = {});
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;
    ~HttpServer();

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port; throws IoError if binding fails.
    int start(const std::string& host, int port);
    /// Blocks serving on the calling thread.
    void run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mandm

#include "mandm/http_server.hpp"

#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "mandm/error.hpp"
#include "mandm/service.hpp"
#include "mandm/wire.hpp"

namespace mandm {

namespace {

constexpr auto kJson = "application/json";
constexpr auto kStreamPoll = std::chrono::milliseconds(200);

void reply(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, kJson);
}

}  // namespace

struct HttpServer::Impl {
    TwinService& service;
    httplib::Server server;
    std::thread thread;

    explicit Impl(TwinService& s) : service(s) {}
};

HttpServer::HttpServer(TwinService& service, std::string static_dir) : impl_(std::make_unique<Impl>(service)) {
    auto& svr = impl_->server;
    auto& svc = impl_->service;

    svr.new_task_queue = [] { return new httplib::ThreadPool(32); };

    svr.Get("/api/v1/cluster", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.get_cluster()); });
    svr.Get(R"(/api/v1/correlate/user/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        reply(res, svc.correlate_user(req.matches[1]));
    });
    svr.Get(R"(/api/v1/correlate/node/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        reply(res, svc.correlate_node(req.matches[1]));
    });
    svr.Post("/api/v1/history/load", [&svc](const httplib::Request& req, httplib::Response& res) {
        reply(res, svc.history_load(req.body));
    });
    svr.Get("/api/v1/history/status",
            [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.history_status()); });
    svr.Get(R"(/api/v1/history/segments/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        reply(res, svc.history_segment(req.matches[1]));
    });
    svr.Post("/api/v1/history/exit",
             [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.history_exit()); });

    svr.Get("/api/v1/live", [&svc](const httplib::Request&, httplib::Response& res) {
        auto sub = svc.stream().subscribe();
        res.set_chunked_content_provider(
            "application/x-ndjson",
            [sub](std::size_t, httplib::DataSink& sink) {
                std::string msg;
                switch (sub->next(msg, kStreamPoll)) {
                    case Broadcaster::Subscription::Next::Message:
                        msg.push_back('\n');
                        return sink.write(msg.data(), msg.size());
                    case Broadcaster::Subscription::Next::Timeout:
                        return sink.is_writable();
                    case Broadcaster::Subscription::Next::Closed: {
                        auto close = wire_close_message(sub->close_reason()).dump() + "\n";
                        sink.write(close.data(), close.size());
                        sink.done();
                        return true;
                    }
                }
                return false;
            },
            [&svc, sub](bool) { svc.stream().unsubscribe(sub); });
    });

    if (!static_dir.empty() && !svr.set_mount_point("/", static_dir))
        spdlog::warn("static directory {} not found; UI bundle not served", static_dir);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    auto& svr = impl_->server;
    int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([&svr] { svr.listen_after_bind(); });
    svr.wait_until_ready();
    return bound;
}

void HttpServer::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
    if (!impl_) return;
    impl_->service.stream().close_all("server shutting down");
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace mandm

#include "mandm/service.hpp"

#include <charconv>

#include <spdlog/spdlog.h>

#include "mandm/analytics.hpp"
#include "mandm/error.hpp"
#include "mandm/wire.hpp"

namespace mandm {

using nlohmann::json;

namespace {

Response json_response(int status, const json& body) { return Response{status, body.dump()}; }

Response error_response(int status, const std::string& message) {
    return json_response(status, json{{"error", message}});
}

ClusterState initial_state(const ServiceConfig& cfg, std::optional<Simulator>& sim) {
    if (cfg.sim) {
        sim.emplace(build_sim(*cfg.sim, cfg.usage));
        return ClusterState::create(sim->topology(), sim->users(), cfg.usage);
    }
    return ClusterState::create(*cfg.topology, cfg.users, cfg.usage);
}

}  // namespace

TwinService::TwinService(ServiceConfig cfg)
    : cfg_(std::move(cfg)), live_(initial_state(cfg_, sim_)), stream_(cfg_.server.stream_buffer) {
    topology_ = live_.topology();
    usage_ = live_.usage_config();
    prepare_output_dirs(cfg_);
    if (cfg_.store_path) store_.emplace(TripleStore::open(*cfg_.store_path));
    const auto origin = sim_ ? sim_->clock() : 0;
    pipeline_ = std::make_unique<Pipeline>(live_, store_ ? &*store_ : nullptr, cfg_.archive, cfg_.alerts, origin);
    // A fixed roster has nothing to wait for.
    if (!sim_) publish();
}

TwinService::~TwinService() {
    stop();
    stream_.close_all("server shutting down");
}

TickBatch TwinService::step() {
    if (!sim_) throw ValidationError("service has no simulator to step");
    std::lock_guard lock(writer_mutex_);
    auto batch = sim_->tick();
    pipeline_->ingest(batch);
    if (auto name = pipeline_->archive_if_due()) spdlog::debug("archived {}", *name);
    publish();
    return batch;
}

void TwinService::start() {
    if (!sim_ || ticker_.joinable()) return;
    const auto period = std::chrono::milliseconds(cfg_.server.tick_period_ms);
    ticker_ = std::jthread([this, period](std::stop_token st) {
        std::mutex m;
        std::condition_variable_any cv;
        while (!st.stop_requested()) {
            try {
                step();
            } catch (const std::exception& e) {
                spdlog::error("tick failed: {}", e.what());
            }
            std::unique_lock lock(m);
            cv.wait_for(lock, st, period, [] { return false; });
        }
    });
}

void TwinService::stop() {
    if (ticker_.joinable()) {
        ticker_.request_stop();
        ticker_.join();
    }
}

void TwinService::publish() {
    auto next = std::make_shared<PublishedState>();
    next->state = live_;
    next->wire = wire_snapshot(live_.snapshot(), live_.topology(), live_.usage_config());
    next->body = next->wire.dump();

    std::shared_ptr<const PublishedState> prev;
    {
        std::lock_guard lock(published_mutex_);
        prev = published_;
        next->version = prev ? prev->version + 1 : 1;
        published_ = next;
    }
    std::optional<std::string> delta;
    if (prev && live_.topology().node_count() >= cfg_.server.delta_threshold_nodes)
        delta = wire_delta_message(prev->wire, next->wire).dump();
    stream_.publish(wire_full_message(next->wire).dump(), delta);
}

std::shared_ptr<const PublishedState> TwinService::published() const {
    std::lock_guard lock(published_mutex_);
    return published_;
}

Response TwinService::get_cluster() const {
    auto snap = published();
    if (!snap) return error_response(503, "no state published yet");
    return Response{200, snap->body};
}

Response TwinService::correlate_user(const std::string& id) const {
    auto snap = published();
    if (!snap) return error_response(503, "no state published yet");
    try {
        auto nodes = mandm::correlate_user(snap->state, id);
        return json_response(200, json{{"nodes", nodes}});
    } catch (const NotFound& e) {
        return error_response(404, e.what());
    }
}

Response TwinService::correlate_node(const std::string& id) const {
    auto snap = published();
    if (!snap) return error_response(503, "no state published yet");
    try {
        auto users = mandm::correlate_node(snap->state, id);
        return json_response(200, json{{"users", users}});
    } catch (const NotFound& e) {
        return error_response(404, e.what());
    }
}

Response TwinService::history_load(const std::string& body) {
    if (!cfg_.archive) return error_response(503, "no history archive configured");
    std::int64_t from = 0, to = 0;
    try {
        auto doc = json::parse(body);
        from = doc.at("from_ts").get<std::int64_t>();
        to = doc.at("to_ts").get<std::int64_t>();
    } catch (const json::exception&) {
        return error_response(400, "body must be {\"from_ts\": <int>, \"to_ts\": <int>}");
    }
    if (to < from) return error_response(400, "from_ts must not exceed to_ts");
    try {
        std::lock_guard lock(cursor_mutex_);
        auto handle = loader_.begin_load(*cfg_.archive, from, to);
        cursor_.reset();
        return json_response(202, json{{"job", handle}});
    } catch (const BusyError& e) {
        return error_response(409, e.what());
    }
}

Response TwinService::history_status() const { return json_response(200, wire_history_status(loader_.current())); }

Response TwinService::history_segment(const std::string& index) {
    std::size_t i = 0;
    auto [p, ec] = std::from_chars(index.data(), index.data() + index.size(), i);
    if (index.empty() || ec != std::errc{} || p != index.data() + index.size())
        return error_response(404, "segment index must be a nonnegative integer");

    std::lock_guard lock(cursor_mutex_);
    if (!cursor_) {
        auto handle = loader_.current_handle();
        if (!handle || loader_.current().phase != LoadPhase::Ready)
            return error_response(409, "history is not loaded");
        cursor_.emplace(loader_.cursor(*handle));
    }
    try {
        const auto& seg = cursor_->seek(i);
        return json_response(200, wire_snapshot(seg, topology_, usage_));
    } catch (const RangeError& e) {
        return error_response(404, e.what());
    }
}

Response TwinService::history_exit() {
    std::lock_guard lock(cursor_mutex_);
    cursor_.reset();
    loader_.discard();
    return json_response(200, wire_history_status(loader_.current()));
}

}  // namespace mandm

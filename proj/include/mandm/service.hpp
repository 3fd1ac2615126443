#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "mandm/broadcaster.hpp"
#include "mandm/config.hpp"
#include "mandm/history.hpp"
#include "mandm/model.hpp"
#include "mandm/pipeline.hpp"
#include "mandm/simulator.hpp"
#include "mandm/triple_store.hpp"

namespace mandm {

/// An immutable version of the live state as handed to readers.
struct PublishedState {
    std::uint64_t version = 0;
    ClusterState state;
    nlohmann::json wire;
    std::string body;  // wire, serialized once
};

struct Response {
    int status = 200;
    std::string body;
};

/// The twin behind the HTTP surface: one writer (sim ticks) publishing
/// immutable state versions, any number of concurrent readers, and the
/// history loader running beside both.
///
/// Handler methods return the HTTP status and JSON body so they can be
/// exercised without a socket.
class TwinService {
public:
    explicit TwinService(ServiceConfig cfg);
    TwinService(const TwinService&) = delete;
    TwinService& operator=(const TwinService&) = delete;
    ~TwinService();

    /// One sim tick through the pipeline, then publish. Throws
    /// ValidationError when the service has no simulator.
    TickBatch step();

    /// Ticks every server.tick_period_ms on a background thread.
    void start();
    void stop();

    /// Null until the first state is published.
    std::shared_ptr<const PublishedState> published() const;
    Broadcaster& stream() noexcept { return stream_; }
    const ServiceConfig& config() const noexcept { return cfg_; }
    HistoryLoader& loader() noexcept { return loader_; }

    Response get_cluster() const;
    Response correlate_user(const std::string& id) const;
    Response correlate_node(const std::string& id) const;
    Response history_load(const std::string& body);
    Response history_status() const;
    Response history_segment(const std::string& index);
    Response history_exit();

private:
    void publish();

    ServiceConfig cfg_;
    std::optional<Simulator> sim_;
    std::optional<TripleStore> store_;
    ClusterState live_;
    ClusterTopology topology_;  // fixed after construction; safe to read anywhere
    UsageConfig usage_;
    std::unique_ptr<Pipeline> pipeline_;
    std::mutex writer_mutex_;

    mutable std::mutex published_mutex_;
    std::shared_ptr<const PublishedState> published_;
    Broadcaster stream_;

    HistoryLoader loader_;
    std::mutex cursor_mutex_;
    std::optional<ReplayCursor> cursor_;

    std::jthread ticker_;
};

}  // namespace mandm

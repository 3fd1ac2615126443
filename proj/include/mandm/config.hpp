#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mandm/analytics.hpp"
#include "mandm/history.hpp"
#include "mandm/model.hpp"
#include "mandm/simulator.hpp"
#include "mandm/usage.hpp"

namespace mandm {

inline constexpr int kConfigVersion = 1;

struct ServerConfig {
    std::string bind = "127.0.0.1";
    int port = 8080;
    /// Messages buffered per /live subscriber before it is dropped.
    std::size_t stream_buffer = 64;
    /// Clusters with at least this many nodes stream deltas instead of full snapshots.
    std::size_t delta_threshold_nodes = 200;
    /// Wall-clock pause between sim ticks in `serve` and `sim --realtime`.
    std::int64_t tick_period_ms = 1000;
    /// Optional directory of console assets served at "/".
    std::filesystem::path static_dir;
};

/// Parsed service configuration. Exactly one of `sim` or `topology` is set.
struct ServiceConfig {
    std::optional<SimConfig> sim;
    std::optional<ClusterTopology> topology;
    std::vector<UserInfo> users;  // roster when `topology` is set
    UsageConfig usage;
    std::vector<AlertRule> alerts;
    std::optional<HistoryArchive> archive;
    std::optional<std::filesystem::path> store_path;
    ServerConfig server;
};

/// Throws ValidationError on schema violations. Relative paths resolve
/// against `base_dir`.
ServiceConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Throws IoError if unreadable, ValidationError if invalid.
ServiceConfig load_config(const std::filesystem::path& path);

/// Creates the archive directory and the store's parent directory if
/// missing. Throws IoError on failure.
void prepare_output_dirs(const ServiceConfig& cfg);

/// `explicit_path` if nonempty, else $MANDM_CONFIG. Throws ValidationError
/// when neither is set.
std::filesystem::path resolve_config_path(const std::string& explicit_path);

}  // namespace mandm

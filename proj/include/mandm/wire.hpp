#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "mandm/history.hpp"
#include "mandm/model.hpp"
#include "mandm/segment.hpp"

namespace mandm {

inline constexpr int kWireVersion = 1;

/// The one JSON shape the console renders, for live state and for replayed
/// segments alike. Derived values (tier, color, scale, GPU intensity) come
/// from the analytics functions; nothing else is computed here.
nlohmann::json wire_snapshot(const Segment& segment, const ClusterTopology& topology, const UsageConfig& usage);

/// Stream message carrying a full snapshot: the snapshot fields plus
/// `"kind": "full"`.
nlohmann::json wire_full_message(const nlohmann::json& snapshot);

/// Node, user and job entries that differ from `previous`, plus job ids
/// that disappeared. `"kind": "delta"`.
nlohmann::json wire_delta_message(const nlohmann::json& previous, const nlohmann::json& current);

/// Final message on a stream the server is closing.
nlohmann::json wire_close_message(const std::string& reason);

/// Rebuilds a full snapshot by applying a delta message; the inverse of
/// wire_delta_message.
nlohmann::json apply_wire_delta(const nlohmann::json& base, const nlohmann::json& delta);

nlohmann::json wire_history_status(const LoadStatus& status);

}  // namespace mandm

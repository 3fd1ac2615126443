#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mandm {

inline constexpr int kSegmentVersion = 1;

struct NodeRow {
    std::string node_id;
    double cpu_load_pct = 0;
    double mem_used_pct = 0;
    double net_rx_mbps = 0;
    double net_tx_mbps = 0;
    std::vector<double> gpu_loads;

    bool operator==(const NodeRow&) const = default;
};

struct UserRow {
    std::string user_id;
    std::string name;
    std::string rank;
    std::uint64_t node_count = 0;
    std::uint64_t file_count = 0;
    std::uint64_t job_count = 0;
    std::uint64_t alert_count = 0;
    double usage = 0;

    bool operator==(const UserRow&) const = default;
};

struct JobRow {
    std::string job_id;
    std::string user_id;
    std::string state;
    std::vector<std::string> node_ids;
    std::uint64_t files_open = 0;

    bool operator==(const JobRow&) const = default;
};

/// Point-in-time image of the whole cluster; the unit of archiving and replay.
///
/// Rows are kept sorted by id. Decimal values carry at most three
/// fractional digits (see quantize()) so that a CSV round trip is exact.
struct Segment {
    int version = kSegmentVersion;
    std::int64_t ts = 0;
    std::vector<NodeRow> node_rows;
    std::vector<UserRow> user_rows;
    std::vector<JobRow> job_rows;

    bool operator==(const Segment&) const = default;
};

/// Rounds to the 3-decimal grid used by the CSV encoding.
double quantize(double v) noexcept;

/// True if `field` may appear in a CSV cell: no ',', ';' or line breaks.
bool is_csv_safe(std::string_view field) noexcept;

/// Serializes to the line-oriented CSV grammar. Throws ValidationError on
/// unsafe fields or unsorted rows.
std::string serialize_segment(const Segment& s);

/// Strict parse. Throws ParseError naming the offending line.
Segment parse_segment(std::string_view bytes);

/// Decimal text for a CSV cell: fixed point, 1 to 3 fractional digits.
std::string format_decimal(double v);

}  // namespace mandm

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mandm {

struct Triple {
    std::string row;
    std::string col;
    std::string value;

    bool operator==(const Triple&) const = default;
    auto operator<=>(const Triple&) const = default;
};

struct StoreStats {
    std::uint64_t triple_count = 0;
    std::uint64_t bytes_on_disk = 0;

    bool operator==(const StoreStats&) const = default;
};

using Cell = std::pair<std::string, std::string>;

/// Log header: magic "MNMT", u32 version, 8 reserved bytes.
inline constexpr std::size_t kStoreHeaderSize = 16;
inline constexpr std::uint32_t kStoreFormatVersion = 1;

struct StoreOptions {
    /// fsync after every acknowledged put. Off by default: a put is handed
    /// to the kernel before it returns, which survives process death but
    /// not power loss.
    bool fsync_each_put = false;
};

/// Sparse associative array of (row, col) -> value with a transpose index.
///
/// Every put is appended to a write-ahead log before it becomes visible;
/// opening an existing log replays it (last write wins) and drops a torn
/// trailing record. Row-major and column-major indexes are updated under
/// one exclusive lock, so readers see either both or neither.
///
/// Thread safety: any number of concurrent readers, writes serialized.
class TripleStore {
public:
    /// Creates the log if absent. Throws IoError on unreadable or corrupt
    /// logs.
    static TripleStore open(const std::filesystem::path& path, StoreOptions options = {});
    /// No log; bytes_on_disk stays zero.
    static TripleStore in_memory();

    TripleStore(TripleStore&&) noexcept;
    TripleStore& operator=(TripleStore&&) noexcept;
    ~TripleStore();

    /// Throws ValidationError for empty row/col, IoError if the log append
    /// fails (the store then still reflects the last acknowledged put).
    void put(std::string_view row, std::string_view col, std::string_view value);

    /// Cells of `row`, sorted by col bytewise.
    std::vector<Cell> get_row(std::string_view row) const;
    /// (row, value) pairs for `col`, sorted by row bytewise. Served from the
    /// transpose index.
    std::vector<Cell> get_col(std::string_view col) const;
    /// Triples with start_row <= row < end_row in (row, col) order.
    std::vector<Triple> scan_row_range(std::string_view start_row, std::string_view end_row) const;
    std::vector<Triple> dump() const;

    StoreStats stats() const;

private:
    struct Impl;
    explicit TripleStore(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

/// `<entity>|<id>|<YYYYMMDDTHHMMSS>` (UTC) so time ranges are row ranges.
std::string telemetry_row_key(std::string_view entity, std::string_view id, std::int64_t unix_ts);
std::string iso8601_basic(std::int64_t unix_ts);

}  // namespace mandm

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mandm/segment.hpp"

namespace mandm {

inline constexpr std::int64_t kDefaultSegmentInterval = 300;

/// A directory of `segment_<ts>.csv` files.
struct HistoryArchive {
    std::filesystem::path directory;
    std::int64_t segment_interval_s = kDefaultSegmentInterval;
    /// Added to every segment file read; stands in for network distance
    /// between the archive and the reader.
    std::chrono::milliseconds read_latency{0};
};

struct ArchiveEntry {
    std::int64_t ts = 0;
    std::string filename;

    bool operator==(const ArchiveEntry&) const = default;
};

std::string segment_filename(std::int64_t ts);

/// Writes atomically (temp file + rename). Throws IoError if a segment with
/// the same ts already exists or the write fails; no partial file is left.
std::string write_segment(const HistoryArchive& archive, const Segment& segment);

/// Segments with from_ts <= ts < to_ts, ascending. Unrelated files are
/// skipped with a warning. Throws IoError if the directory is unreadable.
std::vector<ArchiveEntry> list_segments(const HistoryArchive& archive, std::int64_t from_ts, std::int64_t to_ts);

/// Reads and parses one file, honoring read_latency.
Segment read_segment(const HistoryArchive& archive, const ArchiveEntry& entry);

constexpr std::int64_t segments_for_duration(std::int64_t duration_s, std::int64_t interval_s) {
    return duration_s <= 0 ? 0 : duration_s / interval_s;
}

enum class LoadPhase : std::uint8_t { Idle, Loading, Ready, Failed };

std::string_view to_string(LoadPhase p) noexcept;

struct LoadStatus {
    LoadPhase phase = LoadPhase::Idle;
    std::uint64_t loaded = 0;
    std::uint64_t total = 0;
    std::string reason;  // Failed only
    std::int64_t started_at = 0;

    bool operator==(const LoadStatus&) const = default;
};

using SegmentArray = std::shared_ptr<const std::vector<Segment>>;

/// Scrubbing position over a loaded, ts-ordered segment array. Copies share
/// the array, which is immutable.
class ReplayCursor {
public:
    explicit ReplayCursor(SegmentArray segments);

    std::size_t size() const noexcept { return segments_->size(); }
    std::size_t index() const noexcept { return index_; }
    const Segment& current() const;

    /// Throws RangeError and leaves the position unchanged when out of range.
    const Segment& seek(std::size_t index);
    const Segment& step(std::int64_t delta);

private:
    SegmentArray segments_;
    std::size_t index_ = 0;
};

using LoadHandle = std::uint64_t;

/// Background bulk loader: reads every segment of a range into one array.
///
/// One job at a time. begin_load lists the range synchronously (a single
/// directory read) and hands the file reads to a worker thread; status is
/// observable from any thread while the worker runs. A corrupt or
/// unreadable file fails the whole job and no array is published.
class HistoryLoader {
public:
    HistoryLoader() = default;
    HistoryLoader(const HistoryLoader&) = delete;
    HistoryLoader& operator=(const HistoryLoader&) = delete;
    ~HistoryLoader();

    /// Throws BusyError while another job is Loading.
    LoadHandle begin_load(const HistoryArchive& archive, std::int64_t from_ts, std::int64_t to_ts);

    /// Throws NotFound for a handle that is not the current job.
    LoadStatus status(LoadHandle handle) const;
    /// Status of the current job, Idle if there is none.
    LoadStatus current() const;
    std::optional<LoadHandle> current_handle() const;

    /// Cursor over the loaded array. Throws BusyError unless the job is Ready.
    ReplayCursor cursor(LoadHandle handle) const;

    /// Forgets the current job and its array (waits for a running worker to stop).
    void discard();

    /// Blocks until the current job leaves Loading. For tests and the CLI.
    LoadStatus wait(LoadHandle handle) const;

private:
    struct Job;
    void run(std::stop_token stop, std::shared_ptr<Job> job, HistoryArchive archive,
             std::vector<ArchiveEntry> entries);

    mutable std::mutex mutex_;
    std::shared_ptr<Job> job_;
    std::jthread worker_;
    LoadHandle next_handle_ = 1;
};

struct BenchReport {
    std::uint64_t files = 0;
    double total_s = 0;
    double s_per_file = 0;
};

/// Synchronous full load of a range with wall-clock timing.
BenchReport bench_load(const HistoryArchive& archive, std::int64_t from_ts, std::int64_t to_ts);

}  // namespace mandm

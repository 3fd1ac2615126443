#include "mandm/history.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mandm/error.hpp"

namespace mandm {

namespace fs = std::filesystem;

std::string_view to_string(LoadPhase p) noexcept {
    switch (p) {
        case LoadPhase::Idle: return "idle";
        case LoadPhase::Loading: return "loading";
        case LoadPhase::Ready: return "ready";
        case LoadPhase::Failed: return "failed";
    }
    return "idle";
}

std::string segment_filename(std::int64_t ts) { return "segment_" + std::to_string(ts) + ".csv"; }

namespace {

std::optional<std::int64_t> ts_from_filename(std::string_view name) {
    constexpr std::string_view prefix = "segment_";
    constexpr std::string_view suffix = ".csv";
    if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) || !name.ends_with(suffix))
        return std::nullopt;
    auto digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    if (digits.find_first_not_of("0123456789") != std::string_view::npos) return std::nullopt;
    std::int64_t ts = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), ts);
    if (ec != std::errc{} || p != digits.data() + digits.size()) return std::nullopt;
    // Canonical spelling only, so ts -> filename is a bijection.
    if (segment_filename(ts) != name) return std::nullopt;
    return ts;
}

std::int64_t unix_now() {
    using namespace std::chrono;
    return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

std::string write_segment(const HistoryArchive& archive, const Segment& segment) {
    const auto bytes = serialize_segment(segment);
    const auto name = segment_filename(segment.ts);
    const auto target = archive.directory / name;
    const auto tmp = archive.directory / ("." + name + ".tmp");

    std::error_code ec;
    if (fs::exists(target, ec)) throw IoError("segment " + name + " already exists");

    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot create " + tmp.string() + ": " + std::strerror(errno));
    const char* p = bytes.data();
    std::size_t left = bytes.size();
    bool ok = true;
    while (left > 0) {
        ssize_t n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            ok = false;
            break;
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    int saved = errno;
    ok = (::close(fd) == 0) && ok;
    if (!ok) {
        fs::remove(tmp, ec);
        throw IoError("cannot write " + name + ": " + std::strerror(saved));
    }
    // link(2) fails with EEXIST instead of overwriting, which keeps segments immutable
    // even against a concurrent writer.
    if (::link(tmp.c_str(), target.c_str()) != 0) {
        saved = errno;
        fs::remove(tmp, ec);
        if (saved == EEXIST) throw IoError("segment " + name + " already exists");
        throw IoError("cannot publish " + name + ": " + std::strerror(saved));
    }
    fs::remove(tmp, ec);
    return name;
}

std::vector<ArchiveEntry> list_segments(const HistoryArchive& archive, std::int64_t from_ts, std::int64_t to_ts) {
    if (to_ts < from_ts) throw ValidationError("list_segments: from_ts must not exceed to_ts");
    std::error_code ec;
    fs::directory_iterator it(archive.directory, ec);
    if (ec) throw IoError("cannot read archive directory '" + archive.directory.string() + "': " + ec.message());

    std::vector<ArchiveEntry> out;
    for (const auto& entry : it) {
        auto name = entry.path().filename().string();
        auto ts = ts_from_filename(name);
        if (!ts) {
            if (!name.starts_with(".")) spdlog::warn("history: ignoring unrelated file {}", name);
            continue;
        }
        if (*ts >= from_ts && *ts < to_ts) out.push_back(ArchiveEntry{*ts, std::move(name)});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.ts < b.ts; });
    return out;
}

Segment read_segment(const HistoryArchive& archive, const ArchiveEntry& entry) {
    if (archive.read_latency.count() > 0) std::this_thread::sleep_for(archive.read_latency);
    const auto path = archive.directory / entry.filename;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + entry.filename);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + entry.filename);
    try {
        auto seg = parse_segment(buf.str());
        if (seg.ts != entry.ts)
            throw ParseError(1, "header ts " + std::to_string(seg.ts) + " does not match filename");
        return seg;
    } catch (const ParseError& e) {
        throw ParseError(e.line(), entry.filename + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

ReplayCursor::ReplayCursor(SegmentArray segments) : segments_(std::move(segments)) {
    if (!segments_) throw ValidationError("cursor needs a segment array");
}

const Segment& ReplayCursor::current() const {
    if (segments_->empty()) throw RangeError("cursor over an empty range");
    return (*segments_)[index_];
}

const Segment& ReplayCursor::seek(std::size_t index) {
    if (index >= segments_->size())
        throw RangeError("segment index " + std::to_string(index) + " out of range [0, " +
                         std::to_string(segments_->size()) + ")");
    index_ = index;
    return (*segments_)[index_];
}

const Segment& ReplayCursor::step(std::int64_t delta) {
    const auto target = static_cast<std::int64_t>(index_) + delta;
    if (target < 0 || target >= static_cast<std::int64_t>(segments_->size()))
        throw RangeError("step " + std::to_string(delta) + " from index " + std::to_string(index_) +
                         " leaves range [0, " + std::to_string(segments_->size()) + ")");
    return seek(static_cast<std::size_t>(target));
}

// ---------------------------------------------------------------------------

struct HistoryLoader::Job {
    LoadHandle handle = 0;
    mutable std::mutex mutex;
    mutable std::condition_variable changed;
    LoadStatus status;
    SegmentArray segments;

    LoadStatus snapshot() const {
        std::lock_guard lock(mutex);
        return status;
    }
};

HistoryLoader::~HistoryLoader() { discard(); }

LoadHandle HistoryLoader::begin_load(const HistoryArchive& archive, std::int64_t from_ts, std::int64_t to_ts) {
    std::unique_lock lock(mutex_);
    if (job_ && job_->snapshot().phase == LoadPhase::Loading) throw BusyError("a history load is already in progress");
    if (worker_.joinable()) worker_.join();  // previous job is final; its worker has returned

    auto job = std::make_shared<Job>();
    job->handle = next_handle_++;
    job->status.started_at = unix_now();
    job->status.phase = LoadPhase::Loading;

    std::vector<ArchiveEntry> entries;
    try {
        entries = list_segments(archive, from_ts, to_ts);
        job->status.total = entries.size();
    } catch (const Error& e) {
        job->status.phase = LoadPhase::Failed;
        job->status.reason = e.what();
    }
    job_ = job;
    if (job->status.phase == LoadPhase::Loading)
        worker_ = std::jthread([this, job, archive, entries = std::move(entries)](std::stop_token st) mutable {
            run(st, job, archive, std::move(entries));
        });
    return job->handle;
}

void HistoryLoader::run(std::stop_token stop, std::shared_ptr<Job> job, HistoryArchive archive,
                        std::vector<ArchiveEntry> entries) {
    auto segments = std::make_shared<std::vector<Segment>>();
    segments->reserve(entries.size());
    auto finish = [&](LoadPhase phase, std::string reason) {
        std::lock_guard lock(job->mutex);
        job->status.phase = phase;
        job->status.reason = std::move(reason);
        if (phase == LoadPhase::Ready) job->segments = std::move(segments);
        job->changed.notify_all();
    };
    for (const auto& entry : entries) {
        if (stop.stop_requested()) return finish(LoadPhase::Failed, "cancelled");
        try {
            segments->push_back(read_segment(archive, entry));
        } catch (const std::exception& e) {
            spdlog::error("history: load failed at {}: {}", entry.filename, e.what());
            return finish(LoadPhase::Failed, e.what());
        }
        std::lock_guard lock(job->mutex);
        ++job->status.loaded;
        job->changed.notify_all();
    }
    finish(LoadPhase::Ready, {});
}

LoadStatus HistoryLoader::status(LoadHandle handle) const {
    std::lock_guard lock(mutex_);
    if (!job_ || job_->handle != handle) throw NotFound("stale load handle " + std::to_string(handle));
    return job_->snapshot();
}

LoadStatus HistoryLoader::current() const {
    std::lock_guard lock(mutex_);
    return job_ ? job_->snapshot() : LoadStatus{};
}

std::optional<LoadHandle> HistoryLoader::current_handle() const {
    std::lock_guard lock(mutex_);
    if (!job_) return std::nullopt;
    return job_->handle;
}

ReplayCursor HistoryLoader::cursor(LoadHandle handle) const {
    std::shared_ptr<Job> job;
    {
        std::lock_guard lock(mutex_);
        if (!job_ || job_->handle != handle) throw NotFound("stale load handle " + std::to_string(handle));
        job = job_;
    }
    std::lock_guard lock(job->mutex);
    if (job->status.phase != LoadPhase::Ready)
        throw BusyError("history load is " + std::string(to_string(job->status.phase)) + ", not ready");
    return ReplayCursor(job->segments);
}

LoadStatus HistoryLoader::wait(LoadHandle handle) const {
    std::shared_ptr<Job> job;
    {
        std::lock_guard lock(mutex_);
        if (!job_ || job_->handle != handle) throw NotFound("stale load handle " + std::to_string(handle));
        job = job_;
    }
    std::unique_lock lock(job->mutex);
    job->changed.wait(lock, [&] { return job->status.phase != LoadPhase::Loading; });
    return job->status;
}

void HistoryLoader::discard() {
    std::jthread worker;
    {
        std::lock_guard lock(mutex_);
        worker = std::move(worker_);
        job_.reset();
    }
    if (worker.joinable()) {
        worker.request_stop();
        worker.join();
    }
}

BenchReport bench_load(const HistoryArchive& archive, std::int64_t from_ts, std::int64_t to_ts) {
    const auto start = std::chrono::steady_clock::now();
    auto entries = list_segments(archive, from_ts, to_ts);
    std::vector<Segment> segments;
    segments.reserve(entries.size());
    for (const auto& e : entries) segments.push_back(read_segment(archive, e));
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    BenchReport report;
    report.files = segments.size();
    report.total_s = elapsed.count();
    report.s_per_file = report.files > 0 ? report.total_s / static_cast<double>(report.files) : 0.0;
    return report;
}

}  // namespace mandm

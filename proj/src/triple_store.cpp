#include "mandm/triple_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <shared_mutex>

#include <spdlog/spdlog.h>

#include "mandm/error.hpp"

namespace mandm {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'N', 'M', 'T'};

using Index = std::map<std::string, std::map<std::string, std::string, std::less<>>, std::less<>>;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

std::string sys_error(const std::string& what, const std::filesystem::path& path) {
    return what + " '" + path.string() + "': " + std::strerror(errno);
}

std::string header_bytes() {
    std::string h(kMagic.begin(), kMagic.end());
    put_u32(h, kStoreFormatVersion);
    h.append(8, '\0');
    return h;
}

bool write_all(int fd, const char* data, std::size_t size) {
    while (size > 0) {
        ssize_t n = ::write(fd, data, size);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += n;
        size -= static_cast<std::size_t>(n);
    }
    return true;
}

}  // namespace

struct TripleStore::Impl {
    std::filesystem::path path;
    StoreOptions options;
    int fd = -1;

    std::mutex write_mutex;
    mutable std::shared_mutex index_mutex;
    Index rows;
    Index cols;
    std::uint64_t triple_count = 0;
    std::uint64_t bytes_on_disk = 0;

    ~Impl() {
        if (fd >= 0) ::close(fd);
    }

    // Caller holds index_mutex exclusively (or is the sole owner during replay).
    void apply(std::string_view row, std::string_view col, std::string_view value) {
        auto& cells = rows[std::string(row)];
        auto [it, inserted] = cells.insert_or_assign(std::string(col), std::string(value));
        (void)it;
        cols[std::string(col)].insert_or_assign(std::string(row), std::string(value));
        if (inserted) ++triple_count;
    }

    void replay(const std::string& bytes) {
        if (bytes.size() < kStoreHeaderSize || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
            throw IoError("store log '" + path.string() + "' has a bad header");
        if (auto v = get_u32(bytes.data() + 4); v != kStoreFormatVersion)
            throw IoError("store log '" + path.string() + "' has unsupported version " + std::to_string(v));

        std::size_t pos = kStoreHeaderSize;
        std::size_t good = pos;
        auto field = [&](std::string_view& out) {
            if (bytes.size() - pos < 4) return false;
            auto len = get_u32(bytes.data() + pos);
            if (bytes.size() - pos - 4 < len) return false;
            out = std::string_view(bytes).substr(pos + 4, len);
            pos += 4 + len;
            return true;
        };
        while (pos < bytes.size()) {
            std::string_view row, col, value;
            if (!field(row) || !field(col) || !field(value)) break;
            if (row.empty() || col.empty())
                throw IoError("store log '" + path.string() + "' has an empty key at offset " + std::to_string(good));
            apply(row, col, value);
            good = pos;
        }
        if (good < bytes.size()) {
            spdlog::warn("triple store: dropping {} bytes of torn record at end of {}", bytes.size() - good,
                         path.string());
            if (::ftruncate(fd, static_cast<off_t>(good)) != 0) throw IoError(sys_error("cannot truncate", path));
        }
        bytes_on_disk = good;
    }
};

TripleStore::TripleStore(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
TripleStore::TripleStore(TripleStore&&) noexcept = default;
TripleStore& TripleStore::operator=(TripleStore&&) noexcept = default;
TripleStore::~TripleStore() = default;

TripleStore TripleStore::in_memory() { return TripleStore(std::make_unique<Impl>()); }

TripleStore TripleStore::open(const std::filesystem::path& path, StoreOptions options) {
    auto impl = std::make_unique<Impl>();
    impl->path = path;
    impl->options = options;

    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        // Header goes in via a temp file so a crash never leaves a half header.
        auto tmp = path;
        tmp += ".tmp";
        int tfd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
        if (tfd < 0) throw IoError(sys_error("cannot create store log", tmp));
        auto header = header_bytes();
        bool ok = write_all(tfd, header.data(), header.size()) && ::fsync(tfd) == 0;
        ::close(tfd);
        if (!ok || std::rename(tmp.c_str(), path.c_str()) != 0) {
            std::filesystem::remove(tmp, ec);
            throw IoError(sys_error("cannot initialize store log", path));
        }
    }

    impl->fd = ::open(path.c_str(), O_RDWR | O_APPEND | O_CLOEXEC);
    if (impl->fd < 0) throw IoError(sys_error("cannot open store log", path));

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(sys_error("cannot read store log", path));
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    impl->replay(bytes);
    return TripleStore(std::move(impl));
}

void TripleStore::put(std::string_view row, std::string_view col, std::string_view value) {
    if (row.empty()) throw ValidationError("triple row must be nonempty");
    if (col.empty()) throw ValidationError("triple col must be nonempty");
    constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
    if (row.size() > kMax || col.size() > kMax || value.size() > kMax)
        throw ValidationError("triple field exceeds 4 GiB");

    std::lock_guard write_lock(impl_->write_mutex);
    if (impl_->fd >= 0) {
        std::string record;
        record.reserve(12 + row.size() + col.size() + value.size());
        for (auto part : {row, col, value}) {
            put_u32(record, static_cast<std::uint32_t>(part.size()));
            record.append(part);
        }
        if (!write_all(impl_->fd, record.data(), record.size()) ||
            (impl_->options.fsync_each_put && ::fsync(impl_->fd) != 0)) {
            auto msg = sys_error("append to store log failed", impl_->path);
            // Roll back to the last acknowledged record.
            if (::ftruncate(impl_->fd, static_cast<off_t>(impl_->bytes_on_disk)) != 0)
                msg += " (rollback failed: " + std::string(std::strerror(errno)) + ")";
            throw IoError(msg);
        }
        std::unique_lock index_lock(impl_->index_mutex);
        impl_->bytes_on_disk += record.size();
        impl_->apply(row, col, value);
        return;
    }
    std::unique_lock index_lock(impl_->index_mutex);
    impl_->apply(row, col, value);
}

std::vector<Cell> TripleStore::get_row(std::string_view row) const {
    std::shared_lock lock(impl_->index_mutex);
    std::vector<Cell> out;
    if (auto it = impl_->rows.find(row); it != impl_->rows.end())
        out.assign(it->second.begin(), it->second.end());
    return out;
}

std::vector<Cell> TripleStore::get_col(std::string_view col) const {
    std::shared_lock lock(impl_->index_mutex);
    std::vector<Cell> out;
    if (auto it = impl_->cols.find(col); it != impl_->cols.end())
        out.assign(it->second.begin(), it->second.end());
    return out;
}

std::vector<Triple> TripleStore::scan_row_range(std::string_view start_row, std::string_view end_row) const {
    if (end_row < start_row) throw ValidationError("scan_row_range: start_row must not exceed end_row");
    std::shared_lock lock(impl_->index_mutex);
    std::vector<Triple> out;
    for (auto it = impl_->rows.lower_bound(start_row); it != impl_->rows.end() && it->first < end_row; ++it) {
        for (const auto& [col, value] : it->second) out.push_back(Triple{it->first, col, value});
    }
    return out;
}

std::vector<Triple> TripleStore::dump() const {
    std::shared_lock lock(impl_->index_mutex);
    std::vector<Triple> out;
    out.reserve(impl_->triple_count);
    for (const auto& [row, cells] : impl_->rows)
        for (const auto& [col, value] : cells) out.push_back(Triple{row, col, value});
    return out;
}

StoreStats TripleStore::stats() const {
    std::shared_lock lock(impl_->index_mutex);
    return StoreStats{impl_->triple_count, impl_->bytes_on_disk};
}

std::string iso8601_basic(std::int64_t unix_ts) {
    using namespace std::chrono;
    const sys_seconds tp{seconds{unix_ts}};
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const hh_mm_ss hms{tp - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d%02u%02uT%02ld%02ld%02ld", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

std::string telemetry_row_key(std::string_view entity, std::string_view id, std::int64_t unix_ts) {
    std::string key;
    key.reserve(entity.size() + id.size() + 18);
    key.append(entity).append("|").append(id).append("|").append(iso8601_basic(unix_ts));
    return key;
}

}  // namespace mandm

#include "mandm/segment.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "mandm/error.hpp"

namespace mandm {

double quantize(double v) noexcept {
    double q = std::round(v * 1000.0) / 1000.0;
    return q == 0.0 ? 0.0 : q;  // no negative zero
}

bool is_csv_safe(std::string_view field) noexcept {
    return field.find_first_of(",;\n\r") == std::string_view::npos;
}

std::string format_decimal(double v) {
    if (!std::isfinite(v)) throw ValidationError("non-finite decimal cannot be serialized");
    v = quantize(v);
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
    if (ec != std::errc{}) throw ValidationError("decimal out of range for CSV encoding");
    std::string out(buf, end);
    while (out.size() > 2 && out.back() == '0' && out[out.size() - 2] != '.') out.pop_back();
    return out;
}

namespace {

void check_id(std::string_view what, const std::string& id) {
    if (id.empty() || !is_csv_safe(id))
        throw ValidationError(std::string(what) + " id '" + id + "' is empty or contains ',', ';' or newline");
}

void check_text(std::string_view what, const std::string& text) {
    if (!is_csv_safe(text))
        throw ValidationError(std::string(what) + " '" + text + "' contains ',', ';' or newline");
}

template <class Rows, class Key>
void check_sorted(std::string_view what, const Rows& rows, Key key) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(key(rows[i - 1]) < key(rows[i])))
            throw ValidationError(std::string(what) + " rows must be strictly sorted by id");
    }
}

}  // namespace

std::string serialize_segment(const Segment& s) {
    check_sorted("node", s.node_rows, [](const NodeRow& r) -> const std::string& { return r.node_id; });
    check_sorted("user", s.user_rows, [](const UserRow& r) -> const std::string& { return r.user_id; });
    check_sorted("job", s.job_rows, [](const JobRow& r) -> const std::string& { return r.job_id; });

    std::string out;
    out.reserve(64 + 96 * (s.node_rows.size() + s.user_rows.size() + s.job_rows.size()));
    out += "#MANDM,";
    out += std::to_string(s.version);
    out += ',';
    out += std::to_string(s.ts);
    out += '\n';

    for (const auto& n : s.node_rows) {
        check_id("node", n.node_id);
        out += "N,";
        out += n.node_id;
        for (double v : {n.cpu_load_pct, n.mem_used_pct, n.net_rx_mbps, n.net_tx_mbps}) {
            out += ',';
            out += format_decimal(v);
        }
        out += ',';
        out += std::to_string(n.gpu_loads.size());
        for (double g : n.gpu_loads) {
            out += ',';
            out += format_decimal(g);
        }
        out += '\n';
    }
    for (const auto& u : s.user_rows) {
        check_id("user", u.user_id);
        check_text("name", u.name);
        check_text("rank", u.rank);
        out += "U,";
        out += u.user_id;
        out += ',';
        out += u.name;
        out += ',';
        out += u.rank;
        for (auto v : {u.node_count, u.file_count, u.job_count, u.alert_count}) {
            out += ',';
            out += std::to_string(v);
        }
        out += ',';
        out += format_decimal(u.usage);
        out += '\n';
    }
    for (const auto& j : s.job_rows) {
        check_id("job", j.job_id);
        check_id("user", j.user_id);
        check_id("job state", j.state);
        out += "J,";
        out += j.job_id;
        out += ',';
        out += j.user_id;
        out += ',';
        out += j.state;
        out += ',';
        for (std::size_t i = 0; i < j.node_ids.size(); ++i) {
            check_id("node", j.node_ids[i]);
            if (i) out += ';';
            out += j.node_ids[i];
        }
        out += ',';
        out += std::to_string(j.files_open);
        out += '\n';
    }
    return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

class LineParser {
public:
    explicit LineParser(std::size_t line) : line_(line) {}

    [[noreturn]] void fail(const std::string& reason) const { throw ParseError(line_, reason); }

    std::uint64_t uint(std::string_view f, std::string_view what) const {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (f.empty() || ec != std::errc{} || p != f.data() + f.size())
            fail("non-numeric " + std::string(what) + " '" + std::string(f) + "'");
        return v;
    }

    std::int64_t int64(std::string_view f, std::string_view what) const {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (f.empty() || ec != std::errc{} || p != f.data() + f.size())
            fail("non-numeric " + std::string(what) + " '" + std::string(f) + "'");
        return v;
    }

    double decimal(std::string_view f, std::string_view what) const {
        double v = 0;
        bool ok = !f.empty() && f.find_first_not_of("0123456789.-") == std::string_view::npos;
        if (ok) {
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v, std::chars_format::fixed);
            ok = ec == std::errc{} && p == f.data() + f.size() && std::isfinite(v);
        }
        if (!ok) fail("non-numeric " + std::string(what) + " '" + std::string(f) + "'");
        return v;
    }

    std::string id(std::string_view f, std::string_view what) const {
        if (f.empty()) fail("empty " + std::string(what) + " id");
        return std::string(f);
    }

private:
    std::size_t line_;
};

}  // namespace

Segment parse_segment(std::string_view bytes) {
    Segment seg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    int section = 0;  // 0 = nodes, 1 = users, 2 = jobs

    while (pos < bytes.size()) {
        ++line_no;
        auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) throw ParseError(line_no, "missing line terminator");
        std::string_view line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        LineParser p(line_no);
        auto f = split(line, ',');

        if (line_no == 1) {
            if (f.size() != 3 || f[0] != "#MANDM") p.fail("bad magic, expected '#MANDM,<version>,<ts>'");
            auto version = p.uint(f[1], "version");
            if (version != static_cast<std::uint64_t>(kSegmentVersion))
                p.fail("unsupported version " + std::string(f[1]));
            seg.version = kSegmentVersion;
            seg.ts = p.int64(f[2], "ts");
            continue;
        }

        if (f[0] == "N") {
            if (section > 0) p.fail("node row after user or job rows");
            if (f.size() < 7) p.fail("node row needs at least 7 fields, got " + std::to_string(f.size()));
            NodeRow row;
            row.node_id = p.id(f[1], "node");
            row.cpu_load_pct = p.decimal(f[2], "cpu_load_pct");
            row.mem_used_pct = p.decimal(f[3], "mem_used_pct");
            row.net_rx_mbps = p.decimal(f[4], "net_rx_mbps");
            row.net_tx_mbps = p.decimal(f[5], "net_tx_mbps");
            auto gpus = p.uint(f[6], "gpu_count");
            if (f.size() != 7 + gpus)
                p.fail("node row declares " + std::to_string(gpus) + " gpus but has " + std::to_string(f.size() - 7) +
                       " gpu fields");
            for (std::size_t i = 0; i < gpus; ++i) row.gpu_loads.push_back(p.decimal(f[7 + i], "gpu_load"));
            if (!seg.node_rows.empty() && !(seg.node_rows.back().node_id < row.node_id))
                p.fail("node rows not strictly sorted at '" + row.node_id + "'");
            seg.node_rows.push_back(std::move(row));
        } else if (f[0] == "U") {
            if (section > 1) p.fail("user row after job rows");
            section = 1;
            if (f.size() != 9) p.fail("user row needs 9 fields, got " + std::to_string(f.size()));
            UserRow row;
            row.user_id = p.id(f[1], "user");
            row.name = std::string(f[2]);
            row.rank = std::string(f[3]);
            row.node_count = p.uint(f[4], "node_count");
            row.file_count = p.uint(f[5], "file_count");
            row.job_count = p.uint(f[6], "job_count");
            row.alert_count = p.uint(f[7], "alert_count");
            row.usage = p.decimal(f[8], "usage");
            if (!seg.user_rows.empty() && !(seg.user_rows.back().user_id < row.user_id))
                p.fail("user rows not strictly sorted at '" + row.user_id + "'");
            seg.user_rows.push_back(std::move(row));
        } else if (f[0] == "J") {
            section = 2;
            if (f.size() != 6) p.fail("job row needs 6 fields, got " + std::to_string(f.size()));
            JobRow row;
            row.job_id = p.id(f[1], "job");
            row.user_id = p.id(f[2], "user");
            row.state = p.id(f[3], "job state");
            if (!f[4].empty()) {
                for (auto n : split(f[4], ';')) row.node_ids.push_back(p.id(n, "node"));
            }
            row.files_open = p.uint(f[5], "files_open");
            if (!seg.job_rows.empty() && !(seg.job_rows.back().job_id < row.job_id))
                p.fail("job rows not strictly sorted at '" + row.job_id + "'");
            seg.job_rows.push_back(std::move(row));
        } else {
            p.fail("unknown row tag '" + std::string(f[0]) + "'");
        }
    }
    if (line_no == 0) throw ParseError(1, "empty file, expected header");
    return seg;
}

}  // namespace mandm

#include "mandm/config.hpp"

#include <cstdlib>
#include <fstream>

#include "mandm/error.hpp"

namespace mandm {

using nlohmann::json;

namespace {

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + "." + key + " has the wrong type");
    }
}

template <class T>
T require(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError(where + "." + key + " is required");
    return get_or<T>(obj, key, T{}, where);
}

const json& object_at(const json& obj, const char* key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_object()) throw ValidationError(where + "." + key + " must be an object");
    return v;
}

const json& array_at(const json& obj, const char* key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_array()) throw ValidationError(where + "." + key + " must be an array");
    return v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

UserInfo parse_user(const json& u, const std::string& where) {
    return UserInfo{require<std::string>(u, "id", where), get_or<std::string>(u, "name", "", where),
                    get_or<std::string>(u, "rank", "", where)};
}

ProfileParams parse_params(const json& p, ProfileParams base, const std::string& where) {
    base.arrivals_per_hour = get_or(p, "arrivals_per_hour", base.arrivals_per_hour, where);
    base.min_nodes = get_or(p, "min_nodes", base.min_nodes, where);
    base.max_nodes = get_or(p, "max_nodes", base.max_nodes, where);
    base.min_files = get_or(p, "min_files", base.min_files, where);
    base.max_files = get_or(p, "max_files", base.max_files, where);
    base.min_duration_s = get_or(p, "min_duration_s", base.min_duration_s, where);
    base.max_duration_s = get_or(p, "max_duration_s", base.max_duration_s, where);
    base.max_active_jobs = get_or(p, "max_active_jobs", base.max_active_jobs, where);
    base.update_probability = get_or(p, "update_probability", base.update_probability, where);
    return base;
}

AlertRule parse_rule(const json& r, const std::string& where) {
    AlertRule rule;
    rule.rule_id = require<std::string>(r, "id", where);
    rule.description = get_or<std::string>(r, "description", "", where);
    auto kind = require<std::string>(r, "kind", where);
    if (kind == "usage_at_least")
        rule.kind = UsageAtLeast{require<double>(r, "threshold", where)};
    else if (kind == "node_cpu_at_least")
        rule.kind = NodeCpuAtLeast{require<double>(r, "threshold", where)};
    else if (kind == "gpu_all_busy")
        rule.kind = GpuAllBusy{};
    else
        throw ValidationError(where + ".kind '" + kind + "' is not a known alert kind");
    rule.validate();
    return rule;
}

}  // namespace

ServiceConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ValidationError("config must be a JSON object");
    const auto version = get_or<int>(doc, "version", kConfigVersion, "config");
    if (version != kConfigVersion) throw ValidationError("unsupported config version " + std::to_string(version));

    ServiceConfig cfg;

    if (doc.contains("usage")) {
        const auto& u = object_at(doc, "usage", "config");
        cfg.usage.node_weight = get_or(u, "node_weight", cfg.usage.node_weight, "usage");
        cfg.usage.file_weight = get_or(u, "file_weight", cfg.usage.file_weight, "usage");
        cfg.usage.node_cap = get_or(u, "node_cap", cfg.usage.node_cap, "usage");
        cfg.usage.file_cap = get_or(u, "file_cap", cfg.usage.file_cap, "usage");
        cfg.usage.elevated_threshold = get_or(u, "elevated_threshold", cfg.usage.elevated_threshold, "usage");
        cfg.usage.critical_threshold = get_or(u, "critical_threshold", cfg.usage.critical_threshold, "usage");
    }

    const bool has_sim = doc.contains("sim");
    const bool has_topology = doc.contains("topology");
    if (has_sim == has_topology) throw ValidationError("config needs exactly one of 'sim' or 'topology'");

    if (has_sim) {
        const auto& s = object_at(doc, "sim", "config");
        SimConfig sim;
        sim.seed = get_or(s, "seed", sim.seed, "sim");
        sim.racks = require<std::uint32_t>(s, "racks", "sim");
        sim.nodes_per_rack = require<std::uint32_t>(s, "nodes_per_rack", "sim");
        sim.gpus_per_node = get_or(s, "gpus_per_node", sim.gpus_per_node, "sim");
        sim.tick_interval_s = get_or(s, "tick_interval_s", sim.tick_interval_s, "sim");
        sim.start_ts = get_or(s, "start_ts", sim.start_ts, "sim");
        sim.cpu_cores = get_or(s, "cpu_cores", sim.cpu_cores, "sim");
        sim.mem_total_mb = get_or(s, "mem_total_mb", sim.mem_total_mb, "sim");
        if (s.contains("users")) {
            for (const auto& u : array_at(s, "users", "sim")) {
                SimUser su;
                su.info = parse_user(u, "sim.users[]");
                su.profile.kind = profile_kind_from_string(get_or<std::string>(u, "profile", "light", "sim.users[]"));
                if (u.contains("params")) {
                    const std::uint32_t cap = cfg.usage.node_cap ? cfg.usage.node_cap : sim.racks * sim.nodes_per_rack;
                    su.profile.params = parse_params(u.at("params"), default_profile(su.profile.kind, cap, cfg.usage.file_cap),
                                                     "sim.users[].params");
                }
                sim.users.push_back(std::move(su));
            }
        }
        sim.validate();
        cfg.sim = std::move(sim);
    } else {
        const auto& t = object_at(doc, "topology", "config");
        ClusterTopology topo;
        for (const auto& r : array_at(t, "racks", "topology")) {
            Rack rack{require<std::string>(r, "id", "topology.racks[]"), {}};
            for (const auto& n : array_at(r, "nodes", "topology.racks[]")) {
                auto id = require<std::string>(n, "id", "topology.racks[].nodes[]");
                NodeSpec spec{get_or<std::uint32_t>(n, "cpu_cores", 1, "node"),
                              get_or<std::uint32_t>(n, "mem_total_mb", 1, "node"),
                              get_or<std::uint32_t>(n, "gpu_count", 0, "node")};
                if (!topo.node_specs.emplace(id, spec).second)
                    throw ValidationError("duplicate node id '" + id + "'");
                rack.node_ids.push_back(std::move(id));
            }
            topo.racks.push_back(std::move(rack));
        }
        topo.validate();
        if (t.contains("users"))
            for (const auto& u : array_at(t, "users", "topology")) cfg.users.push_back(parse_user(u, "topology.users[]"));
        cfg.topology = std::move(topo);
    }

    if (doc.contains("alerts"))
        for (const auto& r : array_at(doc, "alerts", "config")) cfg.alerts.push_back(parse_rule(r, "alerts[]"));

    if (doc.contains("archive")) {
        const auto& a = object_at(doc, "archive", "config");
        HistoryArchive archive;
        archive.directory = resolve(base_dir, require<std::string>(a, "path", "archive"));
        archive.segment_interval_s = get_or(a, "segment_interval_s", archive.segment_interval_s, "archive");
        archive.read_latency = std::chrono::milliseconds(get_or<std::int64_t>(a, "read_latency_ms", 0, "archive"));
        if (archive.segment_interval_s <= 0) throw ValidationError("archive.segment_interval_s must be positive");
        if (archive.read_latency.count() < 0) throw ValidationError("archive.read_latency_ms must be nonnegative");
        cfg.archive = std::move(archive);
    }

    if (doc.contains("store")) {
        const auto& s = object_at(doc, "store", "config");
        cfg.store_path = resolve(base_dir, require<std::string>(s, "path", "store"));
    }

    if (doc.contains("server")) {
        const auto& s = object_at(doc, "server", "config");
        cfg.server.bind = get_or(s, "bind", cfg.server.bind, "server");
        cfg.server.port = get_or(s, "port", cfg.server.port, "server");
        cfg.server.stream_buffer = get_or(s, "stream_buffer", cfg.server.stream_buffer, "server");
        cfg.server.delta_threshold_nodes = get_or(s, "delta_threshold_nodes", cfg.server.delta_threshold_nodes, "server");
        cfg.server.tick_period_ms = get_or(s, "tick_period_ms", cfg.server.tick_period_ms, "server");
        if (s.contains("static_dir")) cfg.server.static_dir = resolve(base_dir, require<std::string>(s, "static_dir", "server"));
        if (cfg.server.port < 0 || cfg.server.port > 65535) throw ValidationError("server.port out of range");
        if (cfg.server.stream_buffer == 0) throw ValidationError("server.stream_buffer must be positive");
        if (cfg.server.tick_period_ms < 0) throw ValidationError("server.tick_period_ms must be nonnegative");
    }

    if (cfg.sim && cfg.archive && cfg.archive->segment_interval_s % cfg.sim->tick_interval_s != 0)
        throw ValidationError("archive.segment_interval_s must be a multiple of sim.tick_interval_s");
    return cfg;
}

ServiceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

std::filesystem::path resolve_config_path(const std::string& explicit_path) {
    if (!explicit_path.empty()) return explicit_path;
    if (const char* env = std::getenv("MANDM_CONFIG"); env && *env) return env;
    throw ValidationError("no config given: pass --config or set MANDM_CONFIG");
}

void prepare_output_dirs(const ServiceConfig& cfg) {
    auto make = [](const std::filesystem::path& dir) {
        if (dir.empty()) return;
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    };
    if (cfg.archive) make(cfg.archive->directory);
    if (cfg.store_path) make(cfg.store_path->parent_path());
}

}  // namespace mandm

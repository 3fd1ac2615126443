#include "mandm/wire.hpp"

#include <algorithm>
#include <map>

#include "mandm/usage.hpp"

namespace mandm {

using nlohmann::json;

json wire_snapshot(const Segment& segment, const ClusterTopology& topology, const UsageConfig& usage) {
    std::map<std::string, std::string> rack_of;
    for (const auto& rack : topology.racks)
        for (const auto& n : rack.node_ids) rack_of.emplace(n, rack.rack_id);

    json nodes = json::array();
    for (const auto& n : segment.node_rows) {
        json intensity = json::array();
        for (double g : n.gpu_loads) intensity.push_back(gpu_color(g));
        auto rack = rack_of.find(n.node_id);
        nodes.push_back({{"id", n.node_id},
                         {"rack", rack == rack_of.end() ? "" : rack->second},
                         {"cpu", n.cpu_load_pct},
                         {"mem", n.mem_used_pct},
                         {"net_rx", n.net_rx_mbps},
                         {"net_tx", n.net_tx_mbps},
                         {"gpus", n.gpu_loads},
                         {"gpu_intensity", std::move(intensity)}});
    }
    json users = json::array();
    for (const auto& u : segment.user_rows) {
        const auto tier = classify_usage(u.usage, usage);
        users.push_back({{"id", u.user_id},
                         {"name", u.name},
                         {"rank", u.rank},
                         {"nodes", u.node_count},
                         {"files", u.file_count},
                         {"jobs", u.job_count},
                         {"alerts", u.alert_count},
                         {"usage", u.usage},
                         {"tier", tier_name(tier)},
                         {"color", tier_color(tier)},
                         {"scale", avatar_scale(u.usage)}});
    }
    json jobs = json::array();
    for (const auto& j : segment.job_rows)
        jobs.push_back({{"id", j.job_id}, {"user", j.user_id}, {"nodes", j.node_ids}, {"files", j.files_open}});

    return {{"v", kWireVersion}, {"ts", segment.ts}, {"nodes", std::move(nodes)}, {"users", std::move(users)},
            {"jobs", std::move(jobs)}};
}

json wire_full_message(const json& snapshot) {
    json msg = snapshot;
    msg["kind"] = "full";
    return msg;
}

namespace {

std::map<std::string, const json*> by_id(const json& list) {
    std::map<std::string, const json*> out;
    for (const auto& e : list) out.emplace(e.at("id").get<std::string>(), &e);
    return out;
}

json changed(const json& prev, const json& cur) {
    auto old = by_id(prev);
    json out = json::array();
    for (const auto& e : cur) {
        auto it = old.find(e.at("id").get<std::string>());
        if (it == old.end() || *it->second != e) out.push_back(e);
    }
    return out;
}

void merge(json& list, const json& updates) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < list.size(); ++i) index.emplace(list[i].at("id").get<std::string>(), i);
    for (const auto& e : updates) {
        auto it = index.find(e.at("id").get<std::string>());
        if (it == index.end()) {
            index.emplace(e.at("id").get<std::string>(), list.size());
            list.push_back(e);
        } else {
            list[it->second] = e;
        }
    }
}

void sort_by_id(json& list) {
    std::sort(list.begin(), list.end(),
              [](const json& a, const json& b) { return a.at("id").get<std::string>() < b.at("id").get<std::string>(); });
}

}  // namespace

json wire_delta_message(const json& previous, const json& current) {
    json removed = json::array();
    auto cur_jobs = by_id(current.at("jobs"));
    for (const auto& j : previous.at("jobs")) {
        auto id = j.at("id").get<std::string>();
        if (!cur_jobs.contains(id)) removed.push_back(id);
    }
    return {{"v", kWireVersion},
            {"kind", "delta"},
            {"ts", current.at("ts")},
            {"nodes", changed(previous.at("nodes"), current.at("nodes"))},
            {"users", changed(previous.at("users"), current.at("users"))},
            {"jobs", changed(previous.at("jobs"), current.at("jobs"))},
            {"removed_jobs", std::move(removed)}};
}

json apply_wire_delta(const json& base, const json& delta) {
    json out = base;
    out.erase("kind");
    out["ts"] = delta.at("ts");
    for (const char* key : {"nodes", "users", "jobs"}) {
        merge(out[key], delta.at(key));
        sort_by_id(out[key]);
    }
    const auto& removed = delta.at("removed_jobs");
    auto& jobs = out["jobs"];
    json kept = json::array();
    for (auto& j : jobs)
        if (std::find(removed.begin(), removed.end(), j.at("id")) == removed.end()) kept.push_back(std::move(j));
    jobs = std::move(kept);
    return out;
}

json wire_close_message(const std::string& reason) {
    return {{"v", kWireVersion}, {"kind", "close"}, {"reason", reason}};
}

json wire_history_status(const LoadStatus& status) {
    json out{{"state", to_string(status.phase)}, {"loaded", status.loaded}, {"total", status.total}};
    if (status.phase == LoadPhase::Failed) out["reason"] = status.reason;
    return out;
}

}  // namespace mandm

#include "mandm/usage.hpp"

#include <algorithm>
#include <cmath>

#include "mandm/error.hpp"

namespace mandm {

std::string_view tier_color(Tier t) noexcept {
    switch (t) {
        case Tier::Normal: return "green";
        case Tier::Elevated: return "cyan";
        case Tier::Critical: return "red";
    }
    return "green";
}

std::string_view tier_name(Tier t) noexcept {
    switch (t) {
        case Tier::Normal: return "normal";
        case Tier::Elevated: return "elevated";
        case Tier::Critical: return "critical";
    }
    return "normal";
}

void UsageConfig::validate() const {
    if (std::abs(node_weight + file_weight - 100.0) > 1e-9)
        throw ValidationError("usage: node_weight + file_weight must equal 100");
    if (node_weight < 0 || file_weight < 0)
        throw ValidationError("usage: weights must be nonnegative");
    if (node_cap == 0) throw ValidationError("usage: node_cap must be positive");
    if (file_cap == 0) throw ValidationError("usage: file_cap must be positive");
    if (!(elevated_threshold > 0 && elevated_threshold < 100) ||
        !(critical_threshold > 0 && critical_threshold < 100))
        throw ValidationError("usage: thresholds must lie in (0, 100)");
    if (!(elevated_threshold < critical_threshold))
        throw ValidationError("usage: elevated_threshold must be below critical_threshold");
}

double compute_usage(std::uint64_t node_count, std::uint64_t file_count, const UsageConfig& cfg) noexcept {
    const double node_term = std::min(static_cast<double>(node_count) / cfg.node_cap, 1.0);
    const double file_term = std::min(static_cast<double>(file_count) / cfg.file_cap, 1.0);
    return std::clamp(cfg.node_weight * node_term + cfg.file_weight * file_term, 0.0, 100.0);
}

Tier classify_usage(double usage, const UsageConfig& cfg) noexcept {
    if (usage >= cfg.critical_threshold) return Tier::Critical;
    if (usage >= cfg.elevated_threshold) return Tier::Elevated;
    return Tier::Normal;
}

double avatar_scale(double usage) noexcept {
    return 1.0 + (std::clamp(usage, 0.0, 100.0) / 100.0) * (kAvatarMaxScale - 1.0);
}

double gpu_color(double load_pct) noexcept { return std::clamp(load_pct, 0.0, 100.0) / 100.0; }

}  // namespace mandm

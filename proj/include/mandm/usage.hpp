#pragma once

#include <cstdint>
#include <string_view>

namespace mandm {

enum class Tier : std::uint8_t { Normal = 0, Elevated = 1, Critical = 2 };

/// Display color: green, cyan, red.
std::string_view tier_color(Tier t) noexcept;
/// Lower-case wire name: normal, elevated, critical.
std::string_view tier_name(Tier t) noexcept;

constexpr bool operator<(Tier a, Tier b) noexcept {
    return static_cast<std::uint8_t>(a) < static_cast<std::uint8_t>(b);
}
constexpr bool operator<=(Tier a, Tier b) noexcept { return !(b < a); }

/// Weights and normalization for the per-user Usage score.
///
/// Each term is normalized by its cap and clamped at 1, so the score stays
/// in [0, 100] for any count. node_cap == 0 means "not set"; the cluster
/// state substitutes the total node count.
struct UsageConfig {
    double node_weight = 80.0;
    double file_weight = 20.0;
    std::uint32_t node_cap = 0;
    std::uint32_t file_cap = 1000;
    double elevated_threshold = 50.0;
    double critical_threshold = 80.0;

    /// Throws ValidationError. Requires node_cap to be resolved.
    void validate() const;
};

inline constexpr double kAvatarMaxScale = 4.0;

double compute_usage(std::uint64_t node_count, std::uint64_t file_count, const UsageConfig& cfg) noexcept;
Tier classify_usage(double usage, const UsageConfig& cfg) noexcept;
double avatar_scale(double usage) noexcept;
double gpu_color(double load_pct) noexcept;

}  // namespace mandm

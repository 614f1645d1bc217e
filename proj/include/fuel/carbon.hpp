#pragma once

// Operational, embodied and total carbon of a serving run.
//
//   C_op    = E_op × CI
//   C_em    = (t / LT) × C_em,total
//   C_total = C_op + C_em
//
// Lifetime embodied totals come either from a direct per-device figure or from the
// ACT-style per-area model: manufacturing + packaging + DRAM.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuel/energy.hpp"
#include "fuel/trace.hpp"

namespace fuel::carbon {

inline constexpr double kPackagingGPerIc = 150.0;
inline constexpr double kDramGPerGb = 65.0;
inline constexpr double kDefaultYield = 0.875;
inline constexpr double kSecondsPerYear = 365.0 * 86400.0;
inline constexpr double kDefaultLifetimeS = 5.0 * kSecondsPerYear;
inline constexpr double kMm2PerCm2 = 100.0;

enum class DeviceKind { gpu, cpu, dram };

std::string_view to_string(DeviceKind kind);
DeviceKind device_kind_from_string(std::string_view s);

struct FabParams {
    double ci_fab = 0.0;  // gCO2eq/kWh
    double epa = 0.0;     // kWh/cm²
    double gpa = 0.0;     // gCO2eq/cm²
    double mpa = 0.0;     // gCO2eq/cm²
    double yield = kDefaultYield;

    /// Carbon per cm² of good die before yield: CI_fab·EPA + GPA + MPA.
    double per_area_g_per_cm2() const noexcept { return ci_fab * epa + gpa + mpa; }

    bool operator==(const FabParams&) const = default;
};

struct DirectEmbodied {
    double total_g = 0.0;  // per unit

    bool operator==(const DirectEmbodied&) const = default;
};

using EmbodiedMode = std::variant<DirectEmbodied, FabParams>;

struct DeviceSpec {
    std::string device_id;
    DeviceKind kind = DeviceKind::gpu;
    double count = 1.0;  // may be fractional for shared-host attribution
    double tdp_w = 0.0;  // informational
    double die_area_mm2 = 0.0;
    int dies_per_package = 1;
    double memory_gb = 0.0;
    int n_ic = 0;
    EmbodiedMode embodied = DirectEmbodied{};

    bool is_act() const noexcept { return std::holds_alternative<FabParams>(embodied); }

    bool operator==(const DeviceSpec&) const = default;
};

struct PlatformSpec {
    std::string platform_id;
    std::vector<DeviceSpec> devices;
    double lifetime_s = kDefaultLifetimeS;

    const DeviceSpec* find(std::string_view device_id) const;

    bool operator==(const PlatformSpec&) const = default;
};

struct CarbonTotals {
    double c_op_g = 0.0;
    double c_em_g = 0.0;
    double c_total_g = 0.0;
    double ci_used = 0.0;
    double embodied_total_g = 0.0;

    bool operator==(const CarbonTotals&) const = default;
};

/// Lifetime embodied carbon of one device entry, split by source (count applied).
struct EmbodiedBreakdown {
    std::string device_id;
    DeviceKind kind = DeviceKind::gpu;
    double count = 1.0;
    double manufacturing_g = 0.0;
    double packaging_g = 0.0;
    double dram_g = 0.0;
    double direct_g = 0.0;
    double total_g = 0.0;
};

/// Throws SpecError on any broken invariant.
void validate_platform(const PlatformSpec& platform);

PlatformSpec platform_from_json(const nlohmann::json& doc);
nlohmann::ordered_json platform_to_json(const PlatformSpec& platform);
/// Reads and validates a platform file. Throws SpecError.
PlatformSpec load_platform(const std::filesystem::path& path);

/// dies × (CI_fab·EPA + GPA + MPA) × area_cm² / yield × count. Throws SpecError for
/// direct-mode devices or dram kind.
double manufacturing_carbon(const DeviceSpec& dev);
double packaging_carbon(const DeviceSpec& dev);
double dram_carbon(const DeviceSpec& dev);

EmbodiedBreakdown device_embodied(const DeviceSpec& dev);
double platform_embodied_total(const PlatformSpec& platform);

double amortized_embodied(const PlatformSpec& platform, double t_s);
double operational_carbon(double e_op_kwh, double ci_g_per_kwh);

/// Total carbon for the trace's wall window. Throws UnknownDeviceError when a
/// power device is not declared by the platform.
CarbonTotals total_carbon(const trace::RunTrace& trace, const PlatformSpec& platform, double ci_g_per_kwh);
/// Same, reusing an already integrated energy breakdown.
CarbonTotals total_carbon(const trace::RunTrace& trace, const energy::EnergyBreakdown& energy,
                          const PlatformSpec& platform, double ci_g_per_kwh);

}  // namespace fuel::carbon

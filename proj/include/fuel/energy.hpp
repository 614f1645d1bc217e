#pragma once

#include <map>
#include <span>
#include <string>

#include "fuel/trace.hpp"

namespace fuel::energy {

inline constexpr double kJoulesPerKwh = 3.6e6;

struct EnergyBreakdown {
    std::map<std::string, double> per_device;  // kWh
    double total_kwh = 0.0;

    bool operator==(const EnergyBreakdown&) const = default;
};

/// Zero-order-hold integral of a sampled power signal over [window_start, window_end], in joules.
///
/// Each sample's power holds until the next sample; the last holds to the end of the
/// window and the first is extended backwards to the start. Samples outside the window
/// still shape the step function (a sample before the window sets the power at its start,
/// samples after it are ignored). No range checks.
double hold_integral_j(std::span<const trace::PowerSample> samples, double window_start, double window_end);

/// Energy in kWh of one device over a window.
/// Throws MissingPowerError for an empty list, OutOfWindowError if any sample lies
/// outside the window widened by trace::kWindowToleranceS.
double integrate_power(std::span<const trace::PowerSample> samples, double window_start, double window_end);

/// Per-device energy over the trace's wall window. Devices with only a
/// constant-power fallback are charged fallback × duration.
EnergyBreakdown run_energy(const trace::RunTrace& trace);

}  // namespace fuel::energy

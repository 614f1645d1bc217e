#include "fuel/energy.hpp"

#include <algorithm>

namespace fuel::energy {

double hold_integral_j(std::span<const trace::PowerSample> samples, double window_start, double window_end) {
    if (samples.empty() || !(window_end > window_start)) return 0.0;

    double joules = 0.0;
    // Power in effect at window_start: the latest sample at or before it, else the first sample.
    double level = samples.front().power_w;
    double cursor = window_start;
    for (const auto& s : samples) {
        if (s.timestamp <= window_start) {
            level = s.power_w;
            continue;
        }
        if (s.timestamp >= window_end) break;
        joules += level * (s.timestamp - cursor);
        cursor = s.timestamp;
        level = s.power_w;
    }
    joules += level * (window_end - cursor);
    return joules;
}

double integrate_power(std::span<const trace::PowerSample> samples, double window_start, double window_end) {
    if (samples.empty()) throw MissingPowerError("no power samples to integrate");
    if (!(window_end > window_start)) throw OutOfWindowError("integration window is empty");
    const double lo = window_start - trace::kWindowToleranceS;
    const double hi = window_end + trace::kWindowToleranceS;
    for (const auto& s : samples) {
        if (s.timestamp < lo || s.timestamp > hi) {
            throw OutOfWindowError("power sample for '" + s.device_id + "' at t=" + std::to_string(s.timestamp) +
                                   " lies outside the integration window");
        }
    }
    return hold_integral_j(samples, window_start, window_end) / kJoulesPerKwh;
}

EnergyBreakdown run_energy(const trace::RunTrace& trace) {
    const auto& meta = trace.metadata;
    EnergyBreakdown out;
    for (const auto& device : trace.device_ids()) {
        const auto samples = trace.samples_for(device);
        double kwh = 0.0;
        if (!samples.empty()) {
            kwh = integrate_power(samples, meta.wall_start, meta.wall_end);
        } else if (auto it = meta.constant_power_w.find(device); it != meta.constant_power_w.end()) {
            kwh = it->second * meta.duration() / kJoulesPerKwh;
        } else {
            throw MissingPowerError("device '" + device + "' has no power samples or constant-power fallback");
        }
        out.per_device[device] = kwh;
    }
    for (const auto& [_, kwh] : out.per_device) out.total_kwh += kwh;
    return out;
}

}  // namespace fuel::energy

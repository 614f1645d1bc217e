#pragma once

// Seeded discrete-event model of an LLM server, used to generate traces with a
// known ground truth.
//
// Requests arrive open-loop (Poisson or constant rate) and are served first-come
// first-served by `concurrency` identical servers. A request occupies a server for
// prefill_s + decode_s_per_token × (tokens - 1). The modelled device draws
// busy_power_w whenever at least one request is in service and idle_power_w
// otherwise; power is sampled every 200 ms and held until the next sample.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuel/trace.hpp"

namespace fuel::sim {

inline constexpr double kSampleIntervalS = 0.2;

enum class ArrivalProcess { poisson, constant };

ArrivalProcess arrival_process_from_string(std::string_view s);
std::string_view to_string(ArrivalProcess p);

struct SimProfile {
    std::string config_label;
    double prefill_s = 0.5;
    double decode_s_per_token = 0.05;
    int concurrency = 1;
    double tokens_mean = 100.0;
    std::int64_t tokens_min = 1;
    std::int64_t tokens_max = 1000;
    double qscore_mean = 0.0;
    double qscore_std = 1.0;
    double idle_power_w = 0.0;
    double busy_power_w = 0.0;
    std::string device_id = "gpu0";

    // Run metadata echoed into generated traces.
    std::string platform_id = "sim_platform";
    std::string model_family = "synthetic";
    double model_size_b = 1.0;
    std::string quantization = "fp16";
    std::string dataset_id = "synthetic";

    bool operator==(const SimProfile&) const = default;
};

/// Throws SpecError on broken invariants.
void validate_profile(const SimProfile& profile);
SimProfile profile_from_json(const nlohmann::json& doc);
nlohmann::ordered_json profile_to_json(const SimProfile& profile);
SimProfile load_profile(const std::filesystem::path& path);

struct SimManifest {
    std::uint64_t seed = 0;
    double qps = 0.0;
    double duration_s = 0.0;
    ArrivalProcess arrival = ArrivalProcess::poisson;
    SimProfile profile;
    std::size_t n_requests = 0;
    std::size_t n_power_samples = 0;
    std::map<std::string, double> true_energy_kwh;
    std::vector<double> waits;                    // queueing delay per request
    std::vector<trace::RequestRecord> requests;   // exact values before serialisation
};

nlohmann::ordered_json manifest_to_json(const SimManifest& manifest);

struct SimResult {
    trace::RunTrace trace;
    SimManifest manifest;
};

/// Start times on `concurrency` servers, each request taking the earliest free
/// server. Returns start − arrival per request.
std::vector<double> queue_waits(std::span<const double> arrivals, std::span<const double> service_times,
                                int concurrency);

SimResult simulate_run(const SimProfile& profile, double qps, double duration_s, std::uint64_t seed,
                       ArrivalProcess arrival = ArrivalProcess::poisson);

/// Manifest path for a trace path: "run.jsonl" -> "run.manifest.json".
std::filesystem::path manifest_path_for(const std::filesystem::path& trace_path);

/// Writes the trace and its manifest next to it.
void write_run(const SimResult& result, const std::filesystem::path& trace_path);

}  // namespace fuel::sim

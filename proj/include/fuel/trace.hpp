#pragma once

// Trace data model, line-delimited JSON format, validation and per-request
// latency derivation.
//
// A trace file is one JSON object per line. The first record is
//   {"kind":"meta","version":1, <RunMetadata fields>}
// followed by any interleaving of "request" and "power" records.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuel/error.hpp"

namespace fuel::trace {

inline constexpr int kSchemaVersion = 1;

/// Slack allowed when comparing timestamps against the wall window, in seconds.
inline constexpr double kWindowToleranceS = 1e-6;

class Quantization {
public:
    enum class Kind { fp16, awq, w8a8, other };

    Quantization() = default;
    static Quantization parse(std::string_view label);

    Kind kind() const noexcept { return kind_; }
    /// Canonical label; for `other` this is the free-form label as given.
    std::string label() const;

    bool operator==(const Quantization&) const = default;

private:
    Kind kind_ = Kind::fp16;
    std::string other_;
};

struct RunMetadata {
    std::string run_id;
    std::string config_label;
    std::string model_family;
    double model_size_b = 0.0;
    Quantization quantization;
    std::string platform_id;
    std::string dataset_id;
    double target_qps = 0.0;
    double wall_start = 0.0;
    double wall_end = 0.0;

    // Optional extensions.
    std::vector<std::string> devices;                 // declared devices; empty = implied by samples
    std::map<std::string, double> constant_power_w;   // fallback for devices without samples
    nlohmann::json extensions = nlohmann::json::object();  // unknown meta fields, kept verbatim

    double duration() const noexcept { return wall_end - wall_start; }

    bool operator==(const RunMetadata&) const = default;
};

struct RequestRecord {
    std::string request_id;
    double arrival = 0.0;
    std::optional<double> first_token_at;
    std::optional<double> last_token_at;
    std::int64_t output_tokens = 0;
    std::optional<double> qscore;  // absent when no scorer was available
    bool failed = false;

    /// Non-failed with at least one token: the request has latencies.
    bool produced_tokens() const noexcept { return !failed && output_tokens > 0; }

    bool operator==(const RequestRecord&) const = default;
};

struct PowerSample {
    double timestamp = 0.0;
    std::string device_id;
    double power_w = 0.0;

    bool operator==(const PowerSample&) const = default;
};

struct RunTrace {
    RunMetadata metadata;
    std::vector<RequestRecord> requests;
    std::vector<PowerSample> power;

    /// Devices in declaration order, then any extra devices seen in samples or fallbacks.
    std::vector<std::string> device_ids() const;
    /// Samples of one device, in file order.
    std::vector<PowerSample> samples_for(std::string_view device_id) const;

    bool operator==(const RunTrace&) const = default;
};

struct LatencySummary {
    double ttft = 0.0;  // seconds
    double tpot = 0.0;  // seconds per token
};

/// Reads and structurally decodes a trace without checking invariants.
/// Throws ParseError (with line number) or VersionError.
RunTrace read_trace(std::istream& in);
RunTrace read_trace(const std::filesystem::path& path);

/// read_trace + validate_trace; throws ValidationError on any violation.
RunTrace parse_trace(const std::filesystem::path& path);
RunTrace parse_trace_text(std::string_view text);

/// Serialises a trace; parse(emit(t)) == t for any valid trace.
std::string emit_trace(const RunTrace& trace);
void write_trace(const RunTrace& trace, const std::filesystem::path& path);

/// Empty iff every invariant of the data model holds.
std::vector<Violation> validate_trace(const RunTrace& trace);

/// TTFT and TPOT for a request that produced tokens. A single-token request
/// has TPOT 0. Throws NoLatencyError for failed or zero-token requests.
LatencySummary derive_latencies(const RequestRecord& req);

}  // namespace fuel::trace

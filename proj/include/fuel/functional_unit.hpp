#pragma once

// Functional units and carbon per functional unit (CFU).
//
// A functional unit is one output token whose parent response satisfies
// Qscore >= alpha, TTFT <= beta and TPOT <= gamma, produced by a run at the
// FU's target QPS. CFU = total run carbon / N_f.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fuel/carbon.hpp"
#include "fuel/energy.hpp"
#include "fuel/trace.hpp"

namespace fuel::fu {

inline constexpr double kDefaultBetaS = 1.0;
inline constexpr double kDefaultGammaS = 0.2;
inline constexpr double kNoAlpha = -std::numeric_limits<double>::infinity();

struct FunctionalUnitSpec {
    double qps = 0.0;
    double alpha = kNoAlpha;       // minimum Qscore
    double beta = kDefaultBetaS;   // maximum TTFT, seconds
    double gamma = kDefaultGammaS; // maximum TPOT, seconds/token

    bool operator==(const FunctionalUnitSpec&) const = default;
};

/// Throws SpecError unless beta > 0 and gamma >= 0.
void validate_spec(const FunctionalUnitSpec& spec);

struct TokenCounts {
    std::int64_t n_tokens = 0;
    std::int64_t n_fu = 0;

    bool operator==(const TokenCounts&) const = default;
};

struct CarbonReport {
    std::string config_label;
    std::string run_id;
    std::string platform_id;
    double lifetime_s = 0.0;
    double wall_seconds = 0.0;
    FunctionalUnitSpec fu_spec;
    std::int64_t n_tokens = 0;
    std::int64_t n_fu = 0;
    energy::EnergyBreakdown energy;
    carbon::CarbonTotals carbon;
    std::optional<double> cfu_g_per_token;
    double slo_attainment = 0.0;

    bool operator==(const CarbonReport&) const = default;
};

/// Qscore predicate. A response without a Qscore only passes when alpha is -inf.
bool meets_quality(const trace::RequestRecord& req, double alpha);
/// TTFT/TPOT predicate; false for failed or zero-token requests.
bool meets_slo(const trace::RequestRecord& req, double beta, double gamma);

TokenCounts count_functional_units(const trace::RunTrace& trace, const FunctionalUnitSpec& spec);

/// c_total / n_fu, or nullopt when n_fu == 0.
std::optional<double> cfu(const carbon::CarbonTotals& carbon, std::int64_t n_fu);

/// Fraction of all requests (failed ones included) meeting both latency limits.
/// Throws UndefinedAttainmentError for a trace without requests.
double slo_attainment(const trace::RunTrace& trace, const FunctionalUnitSpec& spec);

/// Full pipeline for one run. spec.qps must equal the trace's target_qps.
CarbonReport build_report(const trace::RunTrace& trace, const carbon::PlatformSpec& platform, double ci_g_per_kwh,
                          const FunctionalUnitSpec& spec);

// JSON helpers. Infinite reals are written as the strings "inf"/"-inf" and an
// undefined CFU as "undefined".
nlohmann::ordered_json real_to_json(double v);
double real_from_json(const nlohmann::json& j);
nlohmann::ordered_json report_to_json(const CarbonReport& report);
CarbonReport report_from_json(const nlohmann::json& j);

}  // namespace fuel::fu

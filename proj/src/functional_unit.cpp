#include "fuel/functional_unit.hpp"

#include <cmath>

namespace fuel::fu {

using nlohmann::json;
using nlohmann::ordered_json;

void validate_spec(const FunctionalUnitSpec& spec) {
    if (!(spec.beta > 0.0)) throw SpecError("functional unit beta (TTFT limit) must be positive");
    if (!(spec.gamma >= 0.0)) throw SpecError("functional unit gamma (TPOT limit) must be >= 0");
    if (std::isnan(spec.alpha)) throw SpecError("functional unit alpha must be a number");
}

bool meets_quality(const trace::RequestRecord& req, double alpha) {
    if (!req.qscore) return alpha == kNoAlpha;
    return *req.qscore >= alpha;
}

bool meets_slo(const trace::RequestRecord& req, double beta, double gamma) {
    if (!req.produced_tokens()) return false;
    const auto lat = trace::derive_latencies(req);
    return lat.ttft <= beta && lat.tpot <= gamma;
}

TokenCounts count_functional_units(const trace::RunTrace& trace, const FunctionalUnitSpec& spec) {
    TokenCounts out;
    for (const auto& req : trace.requests) {
        if (!req.produced_tokens()) continue;
        out.n_tokens += req.output_tokens;
        if (meets_quality(req, spec.alpha) && meets_slo(req, spec.beta, spec.gamma)) out.n_fu += req.output_tokens;
    }
    return out;
}

std::optional<double> cfu(const carbon::CarbonTotals& carbon, std::int64_t n_fu) {
    if (n_fu <= 0) return std::nullopt;
    return carbon.c_total_g / static_cast<double>(n_fu);
}

double slo_attainment(const trace::RunTrace& trace, const FunctionalUnitSpec& spec) {
    if (trace.requests.empty()) throw UndefinedAttainmentError("SLO attainment is undefined for a trace with no requests");
    std::size_t met = 0;
    for (const auto& req : trace.requests) {
        if (meets_slo(req, spec.beta, spec.gamma)) ++met;
    }
    return static_cast<double>(met) / static_cast<double>(trace.requests.size());
}

CarbonReport build_report(const trace::RunTrace& trace, const carbon::PlatformSpec& platform, double ci_g_per_kwh,
                          const FunctionalUnitSpec& spec) {
    validate_spec(spec);
    if (spec.qps != trace.metadata.target_qps) {
        throw SpecError("functional unit qps " + std::to_string(spec.qps) + " does not match run '" +
                        trace.metadata.run_id + "' target_qps " + std::to_string(trace.metadata.target_qps));
    }
    if (!(ci_g_per_kwh >= 0.0)) throw SpecError("carbon intensity must be >= 0");

    CarbonReport r;
    r.config_label = trace.metadata.config_label;
    r.run_id = trace.metadata.run_id;
    r.platform_id = platform.platform_id;
    r.lifetime_s = platform.lifetime_s;
    r.wall_seconds = trace.metadata.duration();
    r.fu_spec = spec;
    r.energy = energy::run_energy(trace);
    r.carbon = carbon::total_carbon(trace, r.energy, platform, ci_g_per_kwh);
    const auto counts = count_functional_units(trace, spec);
    r.n_tokens = counts.n_tokens;
    r.n_fu = counts.n_fu;
    r.cfu_g_per_token = cfu(r.carbon, r.n_fu);
    r.slo_attainment = slo_attainment(trace, spec);
    return r;
}

// ---------------------------------------------------------------------------
// JSON

ordered_json real_to_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double real_from_json(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw SpecError("expected a number or \"inf\"/\"-inf\", got " + j.dump());
}

ordered_json report_to_json(const CarbonReport& r) {
    ordered_json j;
    j["config_label"] = r.config_label;
    j["run_id"] = r.run_id;
    j["platform_id"] = r.platform_id;
    j["lifetime_s"] = r.lifetime_s;
    j["wall_seconds"] = r.wall_seconds;
    j["fu_spec"] = {{"qps", real_to_json(r.fu_spec.qps)},
                    {"alpha", real_to_json(r.fu_spec.alpha)},
                    {"beta", real_to_json(r.fu_spec.beta)},
                    {"gamma", real_to_json(r.fu_spec.gamma)}};
    j["n_tokens"] = r.n_tokens;
    j["n_fu"] = r.n_fu;
    ordered_json per_device = ordered_json::object();
    for (const auto& [id, kwh] : r.energy.per_device) per_device[id] = kwh;
    j["energy"] = {{"per_device", per_device}, {"total_kwh", r.energy.total_kwh}};
    j["carbon"] = {{"c_op_g", r.carbon.c_op_g},
                   {"c_em_g", r.carbon.c_em_g},
                   {"c_total_g", r.carbon.c_total_g},
                   {"ci_used", r.carbon.ci_used},
                   {"embodied_total_g", r.carbon.embodied_total_g}};
    if (r.cfu_g_per_token) {
        j["cfu_g_per_token"] = *r.cfu_g_per_token;
    } else {
        j["cfu_g_per_token"] = "undefined";
    }
    j["slo_attainment"] = r.slo_attainment;
    return j;
}

CarbonReport report_from_json(const json& j) {
    try {
        CarbonReport r;
        r.config_label = j.at("config_label").get<std::string>();
        r.run_id = j.at("run_id").get<std::string>();
        r.platform_id = j.at("platform_id").get<std::string>();
        r.lifetime_s = j.at("lifetime_s").get<double>();
        r.wall_seconds = j.at("wall_seconds").get<double>();
        const auto& s = j.at("fu_spec");
        r.fu_spec = {real_from_json(s.at("qps")), real_from_json(s.at("alpha")), real_from_json(s.at("beta")),
                     real_from_json(s.at("gamma"))};
        r.n_tokens = j.at("n_tokens").get<std::int64_t>();
        r.n_fu = j.at("n_fu").get<std::int64_t>();
        for (const auto& [id, kwh] : j.at("energy").at("per_device").items()) r.energy.per_device[id] = kwh.get<double>();
        r.energy.total_kwh = j.at("energy").at("total_kwh").get<double>();
        const auto& c = j.at("carbon");
        r.carbon = {c.at("c_op_g").get<double>(), c.at("c_em_g").get<double>(), c.at("c_total_g").get<double>(),
                    c.at("ci_used").get<double>(), c.at("embodied_total_g").get<double>()};
        const auto& v = j.at("cfu_g_per_token");
        if (v.is_number()) r.cfu_g_per_token = v.get<double>();
        r.slo_attainment = j.at("slo_attainment").get<double>();
        return r;
    } catch (const json::exception& e) {
        throw SpecError(std::string("malformed report document: ") + e.what());
    }
}

}  // namespace fuel::fu

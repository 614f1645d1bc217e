#include "cli.hpp"

#include <glob.h>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fuel/carbon.hpp"
#include "fuel/comparison.hpp"
#include "fuel/functional_unit.hpp"
#include "fuel/simulator.hpp"
#include "fuel/trace.hpp"

namespace fuel::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

double parse_real(const std::string& flag, const std::string& text) {
    if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw UsageError(flag + ": '" + text + "' is not a number");
    }
    if (used != text.size()) throw UsageError(flag + ": '" + text + "' is not a number");
    return v;
}

double default_ci() {
    if (const char* env = std::getenv("FUEL_CI"); env != nullptr && *env != '\0') {
        return parse_real("FUEL_CI", env);
    }
    return kDefaultCi;
}

/// Constraint flags shared by report and compare.
struct Constraints {
    std::string ci;
    std::string ttft = "1";
    std::string tpot = "0.2";
    std::string lifetime;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--ci", ci, "Carbon intensity, gCO2eq/kWh (default $FUEL_CI or 518)");
        cmd.add_option("--ttft", ttft, "TTFT limit beta, seconds")->capture_default_str();
        cmd.add_option("--tpot", tpot, "TPOT limit gamma, seconds/token")->capture_default_str();
        cmd.add_option("--lifetime", lifetime, "Override platform lifetime, seconds");
    }

    double ci_value() const { return ci.empty() ? default_ci() : parse_real("--ci", ci); }
    double beta() const { return parse_real("--ttft", ttft); }
    double gamma() const { return parse_real("--tpot", tpot); }

    void apply_lifetime(carbon::PlatformSpec& platform) const {
        if (lifetime.empty()) return;
        platform.lifetime_s = parse_real("--lifetime", lifetime);
        carbon::validate_platform(platform);
    }
};

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::parse: return kExitParse;
        case ErrorKind::spec: return kExitSpec;
        case ErrorKind::compute: return kExitCompute;
        case ErrorKind::usage: return kExitUsage;
    }
    return kExitCompute;
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& path, std::ostream& out) {
    const auto trace = trace::read_trace(fs::path(path));
    const auto violations = trace::validate_trace(trace);
    for (const auto& v : violations) out << v.rule << "\t" << v.record_id << "\t" << v.detail << "\n";
    if (violations.empty()) {
        out << "ok: " << trace.requests.size() << " requests, " << trace.power.size() << " power samples\n";
        return kExitOk;
    }
    return kExitViolations;
}

int cmd_report(const std::string& trace_path, const std::string& platform_path, const std::string& alpha,
               const Constraints& c, std::ostream& out) {
    const auto trace = trace::parse_trace(fs::path(trace_path));
    auto platform = carbon::load_platform(fs::path(platform_path));
    c.apply_lifetime(platform);
    fu::FunctionalUnitSpec spec{trace.metadata.target_qps, parse_real("--alpha", alpha), c.beta(), c.gamma()};
    const auto report = fu::build_report(trace, platform, c.ci_value(), spec);
    out << fu::report_to_json(report).dump(2) << "\n";
    return kExitOk;
}

std::vector<fs::path> expand_globs(const std::vector<std::string>& patterns) {
    std::set<fs::path> paths;
    for (const auto& pattern : patterns) {
        glob_t g{};
        const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
        if (rc == 0) {
            for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.insert(g.gl_pathv[i]);
        }
        ::globfree(&g);
        if (rc != 0 && rc != GLOB_NOMATCH) throw SpecError("cannot expand trace pattern '" + pattern + "'");
    }
    if (paths.empty()) throw SpecError("no trace files matched");
    return {paths.begin(), paths.end()};
}

std::map<std::string, carbon::PlatformSpec> load_platform_dir(const std::string& dir, const Constraints& c) {
    if (!fs::is_directory(dir)) throw SpecError("platform directory '" + dir + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::map<std::string, carbon::PlatformSpec> out;
    for (const auto& f : files) {
        auto p = carbon::load_platform(f);
        c.apply_lifetime(p);
        const auto id = p.platform_id;
        if (!out.emplace(id, std::move(p)).second) throw SpecError("platform_id '" + id + "' defined twice");
    }
    return out;
}

int cmd_compare(const std::vector<std::string>& trace_globs, const std::string& platform_dir,
                const std::vector<std::string>& alpha_tokens, const std::string& format_token,
                const Constraints& c, std::ostream& out) {
    const auto format = compare::grid_format_from_string(format_token);
    std::vector<double> alphas;
    for (const auto& a : alpha_tokens) alphas.push_back(parse_real("--alphas", a));
    if (alphas.empty()) throw UsageError("--alphas needs at least one value");

    const auto platforms = load_platform_dir(platform_dir, c);
    const double ci = c.ci_value();
    const double beta = c.beta();
    const double gamma = c.gamma();

    std::vector<fu::CarbonReport> reports;
    for (const auto& path : expand_globs(trace_globs)) {
        const auto trace = trace::parse_trace(path);
        auto it = platforms.find(trace.metadata.platform_id);
        if (it == platforms.end()) {
            throw SpecError("trace '" + path.string() + "' references unknown platform '" +
                            trace.metadata.platform_id + "'");
        }
        for (double alpha : alphas) {
            fu::FunctionalUnitSpec spec{trace.metadata.target_qps, alpha, beta, gamma};
            reports.push_back(fu::build_report(trace, it->second, ci, spec));
        }
    }
    const auto grid = compare::build_grid(reports, alphas, beta, gamma);
    out << compare::emit_grid(grid, format);
    return kExitOk;
}

int cmd_embodied(const std::string& platform_path, std::ostream& out) {
    const auto platform = carbon::load_platform(fs::path(platform_path));
    ordered_json doc;
    doc["platform_id"] = platform.platform_id;
    doc["lifetime_s"] = platform.lifetime_s;
    doc["devices"] = ordered_json::array();
    double total = 0.0;
    for (const auto& d : platform.devices) {
        const auto b = carbon::device_embodied(d);
        ordered_json j;
        j["device_id"] = b.device_id;
        j["kind"] = std::string(carbon::to_string(b.kind));
        j["count"] = b.count;
        j["embodied_mode"] = d.is_act() ? "act" : "direct";
        j["manufacturing_g"] = b.manufacturing_g;
        j["packaging_g"] = b.packaging_g;
        j["dram_g"] = b.dram_g;
        j["direct_g"] = b.direct_g;
        j["total_g"] = b.total_g;
        doc["devices"].push_back(j);
        total += b.total_g;
    }
    doc["total_g"] = total;
    out << doc.dump(2) << "\n";
    return kExitOk;
}

int cmd_simulate(const std::string& profile_path, const std::string& qps, const std::string& duration,
                 std::uint64_t seed, const std::string& output, const std::string& arrival, std::ostream& out) {
    const auto profile = sim::load_profile(fs::path(profile_path));
    const auto result = sim::simulate_run(profile, parse_real("--qps", qps), parse_real("--duration", duration), seed,
                                          sim::arrival_process_from_string(arrival));
    const fs::path trace_path(output);
    sim::write_run(result, trace_path);
    ordered_json doc;
    doc["trace"] = trace_path.string();
    doc["manifest"] = sim::manifest_path_for(trace_path).string();
    doc["n_requests"] = result.manifest.n_requests;
    doc["n_power_samples"] = result.manifest.n_power_samples;
    out << doc.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Carbon per functional unit for LLM serving traces", "fuel"};
    app.require_subcommand(1);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a trace file against the data-model invariants");
    validate->add_option("trace", validate_path, "Trace file")->required();

    std::string trace_path, platform_path, alpha = "-inf";
    Constraints report_c;
    auto* report = app.add_subcommand("report", "Carbon report for one trace under one functional unit");
    report->add_option("--trace", trace_path, "Trace file")->required();
    report->add_option("--platform", platform_path, "Platform file")->required();
    report->add_option("--alpha", alpha, "Minimum Qscore (use --alpha=-inf for none)")->capture_default_str();
    report_c.add_to(*report);

    std::vector<std::string> trace_globs, alpha_tokens;
    std::string platform_dir, format = "csv";
    Constraints compare_c;
    auto* compare = app.add_subcommand("compare", "Greenest-configuration grid over QPS x Qscore threshold");
    compare->add_option("--traces", trace_globs, "Trace file glob(s)")->required();
    compare->add_option("--platforms", platform_dir, "Directory of platform files")->required();
    compare->add_option("--alphas", alpha_tokens, "Comma-separated Qscore thresholds")->required()->delimiter(',');
    compare->add_option("--out", format, "Output format: csv, json or svg")->capture_default_str();
    compare_c.add_to(*compare);

    std::string embodied_path;
    auto* embodied = app.add_subcommand("embodied", "Lifetime embodied carbon breakdown of a platform");
    embodied->add_option("--platform", embodied_path, "Platform file")->required();

    std::string profile_path, qps, duration, output, arrival = "poisson";
    std::uint64_t seed = 0;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic trace and its ground-truth manifest");
    simulate->add_option("--profile", profile_path, "Simulator profile file")->required();
    simulate->add_option("--qps", qps, "Arrival rate, requests/second")->required();
    simulate->add_option("--duration", duration, "Arrival window, seconds")->required();
    simulate->add_option("--seed", seed, "Random seed")->capture_default_str();
    simulate->add_option("-o,--output", output, "Output trace path")->required();
    simulate->add_option("--arrival", arrival, "Arrival process: poisson or constant")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*validate) return cmd_validate(validate_path, out);
        if (*report) return cmd_report(trace_path, platform_path, alpha, report_c, out);
        if (*compare) return cmd_compare(trace_globs, platform_dir, alpha_tokens, format, compare_c, out);
        if (*embodied) return cmd_embodied(embodied_path, out);
        if (*simulate) return cmd_simulate(profile_path, qps, duration, seed, output, arrival, out);
    } catch (const ValidationError& e) {
        for (const auto& v : e.violations()) err << "violation: " << v.rule << " @ " << v.record_id << "\n";
        err << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitCompute;
    }
    return kExitUsage;
}

}  // namespace fuel::cli

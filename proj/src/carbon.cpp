#include "fuel/carbon.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace fuel::carbon {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::gpu: return "gpu";
        case DeviceKind::cpu: return "cpu";
        case DeviceKind::dram: return "dram";
    }
    return "gpu";
}

DeviceKind device_kind_from_string(std::string_view s) {
    if (s == "gpu") return DeviceKind::gpu;
    if (s == "cpu") return DeviceKind::cpu;
    if (s == "dram") return DeviceKind::dram;
    throw SpecError("unknown device kind '" + std::string(s) + "'");
}

const DeviceSpec* PlatformSpec::find(std::string_view device_id) const {
    for (const auto& d : devices) {
        if (d.device_id == device_id) return &d;
    }
    return nullptr;
}

void validate_platform(const PlatformSpec& platform) {
    const std::string where = "platform '" + platform.platform_id + "': ";
    if (!(platform.lifetime_s > 0.0)) throw SpecError(where + "lifetime_s must be positive");
    std::set<std::string> ids;
    for (const auto& d : platform.devices) {
        const std::string dev = where + "device '" + d.device_id + "': ";
        if (!ids.insert(d.device_id).second) throw SpecError(where + "duplicate device_id '" + d.device_id + "'");
        if (!(d.count > 0.0)) throw SpecError(dev + "count must be positive");
        if (d.dies_per_package < 1) throw SpecError(dev + "dies_per_package must be >= 1");
        if (d.n_ic < 0) throw SpecError(dev + "n_ic must be >= 0");
        if (!(d.memory_gb >= 0.0)) throw SpecError(dev + "memory_gb must be >= 0");
        if (!(d.die_area_mm2 >= 0.0)) throw SpecError(dev + "die_area_mm2 must be >= 0");
        if (const auto* direct = std::get_if<DirectEmbodied>(&d.embodied)) {
            if (!(direct->total_g >= 0.0)) throw SpecError(dev + "direct total_g must be >= 0");
        } else {
            const auto& fab = std::get<FabParams>(d.embodied);
            if (d.kind != DeviceKind::dram && !(d.die_area_mm2 > 0.0)) {
                throw SpecError(dev + "act mode requires die_area_mm2 > 0");
            }
            if (!(fab.yield > 0.0 && fab.yield <= 1.0)) throw SpecError(dev + "yield must lie in (0, 1]");
            if (!(fab.ci_fab >= 0.0 && fab.epa >= 0.0 && fab.gpa >= 0.0 && fab.mpa >= 0.0)) {
                throw SpecError(dev + "fab parameters must be >= 0");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

double num(const json& obj, const char* key, const std::string& where, std::optional<double> fallback = {}) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (fallback) return *fallback;
        throw SpecError(where + "missing field '" + key + "'");
    }
    if (!it->is_number()) throw SpecError(where + "field '" + key + "' must be a number");
    return it->get<double>();
}

int integer(const json& obj, const char* key, const std::string& where, int fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer()) throw SpecError(where + "field '" + key + "' must be an integer");
    return it->get<int>();
}

std::string str(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) throw SpecError(where + "missing string field '" + key + "'");
    return it->get<std::string>();
}

DeviceSpec device_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw SpecError(where + "device entry must be an object");
    DeviceSpec d;
    d.device_id = str(j, "device_id", where);
    const std::string at = where + "device '" + d.device_id + "': ";
    d.kind = device_kind_from_string(str(j, "kind", at));
    d.count = num(j, "count", at, 1.0);
    d.tdp_w = num(j, "tdp_w", at, 0.0);
    d.die_area_mm2 = num(j, "die_area_mm2", at, 0.0);
    d.dies_per_package = integer(j, "dies_per_package", at, 1);
    d.memory_gb = num(j, "memory_gb", at, 0.0);
    d.n_ic = integer(j, "n_ic", at, 0);

    const std::string mode = str(j, "embodied_mode", at);
    if (mode == "direct") {
        d.embodied = DirectEmbodied{num(j, "total_g", at)};
    } else if (mode == "act") {
        auto it = j.find("fab");
        if (it == j.end() || !it->is_object()) throw SpecError(at + "act mode requires a 'fab' object");
        FabParams fab;
        fab.ci_fab = num(*it, "ci_fab", at);
        fab.epa = num(*it, "epa", at);
        fab.gpa = num(*it, "gpa", at);
        fab.mpa = num(*it, "mpa", at);
        fab.yield = num(*it, "yield", at, kDefaultYield);
        d.embodied = fab;
    } else {
        throw SpecError(at + "embodied_mode must be 'direct' or 'act'");
    }
    return d;
}

}  // namespace

PlatformSpec platform_from_json(const json& doc) {
    if (!doc.is_object()) throw SpecError("platform document must be a JSON object");
    PlatformSpec p;
    p.platform_id = str(doc, "platform_id", "platform: ");
    const std::string where = "platform '" + p.platform_id + "': ";
    p.lifetime_s = num(doc, "lifetime_s", where, kDefaultLifetimeS);
    auto it = doc.find("devices");
    if (it != doc.end()) {
        if (!it->is_array()) throw SpecError(where + "'devices' must be an array");
        for (const auto& d : *it) p.devices.push_back(device_from_json(d, where));
    }
    validate_platform(p);
    return p;
}

ordered_json platform_to_json(const PlatformSpec& platform) {
    ordered_json doc;
    doc["platform_id"] = platform.platform_id;
    doc["lifetime_s"] = platform.lifetime_s;
    doc["devices"] = ordered_json::array();
    for (const auto& d : platform.devices) {
        ordered_json j;
        j["device_id"] = d.device_id;
        j["kind"] = std::string(to_string(d.kind));
        j["count"] = d.count;
        j["tdp_w"] = d.tdp_w;
        j["die_area_mm2"] = d.die_area_mm2;
        j["dies_per_package"] = d.dies_per_package;
        j["memory_gb"] = d.memory_gb;
        j["n_ic"] = d.n_ic;
        if (const auto* direct = std::get_if<DirectEmbodied>(&d.embodied)) {
            j["embodied_mode"] = "direct";
            j["total_g"] = direct->total_g;
        } else {
            const auto& fab = std::get<FabParams>(d.embodied);
            j["embodied_mode"] = "act";
            j["fab"] = {{"ci_fab", fab.ci_fab}, {"epa", fab.epa}, {"gpa", fab.gpa}, {"mpa", fab.mpa},
                        {"yield", fab.yield}};
        }
        doc["devices"].push_back(j);
    }
    return doc;
}

PlatformSpec load_platform(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open platform file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SpecError("platform file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return platform_from_json(doc);
}

// ---------------------------------------------------------------------------
// Embodied

double manufacturing_carbon(const DeviceSpec& dev) {
    const auto* fab = std::get_if<FabParams>(&dev.embodied);
    if (fab == nullptr) throw SpecError("device '" + dev.device_id + "' is direct-mode; no manufacturing model");
    if (dev.kind == DeviceKind::dram) {
        throw SpecError("device '" + dev.device_id + "' is dram; manufacturing model applies to gpu/cpu dies");
    }
    const double area_cm2 = dev.die_area_mm2 / kMm2PerCm2;
    return dev.dies_per_package * fab->per_area_g_per_cm2() * area_cm2 / fab->yield * dev.count;
}

double packaging_carbon(const DeviceSpec& dev) { return dev.n_ic * kPackagingGPerIc * dev.count; }

double dram_carbon(const DeviceSpec& dev) { return dev.memory_gb * kDramGPerGb * dev.count; }

EmbodiedBreakdown device_embodied(const DeviceSpec& dev) {
    EmbodiedBreakdown b;
    b.device_id = dev.device_id;
    b.kind = dev.kind;
    b.count = dev.count;
    if (const auto* direct = std::get_if<DirectEmbodied>(&dev.embodied)) {
        b.direct_g = direct->total_g * dev.count;
        b.total_g = b.direct_g;
        return b;
    }
    if (dev.kind != DeviceKind::dram) b.manufacturing_g = manufacturing_carbon(dev);
    b.packaging_g = packaging_carbon(dev);
    b.dram_g = dram_carbon(dev);
    b.total_g = b.manufacturing_g + b.packaging_g + b.dram_g;
    return b;
}

double platform_embodied_total(const PlatformSpec& platform) {
    double total = 0.0;
    for (const auto& d : platform.devices) total += device_embodied(d).total_g;
    return total;
}

double amortized_embodied(const PlatformSpec& platform, double t_s) {
    return t_s / platform.lifetime_s * platform_embodied_total(platform);
}

double operational_carbon(double e_op_kwh, double ci_g_per_kwh) { return e_op_kwh * ci_g_per_kwh; }

// ---------------------------------------------------------------------------
// Totals

CarbonTotals total_carbon(const trace::RunTrace& trace, const energy::EnergyBreakdown& energy,
                          const PlatformSpec& platform, double ci_g_per_kwh) {
    for (const auto& device : trace.device_ids()) {
        if (platform.find(device) == nullptr) throw UnknownDeviceError(device);
    }
    CarbonTotals out;
    out.ci_used = ci_g_per_kwh;
    out.embodied_total_g = platform_embodied_total(platform);
    out.c_op_g = operational_carbon(energy.total_kwh, ci_g_per_kwh);
    out.c_em_g = trace.metadata.duration() / platform.lifetime_s * out.embodied_total_g;
    out.c_total_g = out.c_op_g + out.c_em_g;
    return out;
}

CarbonTotals total_carbon(const trace::RunTrace& trace, const PlatformSpec& platform, double ci_g_per_kwh) {
    for (const auto& device : trace.device_ids()) {
        if (platform.find(device) == nullptr) throw UnknownDeviceError(device);
    }
    return total_carbon(trace, energy::run_energy(trace), platform, ci_g_per_kwh);
}

}  // namespace fuel::carbon

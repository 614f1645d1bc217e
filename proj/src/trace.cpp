#include "fuel/trace.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace fuel {

namespace {

std::string summarize(const std::vector<Violation>& violations) {
    std::string msg = "trace failed validation:";
    for (const auto& v : violations) {
        msg += " [" + v.rule + " @ " + v.record_id + "]";
    }
    return msg;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(ErrorKind::parse, summarize(violations)), violations_(std::move(violations)) {}

}  // namespace fuel

namespace fuel::trace {

using nlohmann::json;
using nlohmann::ordered_json;

Quantization Quantization::parse(std::string_view label) {
    Quantization q;
    if (label == "fp16") {
        q.kind_ = Kind::fp16;
    } else if (label == "awq") {
        q.kind_ = Kind::awq;
    } else if (label == "w8a8") {
        q.kind_ = Kind::w8a8;
    } else {
        q.kind_ = Kind::other;
        q.other_ = std::string(label);
    }
    return q;
}

std::string Quantization::label() const {
    switch (kind_) {
        case Kind::fp16: return "fp16";
        case Kind::awq: return "awq";
        case Kind::w8a8: return "w8a8";
        case Kind::other: return other_;
    }
    return other_;
}

std::vector<std::string> RunTrace::device_ids() const {
    std::vector<std::string> ids = metadata.devices;
    auto add = [&ids](const std::string& id) {
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    };
    for (const auto& s : power) add(s.device_id);
    for (const auto& [id, _] : metadata.constant_power_w) add(id);
    return ids;
}

std::vector<PowerSample> RunTrace::samples_for(std::string_view device_id) const {
    std::vector<PowerSample> out;
    for (const auto& s : power) {
        if (s.device_id == device_id) out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

// Fields with dedicated members; everything else in a meta record goes to extensions.
const std::set<std::string, std::less<>> kMetaFields = {
    "kind",        "version",     "run_id",     "config_label", "model_family",
    "model_size_b", "quantization", "platform_id", "dataset_id",  "target_qps",
    "wall_start",  "wall_end",    "devices",    "constant_power_w",
};

class LineReader {
public:
    LineReader(const json& obj, std::size_t line) : obj_(obj), line_(line) {}

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

    const json& field(const char* name) const {
        auto it = obj_.find(name);
        if (it == obj_.end()) fail(std::string("missing field '") + name + "'");
        return *it;
    }

    bool has(const char* name) const { return obj_.contains(name); }

    double number(const char* name) const {
        const json& v = field(name);
        if (!v.is_number()) fail(std::string("field '") + name + "' must be a number");
        return v.get<double>();
    }

    std::optional<double> opt_number(const char* name) const {
        if (!has(name)) return std::nullopt;
        return number(name);
    }

    std::int64_t integer(const char* name) const {
        const json& v = field(name);
        if (!v.is_number_integer()) fail(std::string("field '") + name + "' must be an integer");
        return v.get<std::int64_t>();
    }

    std::string string(const char* name) const {
        const json& v = field(name);
        if (!v.is_string()) fail(std::string("field '") + name + "' must be a string");
        return v.get<std::string>();
    }

    bool boolean(const char* name, bool fallback) const {
        if (!has(name)) return fallback;
        const json& v = field(name);
        if (!v.is_boolean()) fail(std::string("field '") + name + "' must be a boolean");
        return v.get<bool>();
    }

private:
    const json& obj_;
    std::size_t line_;
};

RunMetadata decode_meta(const json& obj, std::size_t line) {
    LineReader r(obj, line);
    const json& version = r.field("version");
    if (!version.is_number_integer()) r.fail("field 'version' must be an integer");
    const auto v = version.get<long long>();
    if (v != kSchemaVersion) throw VersionError(v);

    RunMetadata m;
    m.run_id = r.string("run_id");
    m.config_label = r.string("config_label");
    m.model_family = r.string("model_family");
    m.model_size_b = r.number("model_size_b");
    m.quantization = Quantization::parse(r.string("quantization"));
    m.platform_id = r.string("platform_id");
    m.dataset_id = r.string("dataset_id");
    m.target_qps = r.number("target_qps");
    m.wall_start = r.number("wall_start");
    m.wall_end = r.number("wall_end");

    if (r.has("devices")) {
        const json& devs = r.field("devices");
        if (!devs.is_array()) r.fail("field 'devices' must be an array of strings");
        for (const auto& d : devs) {
            if (!d.is_string()) r.fail("field 'devices' must be an array of strings");
            m.devices.push_back(d.get<std::string>());
        }
    }
    if (r.has("constant_power_w")) {
        const json& cp = r.field("constant_power_w");
        if (!cp.is_object()) r.fail("field 'constant_power_w' must be an object");
        for (const auto& [id, w] : cp.items()) {
            if (!w.is_number()) r.fail("constant_power_w['" + id + "'] must be a number");
            m.constant_power_w[id] = w.get<double>();
        }
    }
    for (const auto& [key, value] : obj.items()) {
        if (!kMetaFields.contains(key)) m.extensions[key] = value;
    }
    return m;
}

RequestRecord decode_request(const json& obj, std::size_t line) {
    LineReader r(obj, line);
    RequestRecord req;
    req.request_id = r.string("request_id");
    req.arrival = r.number("arrival");
    req.first_token_at = r.opt_number("first_token_at");
    req.last_token_at = r.opt_number("last_token_at");
    req.output_tokens = r.integer("output_tokens");
    req.qscore = r.opt_number("qscore");
    req.failed = r.boolean("failed", false);
    return req;
}

PowerSample decode_power(const json& obj, std::size_t line) {
    LineReader r(obj, line);
    PowerSample s;
    s.timestamp = r.number("timestamp");
    s.device_id = r.string("device_id");
    s.power_w = r.number("power_w");
    return s;
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

RunTrace read_trace(std::istream& in) {
    RunTrace trace;
    bool have_meta = false;
    std::size_t line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError(line_no, "record is not a JSON object");
        auto kind_it = obj.find("kind");
        if (kind_it == obj.end() || !kind_it->is_string()) {
            throw ParseError(line_no, "record has no string 'kind'");
        }
        const auto kind = kind_it->get<std::string>();

        if (!have_meta) {
            if (kind != "meta") throw ParseError(line_no, "first record must be kind 'meta'");
            trace.metadata = decode_meta(obj, line_no);
            have_meta = true;
        } else if (kind == "request") {
            trace.requests.push_back(decode_request(obj, line_no));
        } else if (kind == "power") {
            trace.power.push_back(decode_power(obj, line_no));
        } else if (kind == "meta") {
            throw ParseError(line_no, "duplicate meta record");
        } else {
            throw ParseError(line_no, "unknown record kind '" + kind + "'");
        }
    }
    if (!have_meta) throw ParseError(line_no == 0 ? 1 : line_no, "missing meta record");
    return trace;
}

RunTrace read_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot open trace file '" + path.string() + "'");
    return read_trace(in);
}

namespace {

RunTrace validated(RunTrace trace) {
    auto violations = validate_trace(trace);
    if (!violations.empty()) throw ValidationError(std::move(violations));
    return trace;
}

}  // namespace

RunTrace parse_trace(const std::filesystem::path& path) { return validated(read_trace(path)); }

RunTrace parse_trace_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    return validated(read_trace(in));
}

// ---------------------------------------------------------------------------
// Encoding

std::string emit_trace(const RunTrace& trace) {
    const RunMetadata& m = trace.metadata;
    std::string out;

    ordered_json meta;
    meta["kind"] = "meta";
    meta["version"] = kSchemaVersion;
    meta["run_id"] = m.run_id;
    meta["config_label"] = m.config_label;
    meta["model_family"] = m.model_family;
    meta["model_size_b"] = m.model_size_b;
    meta["quantization"] = m.quantization.label();
    meta["platform_id"] = m.platform_id;
    meta["dataset_id"] = m.dataset_id;
    meta["target_qps"] = m.target_qps;
    meta["wall_start"] = m.wall_start;
    meta["wall_end"] = m.wall_end;
    if (!m.devices.empty()) meta["devices"] = m.devices;
    if (!m.constant_power_w.empty()) {
        ordered_json cp = ordered_json::object();
        for (const auto& [id, w] : m.constant_power_w) cp[id] = w;
        meta["constant_power_w"] = cp;
    }
    for (const auto& [key, value] : m.extensions.items()) meta[key] = ordered_json::parse(value.dump());
    out += meta.dump() + '\n';

    for (const auto& req : trace.requests) {
        ordered_json j;
        j["kind"] = "request";
        j["request_id"] = req.request_id;
        j["arrival"] = req.arrival;
        if (req.first_token_at) j["first_token_at"] = *req.first_token_at;
        if (req.last_token_at) j["last_token_at"] = *req.last_token_at;
        j["output_tokens"] = req.output_tokens;
        if (req.qscore) j["qscore"] = *req.qscore;
        j["failed"] = req.failed;
        out += j.dump() + '\n';
    }
    for (const auto& s : trace.power) {
        ordered_json j;
        j["kind"] = "power";
        j["timestamp"] = s.timestamp;
        j["device_id"] = s.device_id;
        j["power_w"] = s.power_w;
        out += j.dump() + '\n';
    }
    return out;
}

void write_trace(const RunTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SpecError("cannot write trace file '" + path.string() + "'");
    out << emit_trace(trace);
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> validate_trace(const RunTrace& trace) {
    std::vector<Violation> out;
    const RunMetadata& m = trace.metadata;
    auto flag = [&out](std::string id, const char* rule, std::string detail) {
        out.push_back({std::move(id), rule, std::move(detail)});
    };

    const bool window_ok = m.wall_end > m.wall_start;
    if (!window_ok) flag("meta", "wall_window_invalid", "wall_end must exceed wall_start");
    if (!(m.target_qps >= 0.0)) flag("meta", "negative_target_qps", "target_qps must be >= 0");
    if (!(m.model_size_b > 0.0)) flag("meta", "invalid_model_size", "model_size_b must be positive");

    const double lo = m.wall_start - kWindowToleranceS;
    const double hi = m.wall_end + kWindowToleranceS;
    auto in_window = [&](double t) { return t >= lo && t <= hi; };

    std::unordered_set<std::string> seen;
    for (const auto& req : trace.requests) {
        const std::string& id = req.request_id;
        if (!seen.insert(id).second) flag(id, "duplicate_request_id", "request_id appears more than once");

        if (req.output_tokens < 0) flag(id, "negative_output_tokens", "output_tokens must be >= 0");
        const bool has_first = req.first_token_at.has_value();
        const bool has_last = req.last_token_at.has_value();
        if ((req.output_tokens > 0) != has_first || has_first != has_last) {
            flag(id, "token_presence_mismatch",
                 "first/last token timestamps must be present exactly when output_tokens > 0");
        }
        if (has_first && *req.first_token_at < req.arrival) {
            flag(id, "first_token_before_arrival", "first_token_at precedes arrival");
        }
        if (has_first && has_last && *req.last_token_at < *req.first_token_at) {
            flag(id, "last_token_before_first", "last_token_at precedes first_token_at");
        }
        if (window_ok) {
            bool inside = in_window(req.arrival);
            if (has_first) inside = inside && in_window(*req.first_token_at);
            if (has_last) inside = inside && in_window(*req.last_token_at);
            if (!inside) flag(id, "timestamp_out_of_window", "timestamp outside [wall_start, wall_end]");
        }
    }

    std::map<std::string, double> last_ts;
    std::set<std::string> non_monotone, out_of_window, negative;
    for (const auto& s : trace.power) {
        if (!(s.power_w >= 0.0)) negative.insert(s.device_id);
        if (window_ok && !in_window(s.timestamp)) out_of_window.insert(s.device_id);
        auto [it, inserted] = last_ts.try_emplace(s.device_id, s.timestamp);
        if (!inserted) {
            if (!(s.timestamp > it->second)) non_monotone.insert(s.device_id);
            it->second = s.timestamp;
        }
    }
    for (const auto& d : negative) flag(d, "negative_power", "power_w must be >= 0");
    for (const auto& d : non_monotone) flag(d, "power_not_monotone", "sample timestamps not strictly increasing");
    for (const auto& d : out_of_window) flag(d, "power_out_of_window", "sample outside [wall_start, wall_end]");

    for (const auto& [id, w] : m.constant_power_w) {
        if (!(w >= 0.0)) flag(id, "negative_power", "constant_power_w must be >= 0");
    }

    const auto devices = trace.device_ids();
    if (devices.empty()) flag("meta", "missing_power", "trace has no power samples and no constant-power fallback");
    for (const auto& d : devices) {
        if (!last_ts.contains(d) && !m.constant_power_w.contains(d)) {
            flag(d, "missing_power", "declared device has no samples and no constant-power fallback");
        }
    }
    return out;
}

LatencySummary derive_latencies(const RequestRecord& req) {
    if (req.failed) throw NoLatencyError("request '" + req.request_id + "' failed");
    if (req.output_tokens < 1 || !req.first_token_at || !req.last_token_at) {
        throw NoLatencyError("request '" + req.request_id + "' produced no tokens");
    }
    LatencySummary out;
    out.ttft = *req.first_token_at - req.arrival;
    out.tpot = req.output_tokens >= 2
                   ? (*req.last_token_at - *req.first_token_at) / static_cast<double>(req.output_tokens - 1)
                   : 0.0;
    return out;
}

}  // namespace fuel::trace

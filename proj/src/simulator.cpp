#include "fuel/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <queue>
#include <random>

#include "fuel/energy.hpp"

namespace fuel::sim {

using nlohmann::json;
using nlohmann::ordered_json;

ArrivalProcess arrival_process_from_string(std::string_view s) {
    if (s == "poisson") return ArrivalProcess::poisson;
    if (s == "constant") return ArrivalProcess::constant;
    throw UsageError("unknown arrival process '" + std::string(s) + "' (expected poisson or constant)");
}

std::string_view to_string(ArrivalProcess p) { return p == ArrivalProcess::poisson ? "poisson" : "constant"; }

void validate_profile(const SimProfile& p) {
    const std::string where = "profile '" + p.config_label + "': ";
    if (p.tokens_min < 1) throw SpecError(where + "tokens_min must be >= 1");
    if (p.tokens_max < p.tokens_min) throw SpecError(where + "tokens_max must be >= tokens_min");
    if (!(p.tokens_mean > 0.0)) throw SpecError(where + "tokens_mean must be positive");
    if (!(p.decode_s_per_token > 0.0)) throw SpecError(where + "decode_s_per_token must be positive");
    if (!(p.prefill_s >= 0.0)) throw SpecError(where + "prefill_s must be >= 0");
    if (p.concurrency < 1) throw SpecError(where + "concurrency must be >= 1");
    if (!(p.qscore_std >= 0.0)) throw SpecError(where + "qscore_std must be >= 0");
    if (!(p.idle_power_w >= 0.0 && p.busy_power_w >= p.idle_power_w)) {
        throw SpecError(where + "need busy_power_w >= idle_power_w >= 0");
    }
    if (p.device_id.empty()) throw SpecError(where + "device_id must not be empty");
}

SimProfile profile_from_json(const json& doc) {
    SimProfile p;
    try {
        p.config_label = doc.at("config_label").get<std::string>();
        p.prefill_s = doc.at("prefill_s").get<double>();
        p.decode_s_per_token = doc.at("decode_s_per_token").get<double>();
        p.concurrency = doc.at("concurrency").get<int>();
        p.tokens_mean = doc.at("tokens_mean").get<double>();
        p.tokens_min = doc.at("tokens_min").get<std::int64_t>();
        p.tokens_max = doc.at("tokens_max").get<std::int64_t>();
        p.qscore_mean = doc.at("qscore_mean").get<double>();
        p.qscore_std = doc.at("qscore_std").get<double>();
        p.idle_power_w = doc.at("idle_power_w").get<double>();
        p.busy_power_w = doc.at("busy_power_w").get<double>();
        p.device_id = doc.value("device_id", p.device_id);
        p.platform_id = doc.value("platform_id", p.platform_id);
        p.model_family = doc.value("model_family", p.model_family);
        p.model_size_b = doc.value("model_size_b", p.model_size_b);
        p.quantization = doc.value("quantization", p.quantization);
        p.dataset_id = doc.value("dataset_id", p.dataset_id);
    } catch (const json::exception& e) {
        throw SpecError(std::string("malformed simulator profile: ") + e.what());
    }
    validate_profile(p);
    return p;
}

ordered_json profile_to_json(const SimProfile& p) {
    ordered_json j;
    j["config_label"] = p.config_label;
    j["prefill_s"] = p.prefill_s;
    j["decode_s_per_token"] = p.decode_s_per_token;
    j["concurrency"] = p.concurrency;
    j["tokens_mean"] = p.tokens_mean;
    j["tokens_min"] = p.tokens_min;
    j["tokens_max"] = p.tokens_max;
    j["qscore_mean"] = p.qscore_mean;
    j["qscore_std"] = p.qscore_std;
    j["idle_power_w"] = p.idle_power_w;
    j["busy_power_w"] = p.busy_power_w;
    j["device_id"] = p.device_id;
    j["platform_id"] = p.platform_id;
    j["model_family"] = p.model_family;
    j["model_size_b"] = p.model_size_b;
    j["quantization"] = p.quantization;
    j["dataset_id"] = p.dataset_id;
    return j;
}

SimProfile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open profile file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SpecError("profile file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return profile_from_json(doc);
}

ordered_json manifest_to_json(const SimManifest& m) {
    ordered_json j;
    j["seed"] = m.seed;
    j["qps"] = m.qps;
    j["duration_s"] = m.duration_s;
    j["arrival_process"] = std::string(to_string(m.arrival));
    j["profile"] = profile_to_json(m.profile);
    j["n_requests"] = m.n_requests;
    j["n_power_samples"] = m.n_power_samples;
    ordered_json energy = ordered_json::object();
    for (const auto& [id, kwh] : m.true_energy_kwh) energy[id] = kwh;
    j["true_energy_kwh"] = energy;
    j["requests"] = ordered_json::array();
    for (std::size_t i = 0; i < m.requests.size(); ++i) {
        const auto& r = m.requests[i];
        ordered_json rj;
        rj["request_id"] = r.request_id;
        rj["arrival"] = r.arrival;
        rj["wait"] = m.waits[i];
        rj["first_token_at"] = r.first_token_at.value_or(0.0);
        rj["last_token_at"] = r.last_token_at.value_or(0.0);
        rj["output_tokens"] = r.output_tokens;
        rj["qscore"] = r.qscore.value_or(0.0);
        j["requests"].push_back(rj);
    }
    return j;
}

std::vector<double> queue_waits(std::span<const double> arrivals, std::span<const double> service_times,
                                int concurrency) {
    if (arrivals.size() != service_times.size()) throw SpecError("arrivals and service times differ in length");
    if (concurrency < 1) throw SpecError("concurrency must be >= 1");

    // Free-at times of occupied servers; servers never used are free immediately.
    std::priority_queue<double, std::vector<double>, std::greater<>> busy_until;
    std::vector<double> waits;
    waits.reserve(arrivals.size());
    const auto servers = static_cast<std::size_t>(concurrency);
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
        double start = arrivals[i];
        if (busy_until.size() >= servers) {
            start = std::max(start, busy_until.top());
            busy_until.pop();
        }
        busy_until.push(start + service_times[i]);
        waits.push_back(start - arrivals[i]);
    }
    return waits;
}

namespace {

// Independent streams so per-request attributes do not depend on the arrival rate:
// request i gets the same length and Qscore at every QPS for a given seed.
constexpr std::uint64_t kArrivalStream = 0x61727269ULL;
constexpr std::uint64_t kAttributeStream = 0x61747472ULL;

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::vector<double> make_arrivals(double qps, double duration_s, std::uint64_t seed, ArrivalProcess process) {
    std::vector<double> out;
    if (qps <= 0.0) return out;
    if (process == ArrivalProcess::constant) {
        for (std::size_t i = 0;; ++i) {
            const double t = static_cast<double>(i) / qps;
            if (t >= duration_s) break;
            out.push_back(t);
        }
        return out;
    }
    auto rng = make_stream(seed, kArrivalStream);
    std::exponential_distribution<double> unit_gap(1.0);
    // Unit-rate gaps scaled by 1/qps, so raising qps compresses the same arrival pattern.
    double unit_time = 0.0;
    for (;;) {
        unit_time += unit_gap(rng);
        const double t = unit_time / qps;
        if (t >= duration_s) break;
        out.push_back(t);
    }
    return out;
}

std::int64_t sample_tokens(const SimProfile& p, std::mt19937_64& rng) {
    std::poisson_distribution<std::int64_t> dist(p.tokens_mean);
    for (int attempt = 0; attempt < 64; ++attempt) {
        const auto n = dist(rng);
        if (n >= p.tokens_min && n <= p.tokens_max) return n;
    }
    return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::llround(p.tokens_mean)), p.tokens_min,
                                    p.tokens_max);
}

std::string request_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "r%06zu", i);
    return buf;
}

}  // namespace

SimResult simulate_run(const SimProfile& profile, double qps, double duration_s, std::uint64_t seed,
                       ArrivalProcess arrival) {
    validate_profile(profile);
    if (!(qps >= 0.0)) throw SpecError("qps must be >= 0");
    if (!(duration_s > 0.0)) throw SpecError("duration must be positive");

    const auto arrivals = make_arrivals(qps, duration_s, seed, arrival);
    const std::size_t n = arrivals.size();

    auto attr_rng = make_stream(seed, kAttributeStream);
    std::vector<std::int64_t> tokens(n);
    std::vector<double> qscores(n);
    std::vector<double> service(n);
    for (std::size_t i = 0; i < n; ++i) {
        tokens[i] = sample_tokens(profile, attr_rng);
        if (profile.qscore_std > 0.0) {
            std::normal_distribution<double> q(profile.qscore_mean, profile.qscore_std);
            qscores[i] = q(attr_rng);
        } else {
            qscores[i] = profile.qscore_mean;
        }
        service[i] = profile.prefill_s + profile.decode_s_per_token * static_cast<double>(tokens[i] - 1);
    }
    const auto waits = queue_waits(arrivals, service, profile.concurrency);

    SimResult result;
    trace::RunTrace& tr = result.trace;
    std::vector<std::pair<double, double>> in_service;  // [start, end)
    double wall_end = duration_s;
    for (std::size_t i = 0; i < n; ++i) {
        const double start = arrivals[i] + waits[i];
        trace::RequestRecord r;
        r.request_id = request_id(i);
        r.arrival = arrivals[i];
        r.first_token_at = start + profile.prefill_s;
        r.last_token_at = *r.first_token_at + profile.decode_s_per_token * static_cast<double>(tokens[i] - 1);
        r.output_tokens = tokens[i];
        r.qscore = qscores[i];
        in_service.emplace_back(start, *r.last_token_at);
        wall_end = std::max(wall_end, *r.last_token_at);
        tr.requests.push_back(std::move(r));
    }

    auto& meta = tr.metadata;
    char run_id[160];
    std::snprintf(run_id, sizeof run_id, "sim-%s-q%g-s%llu", profile.config_label.c_str(), qps,
                  static_cast<unsigned long long>(seed));
    meta.run_id = run_id;
    meta.config_label = profile.config_label;
    meta.model_family = profile.model_family;
    meta.model_size_b = profile.model_size_b;
    meta.quantization = trace::Quantization::parse(profile.quantization);
    meta.platform_id = profile.platform_id;
    meta.dataset_id = profile.dataset_id;
    meta.target_qps = qps;
    meta.wall_start = 0.0;
    meta.wall_end = wall_end;
    meta.devices = {profile.device_id};

    // Power: the device is busy at a sample instant iff some request is in service.
    std::sort(in_service.begin(), in_service.end());
    std::priority_queue<double, std::vector<double>, std::greater<>> open_ends;
    std::size_t next = 0;
    std::vector<bool> busy_at;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * kSampleIntervalS;
        if (t > wall_end) break;
        while (next < in_service.size() && in_service[next].first <= t) open_ends.push(in_service[next++].second);
        while (!open_ends.empty() && open_ends.top() <= t) open_ends.pop();
        const bool busy = !open_ends.empty();
        busy_at.push_back(busy);
        tr.power.push_back({t, profile.device_id, busy ? profile.busy_power_w : profile.idle_power_w});
    }

    // Ground-truth energy from state counts: every sample but the last holds for one
    // full interval, the last holds until wall_end.
    const std::size_t last = busy_at.size() - 1;
    const auto full_busy = static_cast<double>(std::count(busy_at.begin(), busy_at.begin() + last, true));
    const auto full_idle = static_cast<double>(last) - full_busy;
    const double tail_s = wall_end - static_cast<double>(last) * kSampleIntervalS;
    const double tail_w = busy_at[last] ? profile.busy_power_w : profile.idle_power_w;
    const double joules =
        (full_busy * profile.busy_power_w + full_idle * profile.idle_power_w) * kSampleIntervalS + tail_w * tail_s;

    SimManifest& m = result.manifest;
    m.seed = seed;
    m.qps = qps;
    m.duration_s = duration_s;
    m.arrival = arrival;
    m.profile = profile;
    m.n_requests = n;
    m.n_power_samples = tr.power.size();
    m.waits = waits;
    m.requests = tr.requests;
    m.true_energy_kwh[profile.device_id] = joules / energy::kJoulesPerKwh;
    return result;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& trace_path) {
    auto p = trace_path;
    p.replace_extension(".manifest.json");
    return p;
}

void write_run(const SimResult& result, const std::filesystem::path& trace_path) {
    if (trace_path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(trace_path.parent_path(), ec);
    }
    trace::write_trace(result.trace, trace_path);
    const auto mpath = manifest_path_for(trace_path);
    std::ofstream out(mpath, std::ios::binary | std::ios::trunc);
    if (!out) throw SpecError("cannot write manifest '" + mpath.string() + "'");
    out << manifest_to_json(result.manifest).dump(2) << '\n';
}

}  // namespace fuel::sim

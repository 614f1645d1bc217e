#pragma once

// Test-only helpers: random trace generators and brute-force oracles. The oracles
// re-derive every quantity from the raw records and share no code with the library
// paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "fuel/trace.hpp"

namespace fuel::testing {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(FUEL_FIXTURE_DIR) / rel; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fuel-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline bool rel_close(double a, double b, double rel) {
    if (a == b) return true;
    const double scale = std::max(std::abs(a), std::abs(b));
    return std::abs(a - b) <= rel * scale;
}

// ---------------------------------------------------------------------------
// Generators

/// Values on a 0.05 grid, so limits drawn from the same grid hit the inclusive boundaries.
inline double grid_value(std::mt19937_64& rng, int max_steps) {
    std::uniform_int_distribution<int> d(0, max_steps);
    return d(rng) * 0.05;
}

/// A valid trace with `n_requests` requests, some failed, some zero-token, some
/// without a Qscore, and one or two sampled devices.
inline trace::RunTrace random_trace(std::mt19937_64& rng, int n_requests) {
    trace::RunTrace t;
    auto& m = t.metadata;
    m.run_id = "rand";
    m.config_label = "rand/fp16/sim";
    m.model_family = "rand";
    m.model_size_b = 7;
    m.platform_id = "p";
    m.dataset_id = "d";
    m.target_qps = 1.0;
    m.wall_start = 0.0;
    m.wall_end = 50.0;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> tokens(0, 30);
    std::normal_distribution<double> q(5.0, 5.0);
    for (int i = 0; i < n_requests; ++i) {
        trace::RequestRecord r;
        r.request_id = "q" + std::to_string(i);
        r.arrival = grid_value(rng, 400);
        const double u = unit(rng);
        r.failed = u < 0.1;
        r.output_tokens = (u >= 0.1 && u < 0.15) ? 0 : tokens(rng) + 1;
        if (r.failed && unit(rng) < 0.5) r.output_tokens = 0;
        if (r.output_tokens > 0) {
            const double first = r.arrival + grid_value(rng, 30);
            const double per_token = grid_value(rng, 6);
            r.first_token_at = first;
            r.last_token_at = first + per_token * static_cast<double>(r.output_tokens - 1);
        }
        if (unit(rng) > 0.05) r.qscore = std::round(q(rng) * 4.0) / 4.0;
        t.requests.push_back(std::move(r));
    }

    const int n_devices = unit(rng) < 0.5 ? 1 : 2;
    std::uniform_real_distribution<double> watts(0.0, 700.0);
    for (int d = 0; d < n_devices; ++d) {
        const std::string id = "dev" + std::to_string(d);
        double ts = unit(rng) * 0.5;
        while (ts < m.wall_end) {
            t.power.push_back({ts, id, std::round(watts(rng))});
            ts += 0.1 + unit(rng) * 0.3;
        }
    }
    return t;
}

/// Sorted samples for one device strictly inside [0, span].
inline std::vector<trace::PowerSample> random_samples(std::mt19937_64& rng, int n, double span) {
    std::uniform_real_distribution<double> t(0.0, span);
    std::uniform_real_distribution<double> w(0.0, 800.0);
    std::vector<double> ts(static_cast<std::size_t>(n));
    for (auto& x : ts) x = t(rng);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    std::vector<trace::PowerSample> out;
    for (double x : ts) out.push_back({x, "gpu0", w(rng)});
    return out;
}

// ---------------------------------------------------------------------------
// Oracles

struct OracleLatency {
    double ttft;
    double tpot;
};

inline std::optional<OracleLatency> oracle_latency(const trace::RequestRecord& r) {
    if (r.failed || r.output_tokens == 0) return std::nullopt;
    const double ttft = *r.first_token_at - r.arrival;
    double tpot = 0.0;
    if (r.output_tokens > 1) {
        const double decode_span = *r.last_token_at - *r.first_token_at;
        tpot = decode_span / static_cast<double>(r.output_tokens - 1);
    }
    return OracleLatency{ttft, tpot};
}

/// Expands every generated token into a row and filters the rows.
inline std::pair<std::int64_t, std::int64_t> oracle_token_counts(const trace::RunTrace& t, double alpha, double beta,
                                                                 double gamma) {
    struct Row {
        std::optional<double> q;
        double ttft;
        double tpot;
    };
    std::vector<Row> rows;
    for (const auto& r : t.requests) {
        const auto lat = oracle_latency(r);
        if (!lat) continue;
        for (std::int64_t k = 0; k < r.output_tokens; ++k) rows.push_back({r.qscore, lat->ttft, lat->tpot});
    }
    std::int64_t pass = 0;
    for (const auto& row : rows) {
        const bool quality = row.q ? *row.q >= alpha : std::isinf(alpha) && alpha < 0;
        if (quality && row.ttft <= beta && row.tpot <= gamma) ++pass;
    }
    return {static_cast<std::int64_t>(rows.size()), pass};
}

/// Requests meeting both limits over all requests.
inline double oracle_slo(const trace::RunTrace& t, double beta, double gamma) {
    std::size_t ok = 0;
    for (const auto& r : t.requests) {
        const auto lat = oracle_latency(r);
        if (lat && lat->ttft <= beta && lat->tpot <= gamma) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(t.requests.size());
}

/// Builds the step function's breakpoints explicitly, evaluates the held level at
/// the left edge of each segment by search, and sums segment areas (joules).
inline double oracle_step_energy_j(const std::vector<trace::PowerSample>& samples, double ws, double we) {
    std::vector<double> edges{ws, we};
    for (const auto& s : samples) {
        if (s.timestamp > ws && s.timestamp < we) edges.push_back(s.timestamp);
    }
    std::sort(edges.begin(), edges.end());
    auto level_at = [&samples](double x) {
        double level = samples.front().power_w;
        for (const auto& s : samples) {
            if (s.timestamp <= x) level = s.power_w;
        }
        return level;
    };
    long double total = 0.0L;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        total += static_cast<long double>(level_at(edges[i])) * (edges[i + 1] - edges[i]);
    }
    return static_cast<double>(total);
}

/// Event-driven multi-server FCFS queue. Departures at a given instant are
/// processed before arrivals at that instant.
inline std::vector<double> oracle_queue_waits(const std::vector<double>& arrivals, const std::vector<double>& service,
                                              int servers) {
    enum Kind { departure = 0, arrival = 1 };
    using Event = std::tuple<double, int, std::size_t>;  // time, kind, index
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    for (std::size_t i = 0; i < arrivals.size(); ++i) events.emplace(arrivals[i], arrival, i);

    std::vector<double> waits(arrivals.size(), 0.0);
    std::deque<std::size_t> line;
    int free_servers = servers;
    auto start = [&](std::size_t i, double now) {
        waits[i] = now - arrivals[i];
        --free_servers;
        events.emplace(now + service[i], departure, i);
    };
    while (!events.empty()) {
        const auto [now, kind, i] = events.top();
        events.pop();
        if (kind == arrival) {
            if (free_servers > 0 && line.empty()) {
                start(i, now);
            } else {
                line.push_back(i);
            }
        } else {
            ++free_servers;
            if (!line.empty()) {
                const auto next = line.front();
                line.pop_front();
                start(next, now);
            }
        }
    }
    return waits;
}

}  // namespace fuel::testing

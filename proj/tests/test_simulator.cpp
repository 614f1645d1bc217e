#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "fuel/functional_unit.hpp"
#include "fuel/simulator.hpp"
#include "support.hpp"

using namespace fuel;
using namespace fuel::sim;
using fuel::testing::fixture;

namespace {

SimProfile basic_profile() {
    SimProfile p;
    p.config_label = "basic/fp16/sim";
    p.prefill_s = 0.3;
    p.decode_s_per_token = 0.02;
    p.concurrency = 2;
    p.tokens_mean = 20;
    p.tokens_max = 80;
    p.qscore_mean = 5;
    p.qscore_std = 2;
    p.idle_power_w = 50;
    p.busy_power_w = 250;
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("queue_waits examples") {
    const std::vector<double> arrivals{0.0, 0.0, 0.0};
    const std::vector<double> service{1.0, 1.0, 1.0};
    CHECK(queue_waits(arrivals, service, 1) == std::vector<double>{0.0, 1.0, 2.0});
    CHECK(queue_waits(arrivals, service, 3) == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(queue_waits(arrivals, service, 2) == std::vector<double>{0.0, 0.0, 1.0});
    CHECK_THROWS_AS(queue_waits(arrivals, service, 0), SpecError);
}

TEST_CASE("queue_waits matches the event-driven oracle") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int round = 0; round < 100; ++round) {
        const int n = 1 + round * 3;
        std::vector<double> arrivals;
        std::vector<double> service;
        double t = 0.0;
        for (int i = 0; i < n; ++i) {
            // Quantised times so simultaneous arrivals and departures occur.
            t += std::round(u(rng) * 4.0) / 4.0;
            arrivals.push_back(t);
            service.push_back(std::round(u(rng) * 12.0) / 4.0);
        }
        const int servers = 1 + round % 5;
        CHECK(queue_waits(arrivals, service, servers) == fuel::testing::oracle_queue_waits(arrivals, service, servers));
    }
}

TEST_CASE("zero QPS produces an idle trace") {
    const auto run = simulate_run(basic_profile(), 0.0, 10.0, 1);
    CHECK(run.trace.requests.empty());
    CHECK(run.manifest.n_requests == 0);
    CHECK(run.trace.power.size() == 51);
    for (const auto& s : run.trace.power) CHECK(s.power_w == 50.0);
    CHECK(run.manifest.true_energy_kwh.at("gpu0") == doctest::Approx(500.0 / 3.6e6).epsilon(1e-12));
    CHECK(trace::validate_trace(run.trace).empty());
}

TEST_CASE("unbounded concurrency never queues") {
    auto p = basic_profile();
    p.concurrency = 10000;
    p.prefill_s = 0.1;
    const auto run = simulate_run(p, 20.0, 30.0, 5);
    for (double w : run.manifest.waits) CHECK(w == 0.0);
    const fu::FunctionalUnitSpec spec{20.0, fu::kNoAlpha, 1.0, 0.2};
    CHECK(fu::slo_attainment(run.trace, spec) == 1.0);
}

TEST_CASE("same seed gives byte-identical files") {
    const auto p = basic_profile();
    const auto dir = fuel::testing::scratch_dir("sim-determinism");
    write_run(simulate_run(p, 3.0, 20.0, 99), dir / "a.jsonl");
    write_run(simulate_run(p, 3.0, 20.0, 99), dir / "b.jsonl");
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    CHECK(slurp(dir / "a.manifest.json") == slurp(dir / "b.manifest.json"));
    CHECK_FALSE(slurp(dir / "a.jsonl").empty());

    write_run(simulate_run(p, 3.0, 20.0, 100), dir / "c.jsonl");
    CHECK(slurp(dir / "a.jsonl") != slurp(dir / "c.jsonl"));
}

TEST_CASE("request attributes do not depend on QPS") {
    const auto p = basic_profile();
    const auto slow = simulate_run(p, 1.0, 30.0, 8);
    const auto fast = simulate_run(p, 4.0, 30.0, 8);
    REQUIRE(fast.trace.requests.size() > slow.trace.requests.size());
    for (std::size_t i = 0; i < slow.trace.requests.size(); ++i) {
        CHECK(slow.trace.requests[i].output_tokens == fast.trace.requests[i].output_tokens);
        CHECK(slow.trace.requests[i].qscore == fast.trace.requests[i].qscore);
        // The fast run is the slow arrival pattern compressed fourfold.
        CHECK(fuel::testing::rel_close(fast.trace.requests[i].arrival * 4.0, slow.trace.requests[i].arrival, 1e-12));
    }
}

TEST_CASE("constant arrivals are evenly spaced") {
    const auto run = simulate_run(basic_profile(), 2.0, 5.0, 0, ArrivalProcess::constant);
    REQUIRE(run.trace.requests.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(run.trace.requests[i].arrival == static_cast<double>(i) / 2.0);
}

TEST_CASE("generated traces are valid and consistent with the manifest") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int round = 0; round < 30; ++round) {
        auto p = basic_profile();
        p.concurrency = 1 + round % 6;
        p.tokens_min = 1 + round % 3;
        p.tokens_max = p.tokens_min + 40;
        const auto run = simulate_run(p, u(rng) * 8.0, 5.0 + u(rng) * 20.0, static_cast<std::uint64_t>(round));
        CHECK(trace::validate_trace(run.trace).empty());
        CHECK(run.trace.power.size() == run.manifest.n_power_samples);
        for (const auto& r : run.trace.requests) {
            CHECK(r.output_tokens >= p.tokens_min);
            CHECK(r.output_tokens <= p.tokens_max);
            const auto lat = trace::derive_latencies(r);
            CHECK(lat.ttft >= p.prefill_s - 1e-12);
            if (r.output_tokens > 1) CHECK(lat.tpot == doctest::Approx(p.decode_s_per_token).epsilon(1e-9));
        }
        for (std::size_t i = 0; i < run.manifest.waits.size(); ++i) {
            const auto lat = trace::derive_latencies(run.trace.requests[i]);
            CHECK(lat.ttft == doctest::Approx(run.manifest.waits[i] + p.prefill_s).epsilon(1e-9));
        }
    }
}

TEST_CASE("profiles") {
    const auto p = load_profile(fixture("profiles/saturation.json"));
    CHECK(p.concurrency == 4);
    CHECK(profile_from_json(nlohmann::json::parse(profile_to_json(p).dump())) == p);

    auto bad = basic_profile();
    bad.busy_power_w = 10;
    CHECK_THROWS_AS(validate_profile(bad), SpecError);
    bad = basic_profile();
    bad.tokens_max = 0;
    CHECK_THROWS_AS(validate_profile(bad), SpecError);
    CHECK_THROWS_AS(simulate_run(basic_profile(), -1.0, 10.0, 0), SpecError);
    CHECK_THROWS_AS(load_profile(fixture("nope.json")), SpecError);
    CHECK(manifest_path_for("/x/run.jsonl") == std::filesystem::path("/x/run.manifest.json"));
    CHECK_THROWS_AS(arrival_process_from_string("bursty"), UsageError);
}

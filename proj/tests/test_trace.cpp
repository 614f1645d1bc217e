#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fuel/simulator.hpp"
#include "fuel/trace.hpp"
#include "support.hpp"

using namespace fuel;
using namespace fuel::trace;
using fuel::testing::fixture;

namespace {

bool has_rule(const std::vector<Violation>& vs, const std::string& rule) {
    return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.rule == rule; });
}

RunTrace read_text(const std::string& text) {
    std::istringstream in(text);
    return read_trace(in);
}

const char* kMeta =
    R"({"kind":"meta","version":1,"run_id":"r","config_label":"c","model_family":"f","model_size_b":1,)"
    R"("quantization":"awq","platform_id":"p","dataset_id":"d","target_qps":1,"wall_start":0,"wall_end":10})";

}  // namespace

TEST_CASE("minimal fixture parses into one request and one sample") {
    const auto t = parse_trace(fixture("traces/minimal.jsonl"));
    CHECK(t.requests.size() == 1);
    CHECK(t.power.size() == 1);
    CHECK(t.metadata.config_label == "tiny/fp16/cpu");
    CHECK(t.metadata.quantization.kind() == Quantization::Kind::fp16);
    CHECK(t.requests[0].qscore == 1.5);
}

TEST_CASE("first token before arrival is a validation error naming the request") {
    try {
        parse_trace(fixture("traces/corrupted.jsonl"));
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        REQUIRE(e.violations().size() == 1);
        CHECK(e.violations()[0].record_id == "late");
        CHECK(e.violations()[0].rule == "first_token_before_arrival");
    }
}

TEST_CASE("simulated one-QPS minute parses with counts matching the generator manifest") {
    sim::SimProfile p;
    p.config_label = "minute-run";
    p.prefill_s = 0.3;
    p.decode_s_per_token = 0.03;
    p.concurrency = 8;
    p.tokens_mean = 40;
    p.tokens_max = 200;
    p.idle_power_w = 70;
    p.busy_power_w = 280;
    const auto run = sim::simulate_run(p, 1.0, 60.0, 11);
    const auto dir = fuel::testing::scratch_dir("minute-run");
    sim::write_run(run, dir / "run.jsonl");

    const auto t = parse_trace(dir / "run.jsonl");
    CHECK(t.requests.size() == run.manifest.n_requests);
    CHECK(t.power.size() == run.manifest.n_power_samples);
    // 200 ms cadence over a ~60 s window.
    CHECK(t.power.size() >= 300);
    CHECK(t.power.size() <= 320);
    CHECK(t.requests.size() > 30);
    CHECK(t.requests.size() < 100);
    CHECK(std::filesystem::exists(dir / "run.manifest.json"));
}

TEST_CASE("validate_trace") {
    const auto valid = parse_trace(fixture("traces/worked_example.jsonl"));
    CHECK(validate_trace(valid).empty());

    SUBCASE("duplicate request id") {
        auto t = valid;
        t.requests[1].request_id = t.requests[0].request_id;
        const auto vs = validate_trace(t);
        REQUIRE(vs.size() == 1);
        CHECK(vs[0].rule == "duplicate_request_id");
    }
    SUBCASE("unsorted power samples") {
        auto t = valid;
        t.power.push_back({25.0, "gpu0", 360.0});
        const auto vs = validate_trace(t);
        REQUIRE(vs.size() == 1);
        CHECK(vs[0].rule == "power_not_monotone");
        CHECK(vs[0].record_id == "gpu0");
    }
    SUBCASE("meta-only trace reports missing power") {
        auto t = valid;
        t.requests.clear();
        t.power.clear();
        const auto vs = validate_trace(t);
        REQUIRE(vs.size() == 1);
        CHECK(vs[0].rule == "missing_power");
    }
    SUBCASE("constant-power fallback satisfies a declared device") {
        auto t = valid;
        t.metadata.devices = {"gpu0", "cpu0"};
        CHECK(has_rule(validate_trace(t), "missing_power"));
        t.metadata.constant_power_w["cpu0"] = 120.0;
        CHECK(validate_trace(t).empty());
    }
}

TEST_CASE("each invariant is detected on its own") {
    std::mt19937_64 rng(7);
    struct Mutation {
        const char* rule;
        void (*apply)(RunTrace&);
    };
    const Mutation mutations[] = {
        {"wall_window_invalid", [](RunTrace& t) { t.metadata.wall_end = t.metadata.wall_start; }},
        {"negative_target_qps", [](RunTrace& t) { t.metadata.target_qps = -1.0; }},
        {"invalid_model_size", [](RunTrace& t) { t.metadata.model_size_b = 0.0; }},
        {"duplicate_request_id", [](RunTrace& t) { t.requests.back().request_id = t.requests.front().request_id; }},
        {"negative_output_tokens",
         [](RunTrace& t) {
             auto& r = t.requests.front();
             r.output_tokens = -3;
             r.first_token_at.reset();
             r.last_token_at.reset();
         }},
        {"token_presence_mismatch",
         [](RunTrace& t) {
             for (auto& r : t.requests) {
                 if (r.output_tokens > 0) {
                     r.output_tokens = 0;
                     return;
                 }
             }
         }},
        {"first_token_before_arrival",
         [](RunTrace& t) {
             for (auto& r : t.requests) {
                 if (r.first_token_at) {
                     r.arrival = *r.first_token_at + 0.01;
                     return;
                 }
             }
         }},
        {"last_token_before_first",
         [](RunTrace& t) {
             for (auto& r : t.requests) {
                 if (r.first_token_at && *r.first_token_at >= 1.0) {
                     r.last_token_at = *r.first_token_at - 0.01;
                     return;
                 }
             }
         }},
        {"timestamp_out_of_window",
         [](RunTrace& t) {
             for (auto& r : t.requests) {
                 if (r.last_token_at) {
                     r.last_token_at = t.metadata.wall_end + 1.0;
                     return;
                 }
             }
         }},
        {"negative_power", [](RunTrace& t) { t.power.front().power_w = -5.0; }},
        {"power_not_monotone", [](RunTrace& t) { std::swap(t.power[0].timestamp, t.power[1].timestamp); }},
        {"power_out_of_window", [](RunTrace& t) { t.power.back().timestamp = t.metadata.wall_end + 0.5; }},
        {"missing_power", [](RunTrace& t) { t.metadata.devices.push_back("unsampled"); }},
    };
    for (int round = 0; round < 40; ++round) {
        const auto base = fuel::testing::random_trace(rng, 20);
        REQUIRE(validate_trace(base).empty());
        for (const auto& m : mutations) {
            auto t = base;
            m.apply(t);
            const auto vs = validate_trace(t);
            INFO("rule " << m.rule);
            CHECK(has_rule(vs, m.rule));
            for (const auto& v : vs) CHECK(std::string(v.rule) == m.rule);
        }
    }
}

TEST_CASE("derive_latencies") {
    RequestRecord r;
    r.request_id = "x";
    r.arrival = 0.5;
    r.first_token_at = 1.0;
    r.last_token_at = 2.0;
    r.output_tokens = 11;
    auto lat = derive_latencies(r);
    CHECK(lat.ttft == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lat.tpot == doctest::Approx(0.1).epsilon(1e-12));

    r.arrival = 0.0;
    r.first_token_at = 0.3;
    r.last_token_at = 0.3;
    r.output_tokens = 1;
    lat = derive_latencies(r);
    CHECK(lat.ttft == doctest::Approx(0.3));
    CHECK(lat.tpot == 0.0);

    r.failed = true;
    CHECK_THROWS_AS(derive_latencies(r), NoLatencyError);
    r.failed = false;
    r.output_tokens = 0;
    r.first_token_at.reset();
    r.last_token_at.reset();
    CHECK_THROWS_AS(derive_latencies(r), NoLatencyError);
}

TEST_CASE("derive_latencies agrees with the recomputation oracle record by record") {
    std::mt19937_64 rng(2024);
    const auto t = fuel::testing::random_trace(rng, 100);
    for (const auto& r : t.requests) {
        const auto expected = fuel::testing::oracle_latency(r);
        if (!expected) {
            CHECK_THROWS_AS(derive_latencies(r), NoLatencyError);
            continue;
        }
        const auto got = derive_latencies(r);
        CHECK(got.ttft == expected->ttft);
        CHECK(got.tpot == expected->tpot);
        if (r.output_tokens >= 2) {
            const double rebuilt = *r.first_token_at + got.tpot * static_cast<double>(r.output_tokens - 1);
            CHECK(fuel::testing::rel_close(rebuilt, *r.last_token_at, 1e-12));
        }
    }
}

TEST_CASE("emit then parse is the identity") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 50; ++i) {
        auto t = fuel::testing::random_trace(rng, 1 + i);
        t.metadata.quantization = Quantization::parse(i % 2 ? "gptq-4bit" : "w8a8");
        t.metadata.extensions["collector"] = {{"scorer", "none"}, {"qscore_missing", i % 3 == 0}};
        t.metadata.constant_power_w["host"] = 123.25;
        t.metadata.devices = {"dev0", "host"};
        const auto text = emit_trace(t);
        CHECK(read_text(text) == t);
        CHECK(emit_trace(read_text(text)) == text);
    }
}

TEST_CASE("parse errors carry line numbers") {
    SUBCASE("malformed JSON") {
        try {
            read_text(std::string(kMeta) + "\n{\"kind\":\"request\",\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("wrong field type") {
        try {
            read_text(std::string(kMeta) + "\n\n" +
                      R"({"kind":"power","timestamp":"soon","device_id":"g","power_w":1})");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("empty input") { CHECK_THROWS_AS(read_text(""), ParseError); }
    SUBCASE("request before meta") {
        CHECK_THROWS_AS(read_text(R"({"kind":"request","request_id":"a","arrival":0,"output_tokens":0})"),
                        ParseError);
    }
    SUBCASE("unknown kind") { CHECK_THROWS_AS(read_text(std::string(kMeta) + "\n{\"kind\":\"span\"}"), ParseError); }
    SUBCASE("higher schema version") {
        std::string meta = kMeta;
        meta.replace(meta.find("\"version\":1"), 11, "\"version\":2");
        CHECK_THROWS_AS(read_text(meta), VersionError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_trace(std::filesystem::path("/nonexistent/t.jsonl")), ParseError); }
}

TEST_CASE("unknown request fields are ignored, unknown meta fields are kept") {
    const auto t = read_text(R"({"kind":"meta","version":1,"run_id":"r","config_label":"c","model_family":"f",)"
                             R"("model_size_b":1,"quantization":"awq","platform_id":"p","dataset_id":"d",)"
                             R"("target_qps":1,"wall_start":0,"wall_end":10,"gpu_clock_mhz":1980})"
                             "\n"
                             R"({"kind":"request","request_id":"a","arrival":0,"output_tokens":0,"prompt_len":17})");
    CHECK(t.metadata.extensions.at("gpu_clock_mhz") == 1980);
    CHECK(t.requests.size() == 1);
    CHECK(t.metadata.quantization.label() == "awq");
}

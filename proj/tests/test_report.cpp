#include <gtest/gtest.h>

#include "support.hpp"

using namespace gwselect;

TEST(Report, SeventeenDigitFloatsRoundTrip) {
    SplitMix64 rng(1);
    for (int t = 0; t < 1000; ++t) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
        Json j;
        j["v"] = v;
        EXPECT_EQ(nlohmann::json::parse(format_json(j))["v"].get<double>(), v);
    }
}

TEST(Report, FixedLayout) {
    Json j;
    j["b"] = 0.1;
    j["a"] = Json::array({1, 2.5, "x"});
    j["nested"] = Json::object();
    j["nested"]["z"] = true;
    j["nan"] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_EQ(format_json(j),
              "{\n"
              "  \"b\": 0.10000000000000001,\n"
              "  \"a\": [1, 2.5, \"x\"],\n"
              "  \"nested\": {\n"
              "    \"z\": true\n"
              "  },\n"
              "  \"nan\": null\n"
              "}\n");
}

TEST(Report, SolveResultKeys) {
    SplitMix64 rng(2);
    const auto a = testutil::random_space(rng, 6);
    const auto b = testutil::random_space(rng, 6);
    const auto r = testutil::checked_solve(a, b);
    const auto j = to_json(r);
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    EXPECT_EQ(keys, (std::vector<std::string>{"value", "iterations", "converged", "restart_index", "trace"}));
    EXPECT_EQ(j["trace"].size(), r.trace.size());
    EXPECT_EQ(j["trace"][0].size(), 3u);
    EXPECT_EQ(nlohmann::json::parse(format_json(j))["value"].get<double>(), r.value);
}

TEST(Report, RankingReportShape) {
    auto report = rank_scores({{"x", 0.2}, {"y", 0.1}, {"z", 0.3}}, MetricKind::gw);
    report.llm_name = "lm";
    report.pair_count = 50;
    const auto j = to_json(report);
    EXPECT_EQ(j["selected"], "y");
    EXPECT_EQ(j["rows"][0]["rank"], 1);
    EXPECT_EQ(j["direction"], "lower_better");
    EXPECT_EQ(j["config"]["pairs"], 50);
    EXPECT_EQ(j["config"]["gw"]["penalty"], "l1");
    EXPECT_EQ(format_json(j), format_json(to_json(report)));
}

TEST(Report, SweepEntryKeys) {
    const auto sweep = theory::run_sweep({3, 1, 4, 5, 0.2});
    const auto j = to_json(sweep[0]);
    for (const char* k : {"seed", "n", "noise", "gw_inf", "rho_star", "r_min", "lipschitz", "bound", "slack", "holds"})
        EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Report, ReadJsonErrors) {
    testutil::TempDir dir("json");
    write_text(dir / "bad.json", "{ not json");
    try {
        read_json(dir / "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
    }
    EXPECT_THROW(read_json(dir / "missing.json"), Error);
}

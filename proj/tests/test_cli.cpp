#include <gtest/gtest.h>

#include <chrono>

#include "support.hpp"

using namespace gwselect;

namespace {

const std::string kCli = GWSELECT_CLI_PATH;

testutil::CommandResult cli(const testutil::TempDir& dir, const std::string& args) {
    return testutil::run_command(dir, "'" + kCli + "' " + args);
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

synthetic::Pool small_pool(std::uint64_t seed) {
    return synthetic::monotone_pool(60, 4, 8, {0.8, 0.05, 0.3}, seed);
}

}  // namespace

TEST(Cli, GwOnIdenticalFilesIsZero) {
    testutil::TempDir dir("cli-gw");
    const auto pool = small_pool(1);
    write_embeddings(pool.encoders[1], dir / "v.emb");
    for (const char* penalty : {"l1", "l2"}) {
        const auto r = cli(dir, "gw --vision " + q(dir / "v.emb") + " --text " + q(dir / "v.emb") + " --penalty " + penalty);
        ASSERT_EQ(r.exit_code, 0) << r.err;
        const auto j = nlohmann::json::parse(r.out);
        EXPECT_LE(j["value"].get<double>(), 1e-9) << penalty;
        EXPECT_EQ(j["scale"].get<double>(), 1.0);
        EXPECT_EQ(j["pairs"], 60);
    }
}

TEST(Cli, GwWritesCouplingAndReport) {
    testutil::TempDir dir("cli-gw-out");
    const auto pool = small_pool(2);
    write_embeddings(pool.encoders[0], dir / "v.emb");
    write_embeddings(pool.text, dir / "t.emb");
    const auto r = cli(dir, "gw --vision " + q(dir / "v.emb") + " --text " + q(dir / "t.emb") +
                                " --pairs 20 --penalty l2 --out " + q(dir / "r.json") + " --coupling-out " + q(dir / "c.dst"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto j = read_json(dir / "r.json");
    EXPECT_EQ(j["pairs"], 20);
    const Matrix c = read_dst1(dir / "c.dst");
    ASSERT_EQ(c.rows(), 20);
    EXPECT_NEAR(c.sum(), 1.0, 1e-12);
    for (Eigen::Index i = 0; i < 20; ++i) {
        EXPECT_NEAR(c.row(i).sum(), 1.0 / 20, 1e-12);
        EXPECT_NEAR(c.col(i).sum(), 1.0 / 20, 1e-12);
    }
}

TEST(Cli, ParseErrorsExitTwo) {
    testutil::TempDir dir("cli-parse");
    for (const std::string args : {"bogus", "gw --nope 3", "gw --vision x.emb", "score --metric wrong --vision a --text b",
                                   "gw --vision a --text b --penalty l3", ""}) {
        const auto r = cli(dir, args);
        EXPECT_EQ(r.exit_code, 2) << args;
        EXPECT_FALSE(r.err.empty()) << args;
    }
}

TEST(Cli, CorruptInputExitsTwoQuickly) {
    testutil::TempDir dir("cli-corrupt");
    write_text(dir / "bad.emb", "EMB1 but not really");
    const auto pool = small_pool(3);
    write_embeddings(pool.text, dir / "t.emb");
    const auto start = std::chrono::steady_clock::now();
    auto r = cli(dir, "gw --vision " + q(dir / "bad.emb") + " --text " + q(dir / "t.emb"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("error"), std::string::npos);
    EXPECT_LT(secs, 5.0);

    r = cli(dir, "gw --vision " + q(dir / "missing.emb") + " --text " + q(dir / "t.emb"));
    EXPECT_EQ(r.exit_code, 2);

    write_text(dir / "pool.json", "[{\"name\": \"a\"");
    r = cli(dir, "rank --pool " + q(dir / "pool.json") + " --text " + q(dir / "t.emb"));
    EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, MismatchedIdsExitTwo) {
    testutil::TempDir dir("cli-ids");
    auto pool = small_pool(4);
    pool.encoders[0].ids[5] = "other";
    write_embeddings(pool.encoders[0], dir / "v.emb");
    write_embeddings(pool.text, dir / "t.emb");
    const auto r = cli(dir, "score --metric rsa --vision " + q(dir / "v.emb") + " --text " + q(dir / "t.emb"));
    EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, ScoreAllMetrics) {
    testutil::TempDir dir("cli-score");
    const auto pool = small_pool(5);
    write_embeddings(pool.encoders[1], dir / "v.emb");
    write_embeddings(pool.text, dir / "t.emb");
    const auto vision = pool.encoders[1];
    const auto text = pool.text;
    const std::vector<std::pair<std::string, double>> expected{
        {"rsa", rsa_score(vision, text).value},
        {"cca", cca_score(vision, text, 5).value},
        {"mutualnn", mutual_nn_score(vision, text, 4).value},
    };
    for (const auto& [metric, value] : expected) {
        const auto r = cli(dir, "score --metric " + metric + " --k 4 --components 5 --vision " + q(dir / "v.emb") +
                                    " --text " + q(dir / "t.emb"));
        ASSERT_EQ(r.exit_code, 0) << r.err;
        const auto j = nlohmann::json::parse(r.out);
        EXPECT_EQ(j["metric"], metric);
        EXPECT_EQ(j["value"].get<double>(), value) << metric;
        EXPECT_EQ(j["direction"], "higher_better");
    }
    const auto r = cli(dir, "score --metric gw --penalty l2 --vision " + q(dir / "v.emb") + " --text " + q(dir / "t.emb"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["direction"], "lower_better");
    EXPECT_GE(j["value"].get<double>(), 0.0);
}

TEST(Cli, RankSelectsCleanestEncoder) {
    testutil::TempDir dir("cli-rank");
    const auto pool = small_pool(6);
    const auto manifest = testutil::write_pool(dir, pool, {60.0, 75.0, 70.0}, {"A", "B", "C"});
    for (const char* metric : {"gw", "rsa", "cca", "mutualnn", "accuracy"}) {
        const auto r = cli(dir, "rank --pool " + q(manifest) + " --text " + q(dir / "text.emb") + " --metric " + metric +
                                    " --penalty l2 --llm synthetic-llm");
        ASSERT_EQ(r.exit_code, 0) << metric << ": " << r.err;
        const auto j = nlohmann::json::parse(r.out);
        EXPECT_EQ(j["selected"], "B") << metric;
        EXPECT_EQ(j["llm_name"], "synthetic-llm");
        EXPECT_EQ(j["rows"].size(), 3u);
    }
}

TEST(Cli, RankIsByteIdenticalAcrossRuns) {
    testutil::TempDir dir("cli-determinism");
    const auto pool = small_pool(7);
    const auto manifest = testutil::write_pool(dir, pool);
    const std::string args = "rank --pool " + q(manifest) + " --text " + q(dir / "text.emb") + " --pairs 40 --restarts 3";
    const auto first = cli(dir, args + " --out " + q(dir / "a.json"));
    const auto second = cli(dir, args + " --out " + q(dir / "b.json"));
    ASSERT_EQ(first.exit_code, 0) << first.err;
    ASSERT_EQ(second.exit_code, 0) << second.err;
    const auto a = detail::slurp(dir / "a.json");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, detail::slurp(dir / "b.json"));
}

TEST(Cli, CorrelateReport) {
    testutil::TempDir dir("cli-correlate");
    const auto pool = small_pool(8);
    const auto manifest = testutil::write_pool(dir, pool);
    auto r = cli(dir, "rank --pool " + q(manifest) + " --text " + q(dir / "text.emb") + " --out " + q(dir / "scores.json"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    write_text(dir / "perf.json", R"({"enc0": 50.0, "enc1": 80.0, "enc2": 65.0})");
    r = cli(dir, "correlate --scores " + q(dir / "scores.json") + " --performance " + q(dir / "perf.json"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j["spearman_abs"].get<double>(), 1.0, 1e-15);
    EXPECT_GE(j["pearson_abs"].get<double>(), 0.0);
    EXPECT_LE(j["pearson_abs"].get<double>(), 1.0);

    write_text(dir / "perf2.json", R"([{"name": "enc0", "performance": 50.0}, {"name": "enc1", "performance": 80.0}, {"name": "enc2", "performance": 65.0}])");
    r = cli(dir, "correlate --scores " + q(dir / "scores.json") + " --performance " + q(dir / "perf2.json"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(nlohmann::json::parse(r.out)["spearman_abs"], j["spearman_abs"]);

    write_text(dir / "perf3.json", R"({"enc0": 50.0, "enc1": 80.0})");
    r = cli(dir, "correlate --scores " + q(dir / "scores.json") + " --performance " + q(dir / "perf3.json"));
    EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, TheoryCheck) {
    testutil::TempDir dir("cli-theory");
    const auto r = cli(dir, "theory-check --instances 20 --seed 3");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["instances"], 20);
    EXPECT_EQ(j["violations"], 0);
    EXPECT_EQ(j["all_hold"], true);
    EXPECT_EQ(j["entries"].size(), 20u);
}

TEST(Cli, BenchCsv) {
    testutil::TempDir dir("cli-bench");
    const auto r = cli(dir, "bench --sizes 20,40 --dim 8 --penalty l2 --out " + q(dir / "bench.csv"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto csv = detail::slurp(dir / "bench.csv");
    EXPECT_EQ(csv.rfind("n,seconds,penalty,iters,distance_seconds,solver_seconds\n", 0), 0u);
    EXPECT_NE(csv.find("\n20,"), std::string::npos);
    EXPECT_NE(csv.find("\n40,"), std::string::npos);
    EXPECT_EQ(cli(dir, "bench --sizes 20,x").exit_code, 2);
}

// gwselect: rank vision encoders for a language model by representation-space
// structure (Gromov-Wasserstein) and baseline similarity metrics.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gwselect/gwselect.hpp"
#include "gwselect/synthetic.hpp"

namespace {

using namespace gwselect;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;

struct Common {
    std::uint64_t seed = 42;
    std::size_t pairs = 1000;
    std::size_t iters = 1000;
    std::size_t restarts = 1;
    double tolerance = 1e-9;
    std::string penalty = "l1";
    std::string out;
};

PenaltyKind parse_penalty(const std::string& s) {
    if (s == "l1") return PenaltyKind::abs_l1;
    if (s == "l2") return PenaltyKind::squared_l2;
    throw Error(ErrorKind::parameter, "penalty must be l1 or l2, got '" + s + "'");
}

GwConfig gw_config(const Common& c) {
    GwConfig cfg;
    cfg.max_iters = c.iters;
    cfg.restarts = c.restarts;
    cfg.tolerance = c.tolerance;
    cfg.seed = c.seed;
    cfg.penalty = parse_penalty(c.penalty);
    return cfg;
}

void add_gw_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--pairs", c.pairs, "number of sampled pairs (capped at the sample count)")->check(CLI::PositiveNumber);
    cmd->add_option("--iters", c.iters, "Frank-Wolfe iteration cap")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", c.seed, "sampling and restart seed");
    cmd->add_option("--restarts", c.restarts, "restart count")->check(CLI::PositiveNumber);
    cmd->add_option("--tolerance", c.tolerance, "relative objective decrease that stops a run")->check(CLI::PositiveNumber);
    cmd->add_option("--penalty", c.penalty, "l1 or l2")->check(CLI::IsMember({"l1", "l2"}));
    cmd->add_option("--out", c.out, "report path (default: stdout)");
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        std::cout.flush();
    } else {
        write_text(path, text);
    }
}

PairedSample load_pair(const std::string& vision_path, const std::string& text_path, const Common& c) {
    const auto vision = read_embeddings(vision_path, Modality::vision);
    const auto text = read_embeddings(text_path, Modality::text);
    check_paired(vision, text);
    return sample_pairs(vision, text, effective_pairs(c.pairs, vision.size()), c.seed);
}

int run_gw(const std::string& vision_path, const std::string& text_path, const Common& c, const std::string& coupling_out) {
    const GwConfig cfg = gw_config(c);
    const auto sample = load_pair(vision_path, text_path, c);
    const auto dv = pairwise_distances(sample.vision);
    const auto dt = pairwise_distances(sample.text);
    const auto matched = median_scale_match(dv, dt);
    const auto result = solve_gw(matched.scaled, dt, cfg);

    Json j = to_json(result);
    j["penalty"] = to_string(cfg.penalty);
    j["pairs"] = sample.indices.size();
    j["seed"] = c.seed;
    j["scale"] = matched.scale;
    emit(c.out, format_json(j));
    if (!coupling_out.empty()) write_dst1(result.coupling.weights, coupling_out);
    return kExitOk;
}

int run_score(const std::string& metric_name, const std::string& vision_path, const std::string& text_path,
              const Common& c, std::size_t k, std::size_t components) {
    const MetricKind metric = parse_metric(metric_name);
    if (metric == MetricKind::accuracy_external) {
        throw Error(ErrorKind::parameter, "accuracy is not an embedding metric; use rank with a pool manifest");
    }
    ScoringConfig sc;
    sc.gw = gw_config(c);
    sc.cca_components = components;
    sc.knn_k = k;
    const auto sample = load_pair(vision_path, text_path, c);
    const double value = score_metric(metric, sample.vision, sample.text, nullptr, sc);

    Json j;
    j["metric"] = to_string(metric);
    j["value"] = value;
    j["direction"] = to_string(direction_of(metric));
    j["pairs"] = sample.indices.size();
    j["seed"] = c.seed;
    emit(c.out, format_json(j));
    return kExitOk;
}

int run_rank(const std::string& pool_path, const std::string& text_path, const std::string& metric_name,
             const std::string& llm, const Common& c, std::size_t k, std::size_t components) {
    const MetricKind metric = parse_metric(metric_name);
    const auto manifest = read_json(pool_path);
    const auto pool = parse_pool(manifest, std::filesystem::path(pool_path).parent_path());
    const auto text = read_embeddings(text_path, Modality::text);
    ScoringConfig sc;
    sc.gw = gw_config(c);
    sc.pairs = c.pairs;
    sc.seed = c.seed;
    sc.cca_components = components;
    sc.knn_k = k;
    auto report = score_pool(pool, text, metric, sc);
    if (!llm.empty()) report.llm_name = llm;
    emit(c.out, format_json(to_json(report)));
    return kExitOk;
}

std::vector<std::pair<std::string, double>> read_performance(const std::string& path) {
    const auto doc = read_json(path);
    std::vector<std::pair<std::string, double>> out;
    if (doc.is_object()) {
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            if (!it.value().is_number()) throw Error(ErrorKind::format, path + ": value for '" + it.key() + "' is not a number");
            out.emplace_back(it.key(), it.value().get<double>());
        }
    } else if (doc.is_array()) {
        for (const auto& e : doc) {
            if (!e.is_object() || !e.contains("name") || !e.contains("performance") || !e["name"].is_string() ||
                !e["performance"].is_number()) {
                throw Error(ErrorKind::format, path + ": entries need a string \"name\" and numeric \"performance\"");
            }
            out.emplace_back(e["name"].get<std::string>(), e["performance"].get<double>());
        }
    } else {
        throw Error(ErrorKind::format, path + ": expected an object or an array");
    }
    return out;
}

int run_correlate(const std::string& scores_path, const std::string& perf_path, const std::string& out) {
    const auto report = read_json(scores_path);
    if (!report.is_object() || !report.contains("rows") || !report["rows"].is_array()) {
        throw Error(ErrorKind::format, scores_path + ": not a ranking report (missing \"rows\")");
    }
    std::vector<std::pair<std::string, double>> scores;
    for (const auto& row : report["rows"]) {
        if (!row.contains("name") || !row.contains("score") || !row["score"].is_number()) {
            throw Error(ErrorKind::format, scores_path + ": rows need \"name\" and numeric \"score\"");
        }
        scores.emplace_back(row["name"].get<std::string>(), row["score"].get<double>());
    }
    const auto stats = correlate_with_performance(scores, read_performance(perf_path));
    Json j = to_json(stats);
    if (report.contains("metric")) j["metric"] = report["metric"];
    emit(out, format_json(j));
    return kExitOk;
}

int run_theory(std::size_t instances, std::uint64_t seed, const std::string& out) {
    theory::SweepParams p;
    p.instances = instances;
    p.seed = seed;
    const auto sweep = theory::run_sweep(p);

    std::size_t violations = 0;
    double min_theorem = std::numeric_limits<double>::infinity();
    double min_lemma = std::numeric_limits<double>::infinity();
    Json entries = Json::array();
    for (const auto& e : sweep) {
        if (!e.theorem.holds || !e.lemma.holds) ++violations;
        min_theorem = std::min(min_theorem, e.theorem.bound - e.theorem.lipschitz_empirical);
        min_lemma = std::min(min_lemma, e.lemma.min_slack);
        entries.push_back(to_json(e));
    }
    Json j;
    j["instances"] = instances;
    j["seed"] = seed;
    j["violations"] = violations;
    j["all_hold"] = violations == 0;
    j["min_theorem_slack"] = min_theorem;
    j["min_lemma_slack"] = min_lemma;
    j["entries"] = std::move(entries);
    emit(out, format_json(j));
    if (violations) {
        std::cerr << "theory-check: " << violations << " instance(s) violate the bound\n";
        return kExitInternal;
    }
    return kExitOk;
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const long v = std::stol(item, &used);
            if (used != item.size() || v < 2) throw std::invalid_argument(item);
            sizes.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw Error(ErrorKind::parameter, "bad size '" + item + "' in --sizes (need integers >= 2)");
        }
    }
    if (sizes.empty()) throw Error(ErrorKind::parameter, "--sizes is empty");
    return sizes;
}

int run_bench(const std::string& size_list, std::size_t dim, const Common& c) {
    using clock = std::chrono::steady_clock;
    const auto sizes = parse_sizes(size_list);
    const GwConfig cfg = gw_config(c);
    std::string csv = "n,seconds,penalty,iters,distance_seconds,solver_seconds\n";
    for (const auto n : sizes) {
        const auto pool = synthetic::monotone_pool(n, dim, dim, {0.3}, c.seed + n);
        const auto t0 = clock::now();
        const auto dt = pairwise_distances(pool.text);
        const auto matched = median_scale_match(pairwise_distances(pool.encoders[0]), dt);
        const auto t1 = clock::now();
        const auto result = solve_gw(matched.scaled, dt, cfg);
        const auto t2 = clock::now();
        const double dist_s = std::chrono::duration<double>(t1 - t0).count();
        const double solve_s = std::chrono::duration<double>(t2 - t1).count();
        char line[160];
        std::snprintf(line, sizeof line, "%zu,%.6f,%s,%zu,%.6f,%.6f\n", n, dist_s + solve_s, to_string(cfg.penalty),
                      result.iterations_run, dist_s, solve_s);
        csv += line;
        std::cerr << "bench n=" << n << " done in " << dist_s + solve_s << " s (" << result.iterations_run
                  << " iterations)\n";
    }
    emit(c.out, csv);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Training-free vision encoder selection by Gromov-Wasserstein distance"};
    app.require_subcommand(1);

    Common gw_c, score_c, rank_c, bench_c;
    std::string vision, text, coupling_out;
    auto* gw = app.add_subcommand("gw", "GW distance between one vision and one text embedding file");
    gw->add_option("--vision", vision, "vision embeddings (EMB1 or CSV)")->required();
    gw->add_option("--text", text, "text embeddings (EMB1 or CSV)")->required();
    gw->add_option("--coupling-out", coupling_out, "dump the best coupling as DST1");
    add_gw_flags(gw, gw_c);

    std::string metric = "gw";
    std::size_t knn_k = 10, components = 10;
    auto* score = app.add_subcommand("score", "one metric for one vision/text pair");
    score->add_option("--metric", metric, "gw|rsa|cca|mutualnn")->check(CLI::IsMember({"gw", "rsa", "cca", "mutualnn"}));
    score->add_option("--vision", vision)->required();
    score->add_option("--text", text)->required();
    score->add_option("--k", knn_k, "MutualNN neighbours")->check(CLI::PositiveNumber);
    score->add_option("--components", components, "CCA components")->check(CLI::PositiveNumber);
    add_gw_flags(score, score_c);

    std::string pool_path, llm;
    auto* rank = app.add_subcommand("rank", "score and rank a pool of encoders against one LLM");
    rank->add_option("--pool", pool_path, "pool manifest (JSON)")->required();
    rank->add_option("--text", text, "LLM text embeddings")->required();
    rank->add_option("--metric", metric, "gw|rsa|cca|mutualnn|accuracy")
        ->check(CLI::IsMember({"gw", "rsa", "cca", "mutualnn", "accuracy"}));
    rank->add_option("--llm", llm, "LLM name for the report (default: text file metadata)");
    rank->add_option("--k", knn_k, "MutualNN neighbours")->check(CLI::PositiveNumber);
    rank->add_option("--components", components, "CCA components")->check(CLI::PositiveNumber);
    add_gw_flags(rank, rank_c);

    std::string scores_path, perf_path, corr_out;
    auto* correlate = app.add_subcommand("correlate", "correlate report scores with downstream performance");
    correlate->add_option("--scores", scores_path, "ranking report JSON")->required();
    correlate->add_option("--performance", perf_path, "JSON {encoder: value} or [{name, performance}]")->required();
    correlate->add_option("--out", corr_out);

    std::size_t instances = 200;
    std::uint64_t theory_seed = 42;
    std::string theory_out;
    auto* theory_cmd = app.add_subcommand("theory-check", "verify the Lipschitz bound on synthetic instances");
    theory_cmd->add_option("--instances", instances)->check(CLI::PositiveNumber);
    theory_cmd->add_option("--seed", theory_seed);
    theory_cmd->add_option("--out", theory_out);

    std::string sizes = "100,200,500,1000";
    std::size_t bench_dim = 64;
    auto* bench = app.add_subcommand("bench", "GW runtime scaling on synthetic data");
    bench->add_option("--sizes", sizes, "comma-separated sample counts");
    bench->add_option("--dim", bench_dim, "embedding dimension")->check(CLI::PositiveNumber);
    bench->add_option("--iters", bench_c.iters)->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_c.seed);
    bench->add_option("--restarts", bench_c.restarts)->check(CLI::PositiveNumber);
    bench->add_option("--tolerance", bench_c.tolerance)->check(CLI::PositiveNumber);
    bench->add_option("--penalty", bench_c.penalty)->check(CLI::IsMember({"l1", "l2"}));
    bench->add_option("--out", bench_c.out, "CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitValidation;
    }

    try {
        if (*gw) return run_gw(vision, text, gw_c, coupling_out);
        if (*score) return run_score(metric, vision, text, score_c, knn_k, components);
        if (*rank) return run_rank(pool_path, text, metric, llm, rank_c, knn_k, components);
        if (*correlate) return run_correlate(scores_path, perf_path, corr_out);
        if (*theory_cmd) return run_theory(instances, theory_seed, theory_out);
        if (*bench) return run_bench(sizes, bench_dim, bench_c);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    std::cerr << app.help();
    return kExitValidation;
}

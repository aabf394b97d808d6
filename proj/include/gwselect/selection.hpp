#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gwselect/baselines.hpp"
#include "gwselect/embed_io.hpp"
#include "gwselect/error.hpp"
#include "gwselect/gw.hpp"
#include "gwselect/mmspace.hpp"

namespace gwselect {

// Average (fractional) ranks, 1-based.
inline std::vector<double> fractional_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return x[l] < x[r]; });
    std::vector<double> ranks(x.size());
    for (std::size_t lo = 0; lo < order.size();) {
        std::size_t hi = lo + 1;
        while (hi < order.size() && x[order[hi]] == x[order[lo]]) ++hi;
        const double avg = 0.5 * static_cast<double>(lo + 1 + hi);
        for (std::size_t k = lo; k < hi; ++k) ranks[order[k]] = avg;
        lo = hi;
    }
    return ranks;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error(ErrorKind::shape, "spearman inputs differ in length");
    if (x.size() < 3) throw Error(ErrorKind::size, "spearman needs at least 3 points");
    return pearson(fractional_ranks(x), fractional_ranks(y));
}

// Coefficient of determination of the least-squares line y ~ a + b x.
inline double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error(ErrorKind::shape, "r_squared inputs differ in length");
    if (x.size() < 3) throw Error(ErrorKind::size, "r_squared needs at least 3 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::degenerate, "r_squared input has zero variance");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double resid = y[i] - (intercept + slope * x[i]);
        ss_res += resid * resid;
    }
    return std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
}

struct CorrelationStats {
    double pearson_abs = 0.0;
    double spearman_abs = 0.0;
    double r_squared = 0.0;
    std::vector<std::string> names;  // encoders used, in input order
};

inline CorrelationStats correlate_values(const std::vector<double>& scores, const std::vector<double>& performance) {
    CorrelationStats out;
    out.pearson_abs = std::abs(pearson(scores, performance));
    out.spearman_abs = std::abs(spearman(scores, performance));
    out.r_squared = r_squared(scores, performance);
    return out;
}

// Aligns by encoder name. Every name in `performance` must have a score;
// scored encoders without a performance number are left out, as are
// encoders the caller never measured.
inline CorrelationStats correlate_with_performance(const std::vector<std::pair<std::string, double>>& scores,
                                                   const std::vector<std::pair<std::string, double>>& performance) {
    std::map<std::string, double> by_name;
    for (const auto& [name, s] : scores) {
        if (!by_name.emplace(name, s).second) throw Error(ErrorKind::alignment, "duplicate encoder '" + name + "' in scores");
    }
    std::set<std::string> seen;
    std::vector<double> xs, ys;
    std::vector<std::string> names;
    for (const auto& [name, p] : performance) {
        if (!seen.insert(name).second) throw Error(ErrorKind::alignment, "duplicate encoder '" + name + "' in performance");
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw Error(ErrorKind::alignment, "no score for encoder '" + name + "'");
        xs.push_back(it->second);
        ys.push_back(p);
        names.push_back(name);
    }
    if (xs.size() < 3) throw Error(ErrorKind::alignment, "need at least 3 aligned encoders, got " + std::to_string(xs.size()));
    auto out = correlate_values(xs, ys);
    out.names = std::move(names);
    return out;
}

struct EncoderEntry {
    std::string name;
    std::filesystem::path embedding_path;
    std::optional<double> external_accuracy;
    std::optional<std::int64_t> size_params;
};

// Manifest: JSON array of {"name", "embedding_path", "external_accuracy"?,
// "size_params"?}. Relative paths resolve against the manifest's directory.
inline std::vector<EncoderEntry> parse_pool(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
    if (!doc.is_array()) throw Error(ErrorKind::pool, "pool manifest must be a JSON array");
    std::vector<EncoderEntry> pool;
    std::set<std::string> names;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& e = doc[i];
        const std::string where = "pool entry " + std::to_string(i);
        if (!e.is_object()) throw Error(ErrorKind::pool, where + " is not an object");
        if (!e.contains("name") || !e["name"].is_string()) throw Error(ErrorKind::pool, where + " lacks a string \"name\"");
        if (!e.contains("embedding_path") || !e["embedding_path"].is_string()) {
            throw Error(ErrorKind::pool, where + " lacks a string \"embedding_path\"");
        }
        EncoderEntry entry;
        entry.name = e["name"].get<std::string>();
        if (!names.insert(entry.name).second) throw Error(ErrorKind::pool, "duplicate encoder name '" + entry.name + "'");
        std::filesystem::path p = e["embedding_path"].get<std::string>();
        entry.embedding_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        if (e.contains("external_accuracy") && !e["external_accuracy"].is_null()) {
            if (!e["external_accuracy"].is_number()) throw Error(ErrorKind::pool, where + ": external_accuracy must be a number");
            entry.external_accuracy = e["external_accuracy"].get<double>();
        }
        if (e.contains("size_params") && !e["size_params"].is_null()) {
            if (!e["size_params"].is_number_integer()) throw Error(ErrorKind::pool, where + ": size_params must be an integer");
            entry.size_params = e["size_params"].get<std::int64_t>();
        }
        pool.push_back(std::move(entry));
    }
    if (pool.empty()) throw Error(ErrorKind::pool, "pool manifest is empty");
    return pool;
}

struct RankedRow {
    std::string name;
    double score = 0.0;
    std::size_t rank = 0;
};

struct ScoringConfig {
    GwConfig gw;
    std::size_t pairs = 1000;  // capped at the available sample count
    std::uint64_t seed = 42;
    std::size_t cca_components = 10;
    std::size_t knn_k = 10;
};

struct RankingReport {
    std::string llm_name;
    MetricKind metric = MetricKind::gw;
    Direction direction = Direction::lower_better;
    std::vector<RankedRow> rows;
    std::vector<std::string> excluded;
    std::string selected;
    ScoringConfig config;
    std::size_t pair_count = 0;
};

// Sorts best-first for the metric's direction; equal scores fall back to
// name order. Rank 1 is the selected encoder.
inline RankingReport rank_scores(std::vector<std::pair<std::string, double>> scores, MetricKind metric) {
    if (scores.empty()) throw Error(ErrorKind::pool, "nothing to rank");
    RankingReport report;
    report.metric = metric;
    report.direction = direction_of(metric);
    const bool lower = report.direction == Direction::lower_better;
    std::sort(scores.begin(), scores.end(), [lower](const auto& l, const auto& r) {
        if (l.second != r.second) return lower ? l.second < r.second : l.second > r.second;
        return l.first < r.first;
    });
    for (std::size_t i = 0; i < scores.size(); ++i) report.rows.push_back({scores[i].first, scores[i].second, i + 1});
    report.selected = report.rows.front().name;
    return report;
}

inline std::size_t effective_pairs(std::size_t requested, std::size_t available) {
    return std::min(requested, available);
}

// Median-matched GW of one vision set against precomputed text distances.
inline GwSolveResult gw_score(const EmbeddingSet& vision, const DistanceMatrix& text_dist, const GwConfig& cfg) {
    const auto vision_dist = pairwise_distances(vision);
    const auto matched = median_scale_match(vision_dist, text_dist);
    return solve_gw(matched.scaled, text_dist, cfg);
}

inline double score_metric(MetricKind metric, const EmbeddingSet& vision, const EmbeddingSet& text,
                           const DistanceMatrix* text_dist, const ScoringConfig& cfg) {
    switch (metric) {
        case MetricKind::gw: {
            if (text_dist) return gw_score(vision, *text_dist, cfg.gw).value;
            return gw_score(vision, pairwise_distances(text), cfg.gw).value;
        }
        case MetricKind::rsa: return rsa_score(vision, text).value;
        case MetricKind::cca: return cca_score(vision, text, cfg.cca_components).value;
        case MetricKind::mutual_nn: return mutual_nn_score(vision, text, cfg.knn_k).value;
        case MetricKind::accuracy_external: break;
    }
    throw Error(ErrorKind::parameter, "metric has no embedding-based score");
}

// Scores every encoder against one text set. All encoders share the same
// sampled rows. Encoders lacking an external accuracy are listed as excluded
// when ranking by it.
inline RankingReport score_pool(const std::vector<EncoderEntry>& pool, const EmbeddingSet& text, MetricKind metric,
                                const ScoringConfig& cfg) {
    std::vector<std::pair<std::string, double>> scores;
    std::vector<std::string> excluded;
    std::size_t pair_count = 0;

    if (metric == MetricKind::accuracy_external) {
        for (const auto& e : pool) {
            if (e.external_accuracy) scores.emplace_back(e.name, *e.external_accuracy);
            else excluded.push_back(e.name);
        }
    } else {
        // Load and pair-check every encoder before any scoring work.
        std::vector<EmbeddingSet> sets;
        sets.reserve(pool.size());
        for (const auto& e : pool) {
            EmbeddingSet s;
            try {
                s = read_embeddings(e.embedding_path, Modality::vision);
            } catch (const Error& err) {
                throw Error(ErrorKind::pool, "encoder '" + e.name + "': " + err.what());
            }
            try {
                check_paired(s, text);
            } catch (const Error& err) {
                throw Error(ErrorKind::pairing, "encoder '" + e.name + "': " + err.what());
            }
            sets.push_back(std::move(s));
        }
        pair_count = effective_pairs(cfg.pairs, text.size());
        const auto rows = sample_indices(text.size(), pair_count, cfg.seed);
        const EmbeddingSet text_sample = select_rows(text, rows);
        std::optional<DistanceMatrix> text_dist;
        if (metric == MetricKind::gw) text_dist = pairwise_distances(text_sample);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const EmbeddingSet vision_sample = select_rows(sets[i], rows);
            scores.emplace_back(pool[i].name,
                                score_metric(metric, vision_sample, text_sample, text_dist ? &*text_dist : nullptr, cfg));
        }
    }
    if (scores.empty()) throw Error(ErrorKind::pool, "no encoder has a score for metric " + std::string(to_string(metric)));
    RankingReport report = rank_scores(std::move(scores), metric);
    report.excluded = std::move(excluded);
    report.llm_name = text.source;
    report.config = cfg;
    report.pair_count = pair_count;
    return report;
}

}  // namespace gwselect

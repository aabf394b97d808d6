#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "gwselect/embed_io.hpp"
#include "gwselect/gw.hpp"
#include "gwselect/selection.hpp"
#include "gwselect/theory.hpp"

namespace gwselect {

using Json = nlohmann::ordered_json;

namespace detail {

inline void emit(const Json& j, std::string& out, int depth) {
    const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
    switch (j.type()) {
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            if (!std::isfinite(v)) {
                out += "null";
            } else {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out += buf;
            }
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            // Arrays of scalars stay on one line (trace rows, name lists).
            const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
            out += flat ? "[" : "[\n";
            bool first = true;
            for (const auto& e : j) {
                if (!first) out += flat ? ", " : ",\n";
                first = false;
                if (!flat) out += pad;
                emit(e, out, depth + 1);
            }
            out += flat ? "]" : "\n" + close_pad + "]";
            return;
        }
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad + Json(it.key()).dump() + ": ";
                emit(it.value(), out, depth + 1);
            }
            out += "\n" + close_pad + "}";
            return;
        }
        default: out += j.dump(); return;
    }
}

}  // namespace detail

// Key order is insertion order; doubles print with 17 significant digits.
inline std::string format_json(const Json& j) {
    std::string out;
    detail::emit(j, out, 0);
    out += '\n';
    return out;
}

inline Json to_json(const GwSolveResult& r) {
    Json j;
    j["value"] = r.value;
    j["iterations"] = r.iterations_run;
    j["converged"] = r.converged;
    j["restart_index"] = r.restart_index;
    Json trace = Json::array();
    for (const auto& t : r.trace) trace.push_back(Json::array({t.iteration, t.objective, t.step}));
    j["trace"] = std::move(trace);
    return j;
}

inline Json to_json(const GwConfig& c) {
    Json j;
    j["max_iters"] = c.max_iters;
    j["tolerance"] = c.tolerance;
    j["restarts"] = c.restarts;
    j["seed"] = c.seed;
    j["penalty"] = to_string(c.penalty);
    return j;
}

inline Json to_json(const RankingReport& r) {
    Json j;
    j["llm_name"] = r.llm_name;
    j["metric"] = to_string(r.metric);
    j["direction"] = to_string(r.direction);
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json e;
        e["name"] = row.name;
        e["score"] = row.score;
        e["rank"] = row.rank;
        rows.push_back(std::move(e));
    }
    j["rows"] = std::move(rows);
    j["excluded"] = r.excluded;
    j["selected"] = r.selected;
    Json cfg;
    cfg["gw"] = to_json(r.config.gw);
    cfg["seed"] = r.config.seed;
    cfg["pairs"] = r.pair_count;
    cfg["cca_components"] = r.config.cca_components;
    cfg["knn_k"] = r.config.knn_k;
    j["config"] = std::move(cfg);
    return j;
}

inline Json to_json(const CorrelationStats& s) {
    Json j;
    j["pearson_abs"] = s.pearson_abs;
    j["spearman_abs"] = s.spearman_abs;
    j["r_squared"] = s.r_squared;
    j["count"] = s.names.size();
    j["encoders"] = s.names;
    return j;
}

inline Json to_json(const theory::SweepEntry& e) {
    Json j;
    j["seed"] = e.seed;
    j["n"] = e.n;
    j["noise"] = e.noise;
    j["gw_inf"] = e.theorem.gw_inf;
    j["rho_star"] = e.theorem.rho_star;
    j["r_min"] = e.theorem.r_min;
    j["lipschitz"] = e.theorem.lipschitz_empirical;
    j["bound"] = e.theorem.bound;
    j["slack"] = e.theorem.bound - e.theorem.lipschitz_empirical;
    j["holds"] = e.theorem.holds;
    j["lemma_slack"] = e.lemma.min_slack;
    j["lemma_holds"] = e.lemma.holds;
    j["d_x"] = e.d_x;
    j["d_y"] = e.d_y;
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) { detail::dump(path, text); }

inline Json read_json(const std::filesystem::path& path) {
    const std::string text = detail::slurp(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::format, path.string() + ": " + e.what());
    }
}

}  // namespace gwselect

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "epgnn/graph.hpp"
#include "epgnn/vecmath.hpp"

// Cold start for shows with no interaction history: score historical
// combination nodes by weighted profile-field overlap and average the
// embeddings of the closest ones.

namespace epgnn {

using ShowProfile = Profile;
using FieldWeights = std::map<std::string, double>;

enum class OverlapMeasure { MatchCount, Jaccard };

struct ColdStartConfig {
    std::uint32_t top_m = 20;
    OverlapMeasure measure = OverlapMeasure::MatchCount;
    bool global_mean_fallback = false;

    void validate() const {
        if (top_m < 1) throw std::invalid_argument("top_m must be >= 1");
    }
};

namespace detail {

// multi-valued fields: elements split on ';' or ',', surrounding blanks trimmed
inline std::set<std::string> split_values(std::string_view s) {
    std::set<std::string> out;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        std::size_t a = start, b = end;
        while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
        while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t')) --b;
        if (b > a) out.emplace(s.substr(a, b - a));
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == ';' || s[i] == ',') {
            flush(i);
            start = i + 1;
        }
    }
    flush(s.size());
    return out;
}

}  // namespace detail

// Weighted element-wise match count over shared fields; fields missing from
// `weights` weigh 1. The Jaccard variant scores each shared field by
// |A ∩ B| / |A ∪ B| instead of |A ∩ B|.
inline double profile_overlap(const ShowProfile& p, const ShowProfile& q, const FieldWeights& weights,
                              OverlapMeasure measure = OverlapMeasure::MatchCount) {
    for (const auto& [k, w] : weights)
        if (w < 0.0) throw std::invalid_argument("field weights must be >= 0");
    double total = 0.0;
    for (const auto& [key, pv] : p) {
        const auto qi = q.find(key);
        if (qi == q.end()) continue;
        const std::set<std::string> a = detail::split_values(pv);
        const std::set<std::string> b = detail::split_values(qi->second);
        std::size_t inter = 0;
        for (const std::string& v : a)
            if (b.count(v)) ++inter;
        if (inter == 0) continue;
        const auto wi = weights.find(key);
        const double w = wi == weights.end() ? 1.0 : wi->second;
        if (measure == OverlapMeasure::MatchCount) {
            total += w * static_cast<double>(inter);
        } else {
            const std::size_t uni = a.size() + b.size() - inter;
            total += w * static_cast<double>(inter) / static_cast<double>(uni);
        }
    }
    return total;
}

// Overlap-weighted mean over the top-M overlapping combos (ties broken by
// ascending node id). Weights are normalized before mixing, so a single
// match returns that combo's embedding bitwise.
inline Vec coldstart_embed(const ShowProfile& new_profile, const Graph& g,
                           std::span<const NodeId> combo_nodes, const Matrix& emb,
                           const ColdStartConfig& cfg, const FieldWeights& weights = {}) {
    cfg.validate();
    if (combo_nodes.empty()) throw std::invalid_argument("no combo nodes");

    std::vector<std::pair<double, NodeId>> scored;
    for (NodeId c : combo_nodes) {
        const double s = profile_overlap(new_profile, g.nodes[c].profile, weights, cfg.measure);
        if (s > 0.0) scored.emplace_back(s, c);
    }
    if (scored.empty()) {
        if (!cfg.global_mean_fallback) throw std::runtime_error("no comparable show");
        Vec mean(emb.cols(), 0.0);
        for (NodeId c : combo_nodes) axpy(mean, 1.0, emb.row(c));
        for (double& x : mean) x /= static_cast<double>(combo_nodes.size());
        return mean;
    }

    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (scored.size() > cfg.top_m) scored.resize(cfg.top_m);

    double total = 0.0;
    for (const auto& [s, c] : scored) total += s;
    Vec out(emb.cols(), 0.0);
    for (const auto& [s, c] : scored) axpy(out, s / total, emb.row(c));
    return out;
}

}  // namespace epgnn

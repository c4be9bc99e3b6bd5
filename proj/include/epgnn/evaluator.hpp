#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "epgnn/graph.hpp"
#include "epgnn/rng.hpp"
#include "epgnn/vecmath.hpp"

// Link-prediction evaluation. A fraction of edges is held out (validation and
// test), embeddings are trained on the remainder, and held-out edges are scored
// against an equal number of sampled non-edges with matching endpoint kinds.

namespace epgnn {

struct EvalPair {
    NodeId a = 0;
    NodeId b = 0;
};

struct EdgeSplit {
    Graph train_graph;
    std::vector<EvalPair> valid_pos, valid_neg;
    std::vector<EvalPair> test_pos, test_neg;
};

struct SplitConfig {
    double valid_fraction = 0.05;
    double test_fraction = 0.10;
    std::uint64_t rng_seed = 11;

    void validate() const {
        if (valid_fraction < 0.0 || test_fraction < 0.0 || valid_fraction + test_fraction >= 1.0)
            throw std::invalid_argument("holdout fractions must be >= 0 and sum below 1");
    }
};

namespace detail {

inline std::uint64_t pair_code(NodeId a, NodeId b) {
    const NodeId lo = std::min(a, b), hi = std::max(a, b);
    return (static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint64_t>(hi & 0xffffffffULL);
}

// uniform non-adjacent same-kind-pattern pairs, distinct from each other and from all edges
inline std::vector<EvalPair> sample_negatives(const Graph& g, EdgeKind kind, std::size_t count,
                                              const std::unordered_set<std::uint64_t>& edge_codes,
                                              std::unordered_set<std::uint64_t>& used, Rng& rng) {
    std::vector<NodeId> left, right;
    for (const Node& n : g.nodes) {
        const bool user = n.kind == NodeKind::User;
        if (kind == EdgeKind::UserShow) {
            (user ? left : right).push_back(n.id);
        } else if (kind == EdgeKind::UserUser && user) {
            left.push_back(n.id);
        } else if (kind == EdgeKind::ShowShow && !user) {
            left.push_back(n.id);
        }
    }
    if (kind != EdgeKind::UserShow) right = left;
    if (left.empty() || right.empty()) throw std::runtime_error("graph too small for negative sampling");

    std::vector<EvalPair> out;
    out.reserve(count);
    const std::size_t max_tries = 200 * count + 1000;
    std::size_t tries = 0;
    while (out.size() < count) {
        if (++tries > max_tries) throw std::runtime_error("graph too small for negative sampling");
        const NodeId a = left[rng.next_below(left.size())];
        const NodeId b = right[rng.next_below(right.size())];
        if (a == b) continue;
        const std::uint64_t code = pair_code(a, b);
        if (edge_codes.count(code) || used.count(code)) continue;
        used.insert(code);
        out.push_back(EvalPair{a, b});
    }
    return out;
}

}  // namespace detail

// Greedy holdout draw over shuffled edges; an edge is only taken when removal
// leaves both endpoints connected. Unfilled quotas retry over what is left,
// up to ten passes.
inline EdgeSplit split_edges(const Graph& g, const SplitConfig& cfg) {
    cfg.validate();
    const std::size_t e_total = g.edge_count();
    const std::size_t want_valid = static_cast<std::size_t>(std::llround(cfg.valid_fraction * e_total));
    const std::size_t want_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * e_total));

    std::vector<std::size_t> remaining_degree(g.node_count());
    for (NodeId v = 0; v < g.node_count(); ++v) remaining_degree[v] = g.degree(v);

    std::vector<char> held(e_total, 0);
    std::vector<std::size_t> test_idx, valid_idx;
    Rng rng(Rng::mix(cfg.rng_seed, 0x59117));

    auto draw = [&](std::size_t want, std::vector<std::size_t>& into) {
        for (int pass = 0; pass < 10 && into.size() < want; ++pass) {
            std::vector<std::size_t> order;
            for (std::size_t e = 0; e < e_total; ++e)
                if (!held[e]) order.push_back(e);
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.next_below(i)]);
            for (std::size_t e : order) {
                if (into.size() >= want) break;
                const Edge& ed = g.edges[e];
                if (remaining_degree[ed.src] < 2 || remaining_degree[ed.dst] < 2) continue;
                held[e] = 1;
                --remaining_degree[ed.src];
                --remaining_degree[ed.dst];
                into.push_back(e);
            }
        }
        if (into.size() < want) throw std::runtime_error("graph too small to split");
    };
    draw(want_test, test_idx);
    draw(want_valid, valid_idx);

    EdgeSplit split;
    split.train_graph.nodes = g.nodes;
    split.train_graph.parent_ids = g.parent_ids;
    split.train_graph.features_normalized = g.features_normalized;
    split.train_graph.adjacency.assign(g.node_count(), {});
    for (std::size_t e = 0; e < e_total; ++e)
        if (!held[e]) {
            const Edge& ed = g.edges[e];
            split.train_graph.add_edge(ed.src, ed.dst, ed.kind, ed.weight, ed.features);
        }

    std::unordered_set<std::uint64_t> edge_codes;
    edge_codes.reserve(e_total * 2);
    for (const Edge& ed : g.edges) edge_codes.insert(detail::pair_code(ed.src, ed.dst));

    std::unordered_set<std::uint64_t> used;
    auto fill = [&](const std::vector<std::size_t>& idx, std::vector<EvalPair>& pos,
                    std::vector<EvalPair>& neg) {
        std::size_t per_kind[3] = {0, 0, 0};
        for (std::size_t e : idx) {
            pos.push_back(EvalPair{g.edges[e].src, g.edges[e].dst});
            ++per_kind[static_cast<int>(g.edges[e].kind)];
        }
        for (int k = 0; k < 3; ++k) {
            if (per_kind[k] == 0) continue;
            auto sampled = detail::sample_negatives(g, static_cast<EdgeKind>(k), per_kind[k],
                                                    edge_codes, used, rng);
            neg.insert(neg.end(), sampled.begin(), sampled.end());
        }
    };
    fill(test_idx, split.test_pos, split.test_neg);
    fill(valid_idx, split.valid_pos, split.valid_neg);
    return split;
}

inline double score_edge(std::span<const double> a, std::span<const double> b, bool use_cosine = false) {
    return use_cosine ? cosine(a, b) : sigmoid(dot(a, b));
}

// Mann-Whitney estimate with average ranks on ties.
inline double roc_auc(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty() || neg.empty()) throw std::invalid_argument("undefined AUC: empty class");
    std::vector<std::pair<double, int>> all;
    all.reserve(pos.size() + neg.size());
    for (double s : pos) all.emplace_back(s, 1);
    for (double s : neg) all.emplace_back(s, 0);
    std::sort(all.begin(), all.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t t = i; t < j; ++t)
            if (all[t].second) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// Area under precision-recall, stepping right-to-left through unique score
// thresholds: sum of (recall gain) * precision at each threshold.
inline double pr_auc(std::span<const double> pos, std::span<const double> neg) {
    if (pos.empty() || neg.empty()) throw std::invalid_argument("undefined AUC: empty class");
    std::vector<std::pair<double, int>> all;
    all.reserve(pos.size() + neg.size());
    for (double s : pos) all.emplace_back(s, 1);
    for (double s : neg) all.emplace_back(s, 0);
    std::sort(all.begin(), all.end(),
              [](const auto& x, const auto& y) { return x.first > y.first; });
    const double total_pos = static_cast<double>(pos.size());
    double area = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        for (std::size_t t = i; t < j; ++t) (all[t].second ? tp : fp) += 1;
        const double recall = static_cast<double>(tp) / total_pos;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

inline double f1_at(std::span<const double> pos, std::span<const double> neg, double threshold) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (double s : pos) (s >= threshold ? tp : fn) += 1;
    for (double s : neg)
        if (s >= threshold) ++fp;
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

// Threshold chosen on validation scores (ties resolved toward the lower
// threshold), F1 reported on test.
struct F1Result {
    double threshold = 0.0;
    double valid_f1 = 0.0;
    double test_f1 = 0.0;
};

inline F1Result f1_best(std::span<const double> valid_pos, std::span<const double> valid_neg,
                        std::span<const double> test_pos, std::span<const double> test_neg) {
    if (valid_pos.empty() || valid_neg.empty()) throw std::invalid_argument("undefined AUC: empty class");
    std::vector<double> cand(valid_pos.begin(), valid_pos.end());
    cand.insert(cand.end(), valid_neg.begin(), valid_neg.end());
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    F1Result best;
    bool first = true;
    for (double t : cand) {
        const double f1 = f1_at(valid_pos, valid_neg, t);
        if (first || f1 > best.valid_f1) {
            best.threshold = t;
            best.valid_f1 = f1;
            first = false;
        }
    }
    best.test_f1 = f1_at(test_pos, test_neg, best.threshold);
    return best;
}

struct MetricReport {
    double roc_auc = 0.0;
    double pr_auc = 0.0;
    double f1 = 0.0;
    double threshold = 0.0;
    std::size_t test_pos = 0, test_neg = 0, valid_pos = 0, valid_neg = 0;
};

inline MetricReport evaluate(const Matrix& emb, const EdgeSplit& split, bool use_cosine = false) {
    auto scores = [&](const std::vector<EvalPair>& pairs) {
        std::vector<double> out;
        out.reserve(pairs.size());
        for (const EvalPair& p : pairs)
            out.push_back(score_edge(emb.row(p.a), emb.row(p.b), use_cosine));
        return out;
    };
    const std::vector<double> vp = scores(split.valid_pos), vn = scores(split.valid_neg);
    const std::vector<double> tp = scores(split.test_pos), tn = scores(split.test_neg);
    MetricReport r;
    r.roc_auc = roc_auc(tp, tn);
    r.pr_auc = pr_auc(tp, tn);
    const F1Result f1 = f1_best(vp, vn, tp, tn);
    r.f1 = f1.test_f1;
    r.threshold = f1.threshold;
    r.test_pos = tp.size();
    r.test_neg = tn.size();
    r.valid_pos = vp.size();
    r.valid_neg = vn.size();
    return r;
}

// Whitespace-separated multiplex edge lists: "<edge_type> <src> <dst>" with an
// optional trailing 0/1 label (labeled files are typically held-out pairs).
struct MultiplexEdge {
    std::string type;
    std::string a, b;
    int label = 1;
};

inline std::vector<MultiplexEdge> load_multiplex_edges(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<MultiplexEdge> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        MultiplexEdge e;
        std::string label;
        if (!(ss >> e.type >> e.a >> e.b)) throw std::runtime_error("malformed edge line: " + line);
        if (ss >> label) e.label = std::stoi(label);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace epgnn

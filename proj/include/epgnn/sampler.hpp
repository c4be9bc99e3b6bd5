#pragma once

#include <cmath>
#include <vector>

#include "epgnn/graph.hpp"
#include "epgnn/rng.hpp"
#include "epgnn/walker.hpp"

// Hierarchical neighbor sampling: a first-order cache holding ~s1 of each
// adjacency list, re-sampled on the fly per batch at rate s2 with replacement.

namespace epgnn {

struct CacheEntry {
    NodeId neighbor = 0;
    Vec edge_feats;  // u_ij channels of the connecting edge
};

struct NeighborCache {
    std::vector<std::vector<CacheEntry>> entries;  // per node, <= ceil(s1 * degree)

    std::size_t size(NodeId v) const { return entries[v].size(); }
};

struct SampleConfig {
    double s1_fraction = 0.7;
    double s2_fraction = 0.5;
    std::uint64_t rng_seed = 7;
    bool weighted = false;  // bias first-order picks by edge weight

    void validate() const {
        if (!(s1_fraction > 0.0 && s1_fraction <= 1.0)) throw std::invalid_argument("s1 must be in (0,1]");
        if (!(s2_fraction > 0.0 && s2_fraction <= 1.0)) throw std::invalid_argument("s2 must be in (0,1]");
    }
};

inline std::size_t first_order_count(double s1, std::size_t degree) {
    return static_cast<std::size_t>(std::ceil(s1 * static_cast<double>(degree)));
}

inline std::size_t second_order_count(double s2, std::size_t cached) {
    return static_cast<std::size_t>(std::ceil(s2 * static_cast<double>(cached)));
}

// ceil(s1 * d) distinct neighbors per node, uniform without replacement
// (weight-proportional when cfg.weighted). Deterministic per (seed, node).
inline NeighborCache build_neighbor_cache(const Graph& g, const SampleConfig& cfg, std::size_t workers = 1) {
    cfg.validate();
    NeighborCache cache;
    cache.entries.resize(g.node_count());
    detail::parallel_over(g.node_count(), workers, [&](std::size_t lo, std::size_t hi) {
        for (NodeId v = lo; v < hi; ++v) {
            const auto& adj = g.adjacency[v];
            if (adj.empty()) continue;
            const std::size_t want = first_order_count(cfg.s1_fraction, adj.size());
            Rng rng(Rng::mix(cfg.rng_seed, v));
            std::vector<std::size_t> idx(adj.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            if (!cfg.weighted) {
                // partial Fisher-Yates
                for (std::size_t i = 0; i < want; ++i) {
                    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
                    std::swap(idx[i], idx[j]);
                }
            } else {
                // successive weight-proportional draws without replacement
                std::vector<double> w(adj.size());
                for (std::size_t i = 0; i < adj.size(); ++i) w[i] = g.edges[adj[i].edge].weight;
                for (std::size_t i = 0; i < want; ++i) {
                    double total = 0.0;
                    for (std::size_t j = i; j < idx.size(); ++j) total += w[idx[j]];
                    std::size_t pick = i;
                    if (total > 0.0) {
                        double target = rng.next_unit() * total, acc = 0.0;
                        for (std::size_t j = i; j < idx.size(); ++j) {
                            acc += w[idx[j]];
                            pick = j;
                            if (target < acc) break;
                        }
                    } else {
                        pick = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
                    }
                    std::swap(idx[i], idx[pick]);
                }
            }
            auto& out = cache.entries[v];
            out.reserve(want);
            for (std::size_t i = 0; i < want; ++i)
                out.push_back(CacheEntry{adj[idx[i]].neighbor, g.edges[adj[idx[i]].edge].features});
        }
    });
    return cache;
}

// ceil(s2 * |cache[v]|) uniform draws WITH replacement; empty cache -> empty.
inline std::vector<const CacheEntry*> resample(const NeighborCache& cache, NodeId v,
                                               const SampleConfig& cfg, Rng& rng) {
    const auto& stored = cache.entries[v];
    if (stored.empty()) return {};
    const std::size_t want = second_order_count(cfg.s2_fraction, stored.size());
    std::vector<const CacheEntry*> out;
    out.reserve(want);
    for (std::size_t i = 0; i < want; ++i)
        out.push_back(&stored[rng.next_below(stored.size())]);
    return out;
}

}  // namespace epgnn

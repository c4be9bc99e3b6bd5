#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "epgnn/graph.hpp"
#include "epgnn/rng.hpp"

// Metapath-guided random walks and sliding-window training pairs.

namespace epgnn {

struct MetaPath {
    std::vector<NodeKind> pattern;  // cyclic

    // "user,show,user" -> {User, ShowCombo, User}
    static MetaPath parse(const std::string& text) {
        MetaPath mp;
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t comma = text.find(',', start);
            std::string tok = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (tok == "user") {
                mp.pattern.push_back(NodeKind::User);
            } else if (tok == "show" || tok == "combo") {
                mp.pattern.push_back(NodeKind::ShowCombo);
            } else {
                throw std::invalid_argument("unknown metapath kind: '" + tok + "'");
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (mp.pattern.size() < 2) throw std::invalid_argument("metapath needs at least 2 kinds");
        return mp;
    }

    NodeKind at(std::size_t offset, std::size_t step) const {
        return pattern[(offset + step) % pattern.size()];
    }

    bool contains(NodeKind k) const {
        for (NodeKind p : pattern)
            if (p == k) return true;
        return false;
    }
};

struct WalkConfig {
    std::uint32_t length = 10;     // l
    std::uint32_t per_node = 4;    // r
    std::uint32_t window = 2;      // k
    std::uint64_t rng_seed = 1;

    void validate() const {
        if (length < 2) throw std::invalid_argument("walk length must be >= 2");
        if (per_node < 1) throw std::invalid_argument("walks per node must be >= 1");
        if (window < 1 || window >= length) throw std::invalid_argument("window must satisfy 1 <= k < l");
    }
};

struct WalkCorpus {
    std::vector<std::vector<NodeId>> walks;
};

struct TrainingPair {
    NodeId center = 0;
    NodeId context = 0;
    bool operator==(const TrainingPair& o) const { return center == o.center && context == o.context; }
};

struct PairSet {
    std::vector<TrainingPair> pairs;
};

namespace detail {

// next hop: neighbors of the required kind, probability proportional to edge weight
inline bool walk_step(const Graph& g, NodeId from, NodeKind next_kind, Rng& rng, NodeId& out) {
    double total = 0.0;
    for (const AdjEntry& a : g.adjacency[from]) {
        if (g.nodes[a.neighbor].kind == next_kind) total += g.edges[a.edge].weight;
    }
    if (total <= 0.0) return false;
    double target = rng.next_unit() * total;
    double acc = 0.0;
    const AdjEntry* last = nullptr;
    for (const AdjEntry& a : g.adjacency[from]) {
        if (g.nodes[a.neighbor].kind != next_kind) continue;
        const double w = g.edges[a.edge].weight;
        if (w <= 0.0) continue;
        acc += w;
        last = &a;
        if (target < acc) break;
    }
    out = last->neighbor;
    return true;
}

inline std::vector<NodeId> single_walk(const Graph& g, const MetaPath& mp, NodeId start,
                                       std::uint32_t length, Rng& rng) {
    std::size_t offset = 0;
    while (mp.pattern[offset] != g.nodes[start].kind) ++offset;
    std::vector<NodeId> walk{start};
    NodeId cur = start;
    for (std::uint32_t t = 1; t < length; ++t) {
        NodeId next;
        if (!walk_step(g, cur, mp.at(offset, t), rng, next)) break;  // dead end: truncate
        walk.push_back(next);
        cur = next;
    }
    return walk;
}

inline void parallel_over(std::size_t n, std::size_t workers, const std::function<void(std::size_t, std::size_t)>& chunk) {
    if (workers <= 1 || n < 2 * workers) {
        chunk(0, n);
        return;
    }
    std::vector<std::thread> threads;
    const std::size_t per = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * per, hi = std::min(n, lo + per);
        if (lo >= hi) break;
        threads.emplace_back(chunk, lo, hi);
    }
    for (auto& t : threads) t.join();
}

}  // namespace detail

// r walks from every node whose kind occurs in the pattern. Walk w of round
// iter uses an RNG stream derived from (seed, iter, node), so the corpus is
// identical for any worker count. Corpus order: rounds outer, node id inner.
inline WalkCorpus generate_walks(const Graph& g, const MetaPath& mp, const WalkConfig& cfg,
                                 std::size_t workers = 1) {
    cfg.validate();
    if (g.node_count() == 0) throw std::invalid_argument("empty graph");
    for (NodeKind k : mp.pattern) {
        bool present = false;
        for (const Node& n : g.nodes)
            if (n.kind == k) present = true;
        if (!present) throw std::invalid_argument(std::string("metapath kind absent from graph: ") + to_string(k));
    }

    std::vector<NodeId> starts;
    for (const Node& n : g.nodes)
        if (mp.contains(n.kind)) starts.push_back(n.id);

    WalkCorpus corpus;
    corpus.walks.resize(static_cast<std::size_t>(cfg.per_node) * starts.size());
    for (std::uint32_t round = 0; round < cfg.per_node; ++round) {
        detail::parallel_over(starts.size(), workers, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                Rng rng(Rng::mix(cfg.rng_seed, Rng::mix(round, starts[i])));
                corpus.walks[static_cast<std::size_t>(round) * starts.size() + i] =
                    detail::single_walk(g, mp, starts[i], cfg.length, rng);
            }
        });
    }
    return corpus;
}

// Sliding window: every ordered pair within distance k, identical endpoints
// dropped, duplicates kept.
inline PairSet generate_pairs(const WalkCorpus& corpus, std::uint32_t k) {
    if (k < 1) throw std::invalid_argument("window must be >= 1");
    PairSet out;
    for (const auto& walk : corpus.walks) {
        for (std::size_t i = 0; i < walk.size(); ++i) {
            const std::size_t lo = i > k ? i - k : 0;
            const std::size_t hi = std::min(walk.size(), i + k + 1);
            for (std::size_t j = lo; j < hi; ++j) {
                if (j == i || walk[i] == walk[j]) continue;
                out.pairs.push_back(TrainingPair{walk[i], walk[j]});
            }
        }
    }
    return out;
}

}  // namespace epgnn

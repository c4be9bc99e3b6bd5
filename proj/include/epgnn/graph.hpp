#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "epgnn/rng.hpp"
#include "epgnn/vecmath.hpp"

// Heterogeneous user / show-combination graph: build from raw interactions,
// normalize edge feature channels, partition by show category, degree stats.

namespace epgnn {

using NodeId = std::uint64_t;

enum class NodeKind : std::uint8_t { User = 0, ShowCombo = 1 };

enum class EdgeKind : std::uint8_t { UserShow = 0, UserUser = 1, ShowShow = 2 };

inline const char* to_string(NodeKind k) { return k == NodeKind::User ? "user" : "show"; }

inline const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::UserShow: return "user-show";
        case EdgeKind::UserUser: return "user-user";
        default: return "show-show";
    }
}

using Profile = std::map<std::string, std::string>;

struct Node {
    NodeId id = 0;
    NodeKind kind = NodeKind::User;
    std::string external_id;
    Profile profile;       // side-information fields; nonempty for ShowCombo
    Vec raw_features;      // optional embedding init, length m_n or empty
};

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    EdgeKind kind = EdgeKind::UserShow;
    double weight = 0.0;   // walk transition weight
    Vec features;          // interaction channels, normalized to [0,1]
};

struct AdjEntry {
    NodeId neighbor = 0;
    std::uint64_t edge = 0;  // index into Graph::edges
};

struct RawInteraction {
    std::string user_id;
    std::string show_combo_id;
    std::uint64_t click_count = 0;
    std::uint64_t view_time = 0;  // seconds
};

struct GraphConfig {
    std::uint64_t coclick_min = 2;  // min shared combos for a user-user edge
    std::uint64_t degree_cap = 0;   // 0 = uncapped; else keep highest-weight neighbors
};

enum class NormScheme { Log1pMaxNorm, MinMax };

struct Graph {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<std::vector<AdjEntry>> adjacency;  // symmetric, undirected
    std::vector<NodeId> parent_ids;  // original ids when this is a partition
    bool features_normalized = false;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t edge_count() const { return edges.size(); }
    std::size_t degree(NodeId v) const { return adjacency[v].size(); }

    NodeId parent_of(NodeId v) const { return parent_ids.empty() ? v : parent_ids[v]; }

    std::optional<NodeId> find_external(const std::string& ext) const {
        for (const Node& n : nodes)
            if (n.external_id == ext) return n.id;
        return std::nullopt;
    }

    void add_edge(NodeId a, NodeId b, EdgeKind kind, double weight, Vec features) {
        if (a == b) return;  // self-loops dropped
        const std::uint64_t idx = edges.size();
        edges.push_back(Edge{a, b, kind, weight, std::move(features)});
        adjacency[a].push_back(AdjEntry{b, idx});
        adjacency[b].push_back(AdjEntry{a, idx});
    }

    std::vector<NodeId> nodes_of_kind(NodeKind k) const {
        std::vector<NodeId> out;
        for (const Node& n : nodes)
            if (n.kind == k) out.push_back(n.id);
        return out;
    }
};

struct BuildStats {
    std::uint64_t skipped_records = 0;
    std::uint64_t user_show_edges = 0;
    std::uint64_t user_user_edges = 0;
    std::uint64_t show_show_edges = 0;
    std::uint64_t capped_edges = 0;
};

namespace detail {

struct PairKey {
    NodeId a, b;
    bool operator==(const PairKey& o) const { return a == o.a && b == o.b; }
};

struct PairKeyHash {
    std::size_t operator()(const PairKey& k) const {
        return static_cast<std::size_t>(splitmix64(k.a * 0x9ddfea08eb382d69ULL ^ splitmix64(k.b)));
    }
};

// Drop edges past the per-node degree cap: a node over the cap keeps its
// highest-weight incident edges (ties by edge index); an edge survives only if
// every over-cap endpoint keeps it.
inline void apply_degree_cap(Graph& g, std::uint64_t cap, BuildStats& stats) {
    if (cap == 0) return;
    std::vector<char> keep(g.edges.size(), 1);
    for (NodeId v = 0; v < g.node_count(); ++v) {
        auto& adj = g.adjacency[v];
        if (adj.size() <= cap) continue;
        std::vector<std::uint64_t> order(adj.size());
        for (std::size_t i = 0; i < adj.size(); ++i) order[i] = adj[i].edge;
        std::sort(order.begin(), order.end(), [&](std::uint64_t x, std::uint64_t y) {
            if (g.edges[x].weight != g.edges[y].weight) return g.edges[x].weight > g.edges[y].weight;
            return x < y;
        });
        for (std::size_t i = cap; i < order.size(); ++i) keep[order[i]] = 0;
    }
    std::vector<Edge> kept;
    kept.reserve(g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        if (keep[i]) {
            kept.push_back(std::move(g.edges[i]));
        } else {
            ++stats.capped_edges;
        }
    }
    g.edges.clear();
    for (auto& a : g.adjacency) a.clear();
    for (auto& e : kept) g.add_edge(e.src, e.dst, e.kind, e.weight, std::move(e.features));
}

}  // namespace detail

// Aggregates the interaction stream into the typed graph. Edge features are
// raw channel values here; call normalize_edge_features before walking or
// training. User-show walk weights are finalized by normalization.
inline Graph build_graph(const std::vector<RawInteraction>& interactions,
                         const std::unordered_map<std::string, std::string>& show_type_map,
                         const std::unordered_map<std::string, Profile>& combo_profiles,
                         const GraphConfig& config, BuildStats* stats_out = nullptr) {
    BuildStats stats;
    Graph g;

    std::unordered_map<std::string, NodeId> user_ids;
    std::unordered_map<std::string, NodeId> combo_ids;

    // aggregate (user, combo) -> clicks, view seconds
    struct Agg {
        NodeId user, combo;
        double clicks = 0, view = 0;
    };
    std::unordered_map<detail::PairKey, std::size_t, detail::PairKeyHash> agg_index;
    std::vector<Agg> aggs;
    std::vector<std::string> user_order, combo_order;

    for (const RawInteraction& r : interactions) {
        if (r.user_id.empty() || r.show_combo_id.empty() || (r.click_count == 0 && r.view_time == 0)) {
            ++stats.skipped_records;
            continue;
        }
        auto [uit, unew] = user_ids.try_emplace(r.user_id, user_ids.size());
        if (unew) user_order.push_back(r.user_id);
        auto [cit, cnew] = combo_ids.try_emplace(r.show_combo_id, combo_ids.size());
        if (cnew) combo_order.push_back(r.show_combo_id);
        detail::PairKey key{uit->second, cit->second};
        auto [ait, anew] = agg_index.try_emplace(key, aggs.size());
        if (anew) aggs.push_back(Agg{uit->second, cit->second});
        Agg& a = aggs[ait->second];
        a.clicks += static_cast<double>(r.click_count);
        a.view += static_cast<double>(r.view_time);
    }
    // combos known only from side information still enter the graph
    {
        std::vector<std::string> extra;
        for (const auto& [ext, profile] : combo_profiles) {
            (void)profile;
            if (!combo_ids.count(ext)) extra.push_back(ext);
        }
        std::sort(extra.begin(), extra.end());
        for (const std::string& ext : extra) {
            combo_ids.emplace(ext, combo_ids.size());
            combo_order.push_back(ext);
        }
    }
    if (user_ids.empty() && combo_ids.empty()) throw std::runtime_error("empty graph");

    const NodeId user_count = user_ids.size();
    g.nodes.reserve(user_count + combo_ids.size());
    for (NodeId i = 0; i < user_count; ++i)
        g.nodes.push_back(Node{i, NodeKind::User, user_order[i], {}, {}});
    for (NodeId i = 0; i < combo_order.size(); ++i) {
        Node n{user_count + i, NodeKind::ShowCombo, combo_order[i], {}, {}};
        if (auto it = combo_profiles.find(combo_order[i]); it != combo_profiles.end()) n.profile = it->second;
        g.nodes.push_back(std::move(n));
    }
    g.adjacency.resize(g.nodes.size());

    // user-show edges, channels = (clicks, view seconds)
    for (const Agg& a : aggs) {
        g.add_edge(a.user, user_count + a.combo, EdgeKind::UserShow, a.clicks + a.view,
                   Vec{a.clicks, a.view});
        ++stats.user_show_edges;
    }

    // user-user co-click edges: weight = number of shared combos
    {
        std::vector<std::vector<NodeId>> combo_users(combo_order.size());
        for (const Agg& a : aggs) combo_users[a.combo].push_back(a.user);
        std::unordered_map<detail::PairKey, std::uint64_t, detail::PairKeyHash> shared;
        for (auto& users : combo_users) {
            std::sort(users.begin(), users.end());
            for (std::size_t i = 0; i < users.size(); ++i)
                for (std::size_t j = i + 1; j < users.size(); ++j)
                    ++shared[detail::PairKey{users[i], users[j]}];
        }
        std::vector<std::pair<detail::PairKey, std::uint64_t>> ordered(shared.begin(), shared.end());
        std::sort(ordered.begin(), ordered.end(), [](const auto& x, const auto& y) {
            return x.first.a != y.first.a ? x.first.a < y.first.a : x.first.b < y.first.b;
        });
        for (const auto& [key, count] : ordered) {
            if (count < config.coclick_min) continue;
            g.add_edge(key.a, key.b, EdgeKind::UserUser, static_cast<double>(count),
                       Vec{static_cast<double>(count), 0.0});
            ++stats.user_user_edges;
        }
    }

    // show-show edges between combos of the same type, weight 1
    {
        std::map<std::string, std::vector<NodeId>> by_type;
        for (NodeId i = 0; i < combo_order.size(); ++i) {
            if (auto it = show_type_map.find(combo_order[i]); it != show_type_map.end())
                by_type[it->second].push_back(user_count + i);
        }
        for (const auto& [type, members] : by_type) {
            (void)type;
            for (std::size_t i = 0; i < members.size(); ++i)
                for (std::size_t j = i + 1; j < members.size(); ++j) {
                    g.add_edge(members[i], members[j], EdgeKind::ShowShow, 1.0, Vec{1.0, 0.0});
                    ++stats.show_show_edges;
                }
        }
    }

    detail::apply_degree_cap(g, config.degree_cap, stats);
    if (stats_out) *stats_out = stats;
    return g;
}

// Per edge kind and per channel. log1p-maxnorm: x -> log1p(x)/max(log1p(x));
// minmax: x -> (x-min)/(max-min). Constant channels become 0 (all-zero stays
// all-zero). User-show walk weights become normalized click + normalized view.
// A second call is a no-op: the graph records that it has been normalized.
inline Graph& normalize_edge_features(Graph& g, NormScheme scheme = NormScheme::Log1pMaxNorm) {
    if (g.features_normalized) return g;
    std::size_t channels = 0;
    for (const Edge& e : g.edges) channels = std::max(channels, e.features.size());
    for (std::size_t k = 0; k < channels; ++k) {
        for (EdgeKind kind : {EdgeKind::UserShow, EdgeKind::UserUser, EdgeKind::ShowShow}) {
            double hi = 0.0, lo = std::numeric_limits<double>::infinity();
            bool any = false;
            for (const Edge& e : g.edges) {
                if (e.kind != kind || k >= e.features.size()) continue;
                const double v = scheme == NormScheme::Log1pMaxNorm ? std::log1p(e.features[k]) : e.features[k];
                hi = std::max(hi, v);
                lo = std::min(lo, v);
                any = true;
            }
            if (!any) continue;
            for (Edge& e : g.edges) {
                if (e.kind != kind || k >= e.features.size()) continue;
                double& x = e.features[k];
                if (scheme == NormScheme::Log1pMaxNorm) {
                    x = hi > 0.0 ? std::log1p(x) / hi : 0.0;
                } else {
                    x = hi > lo ? (x - lo) / (hi - lo) : 0.0;
                }
            }
        }
    }
    for (Edge& e : g.edges) {
        if (e.kind == EdgeKind::UserShow) {
            double w = 0.0;
            for (double f : e.features) w += f;
            e.weight = w;
        }
    }
    g.features_normalized = true;
    return g;
}

struct PartitionStats {
    std::uint64_t dropped_cross_edges = 0;
    std::uint64_t missing_category = 0;
};

// Cut the graph along show categories into `parts` buckets. Show-show and
// user-show edges crossing buckets are dropped. A user-user edge lands in the
// smallest bucket where both users keep a user-show edge, else it is dropped
// as cross-bucket, so every original edge appears in at most one partition.
// Users are replicated into every bucket where they retain at least one edge.
inline std::vector<Graph> partition_by_category(const Graph& g,
                                                const std::unordered_map<NodeId, std::string>& category_of,
                                                std::size_t parts,
                                                PartitionStats* stats_out = nullptr) {
    if (parts < 1) throw std::invalid_argument("parts must be >= 1");
    PartitionStats stats;

    // category -> bucket: one bucket per category when they fit, else hashed
    std::vector<std::string> cats;
    for (const auto& [node, cat] : category_of) {
        (void)node;
        cats.push_back(cat);
    }
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    std::unordered_map<std::string, std::size_t> cat_bucket;
    for (std::size_t i = 0; i < cats.size(); ++i) {
        cat_bucket[cats[i]] =
            cats.size() <= parts ? i : static_cast<std::size_t>(splitmix64(fnv1a64(cats[i])) % parts);
    }

    std::vector<std::size_t> bucket_of(g.node_count(), 0);
    for (const Node& n : g.nodes) {
        if (n.kind != NodeKind::ShowCombo) continue;
        auto it = category_of.find(n.id);
        if (it == category_of.end()) {
            ++stats.missing_category;
            bucket_of[n.id] = 0;
        } else {
            bucket_of[n.id] = cat_bucket[it->second];
        }
    }

    // user -> buckets where it has a user-show edge
    std::vector<std::unordered_set<std::size_t>> user_show_buckets(g.node_count());
    for (const Edge& e : g.edges) {
        if (e.kind != EdgeKind::UserShow) continue;
        const NodeId user = g.nodes[e.src].kind == NodeKind::User ? e.src : e.dst;
        const NodeId combo = g.nodes[e.src].kind == NodeKind::User ? e.dst : e.src;
        user_show_buckets[user].insert(bucket_of[combo]);
    }

    // each edge goes to exactly one bucket, or is dropped
    std::vector<std::vector<std::uint64_t>> bucket_edges(parts);
    for (std::uint64_t i = 0; i < g.edges.size(); ++i) {
        const Edge& e = g.edges[i];
        switch (e.kind) {
            case EdgeKind::ShowShow:
                if (bucket_of[e.src] == bucket_of[e.dst]) {
                    bucket_edges[bucket_of[e.src]].push_back(i);
                } else {
                    ++stats.dropped_cross_edges;
                }
                break;
            case EdgeKind::UserShow: {
                const NodeId combo = g.nodes[e.src].kind == NodeKind::ShowCombo ? e.src : e.dst;
                bucket_edges[bucket_of[combo]].push_back(i);
                break;
            }
            case EdgeKind::UserUser: {
                std::size_t chosen = parts;
                for (std::size_t b = 0; b < parts; ++b) {
                    if (user_show_buckets[e.src].count(b) && user_show_buckets[e.dst].count(b)) {
                        chosen = b;
                        break;
                    }
                }
                if (chosen < parts) {
                    bucket_edges[chosen].push_back(i);
                } else {
                    ++stats.dropped_cross_edges;
                }
                break;
            }
        }
    }

    std::vector<Graph> out(parts);
    for (std::size_t b = 0; b < parts; ++b) {
        Graph& sub = out[b];
        sub.features_normalized = g.features_normalized;
        std::unordered_map<NodeId, NodeId> local;
        auto local_id = [&](NodeId parent) {
            auto it = local.find(parent);
            if (it != local.end()) return it->second;
            NodeId id = sub.nodes.size();
            Node n = g.nodes[parent];
            n.id = id;
            sub.nodes.push_back(std::move(n));
            sub.adjacency.emplace_back();
            sub.parent_ids.push_back(g.parent_of(parent));
            local.emplace(parent, id);
            return id;
        };
        // combos of this bucket first, in parent order
        for (const Node& n : g.nodes)
            if (n.kind == NodeKind::ShowCombo && bucket_of[n.id] == b) local_id(n.id);
        for (std::uint64_t ei : bucket_edges[b]) {
            const Edge& e = g.edges[ei];
            sub.add_edge(local_id(e.src), local_id(e.dst), e.kind, e.weight, e.features);
        }
    }
    if (stats_out) *stats_out = stats;
    return out;
}

// Fraction of nodes (restricted to the endpoint kinds of `kind`) whose degree
// in edges of that kind strictly exceeds each threshold.
inline std::vector<double> degree_distribution(const Graph& g, EdgeKind kind,
                                               const std::vector<std::uint64_t>& thresholds) {
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i] > thresholds[i - 1]) throw std::invalid_argument("thresholds must be descending");
    std::vector<std::uint64_t> deg(g.node_count(), 0);
    for (const Edge& e : g.edges) {
        if (e.kind != kind) continue;
        ++deg[e.src];
        ++deg[e.dst];
    }
    std::vector<NodeId> pool;
    for (const Node& n : g.nodes) {
        const bool included = kind == EdgeKind::UserShow ||
                              (kind == EdgeKind::UserUser && n.kind == NodeKind::User) ||
                              (kind == EdgeKind::ShowShow && n.kind == NodeKind::ShowCombo);
        if (included) pool.push_back(n.id);
    }
    std::vector<double> out;
    out.reserve(thresholds.size());
    for (std::uint64_t t : thresholds) {
        std::uint64_t over = 0;
        for (NodeId v : pool)
            if (deg[v] > t) ++over;
        out.push_back(pool.empty() ? 0.0 : static_cast<double>(over) / static_cast<double>(pool.size()));
    }
    return out;
}

}  // namespace epgnn

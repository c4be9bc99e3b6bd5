#pragma once

// Deterministic fixtures shared across the test binaries: hand-built graphs,
// a two-community interaction stream, and Gaussian point clouds.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "epgnn/epgnn.hpp"

namespace fixtures {

using namespace epgnn;

// u user nodes then c combo nodes, no edges; features count as normalized
inline Graph make_graph(std::size_t users, std::size_t combos) {
    Graph g;
    for (std::size_t i = 0; i < users; ++i)
        g.nodes.push_back(Node{i, NodeKind::User, "u" + std::to_string(i), {}, {}});
    for (std::size_t i = 0; i < combos; ++i)
        g.nodes.push_back(
            Node{users + i, NodeKind::ShowCombo, "s" + std::to_string(i), Profile{{"type", "t"}}, {}});
    g.adjacency.resize(g.nodes.size());
    g.features_normalized = true;
    return g;
}

// random user-show graph with 2-channel edge features in (0,1); every user
// and every combo keeps at least one edge
inline Graph random_bipartite(std::size_t users, std::size_t combos, double p, std::uint64_t seed) {
    Graph g = make_graph(users, combos);
    Rng rng(Rng::mix(seed, 0xf1c));
    auto connect = [&](NodeId u, NodeId c) {
        Vec f{rng.next_uniform(0.05, 1.0), rng.next_uniform(0.05, 1.0)};
        const double w = f[0] + f[1];
        g.add_edge(u, c, EdgeKind::UserShow, w, std::move(f));
    };
    for (std::size_t u = 0; u < users; ++u) {
        bool any = false;
        for (std::size_t c = 0; c < combos; ++c) {
            if (rng.next_unit() < p) {
                connect(u, users + c);
                any = true;
            }
        }
        if (!any) connect(u, users + u % combos);
    }
    for (std::size_t c = 0; c < combos; ++c)
        if (g.degree(users + c) == 0) connect(c % users, users + c);
    return g;
}

// Interaction stream over two user/combo communities. Within-community
// interactions are dense, cross-community ones rare, so the resulting graph
// carries structure an embedding can learn.
struct PlantedStream {
    std::vector<RawInteraction> interactions;
    std::unordered_map<std::string, std::string> types;
    std::unordered_map<std::string, Profile> profiles;
    std::size_t users_per_side = 0;
    std::size_t combos_per_side = 0;
};

inline PlantedStream planted_stream(std::size_t users_per_side, std::size_t combos_per_side,
                                    std::uint64_t seed, double p_in = 0.3, double p_out = 0.02) {
    PlantedStream s;
    s.users_per_side = users_per_side;
    s.combos_per_side = combos_per_side;
    Rng rng(Rng::mix(seed, 0x9a37ed));
    auto combo_ext = [](int side, std::size_t j) {
        return "s" + std::to_string(side) + "_" + std::to_string(j);
    };
    for (int side = 0; side < 2; ++side)
        for (std::size_t j = 0; j < combos_per_side; ++j) {
            const std::string id = combo_ext(side, j);
            s.types[id] = side == 0 ? "drama" : "sports";
            s.profiles[id] = Profile{{"type", s.types[id]}, {"main_genre", "g" + std::to_string(j % 5)}};
        }
    std::unordered_set<std::string> clicked;
    for (int side = 0; side < 2; ++side) {
        for (std::size_t i = 0; i < users_per_side; ++i) {
            const std::string user = "u" + std::to_string(side) + "_" + std::to_string(i);
            bool any = false;
            for (int cs = 0; cs < 2; ++cs) {
                const double p = cs == side ? p_in : p_out;
                for (std::size_t j = 0; j < combos_per_side; ++j) {
                    if (rng.next_unit() >= p) continue;
                    s.interactions.push_back(RawInteraction{user, combo_ext(cs, j),
                                                            1 + rng.next_below(4),
                                                            20 + rng.next_below(400)});
                    clicked.insert(s.interactions.back().show_combo_id);
                    any = true;
                }
            }
            if (!any) {
                s.interactions.push_back(
                    RawInteraction{user, combo_ext(side, i % combos_per_side), 1, 60});
                clicked.insert(s.interactions.back().show_combo_id);
            }
        }
    }
    for (int side = 0; side < 2; ++side)
        for (std::size_t j = 0; j < combos_per_side; ++j)
            if (!clicked.count(combo_ext(side, j)))
                s.interactions.push_back(
                    RawInteraction{"u" + std::to_string(side) + "_0", combo_ext(side, j), 1, 45});
    return s;
}

struct PlantedGraph {
    Graph g;
    std::vector<NodeId> users, combos;
    std::vector<int> side_of;  // by node id
};

inline PlantedGraph planted_graph(std::size_t users_per_side, std::size_t combos_per_side,
                                  std::uint64_t seed, double p_in = 0.3, double p_out = 0.02,
                                  std::uint64_t coclick_min = 3) {
    const PlantedStream s = planted_stream(users_per_side, combos_per_side, seed, p_in, p_out);
    GraphConfig gc;
    gc.coclick_min = coclick_min;
    PlantedGraph out;
    out.g = build_graph(s.interactions, s.types, s.profiles, gc);
    normalize_edge_features(out.g);
    out.side_of.assign(out.g.node_count(), 0);
    for (const Node& n : out.g.nodes) {
        (n.kind == NodeKind::User ? out.users : out.combos).push_back(n.id);
        out.side_of[n.id] = n.external_id[1] == '0' ? 0 : 1;
    }
    return out;
}

// n points around `centers` well-separated means; row index doubles as NodeId
struct PointCloud {
    Matrix points;
    std::vector<NodeId> ids;
    std::vector<std::uint32_t> center_of;
};

inline PointCloud gaussian_mixture(std::size_t n, std::size_t dim, std::size_t centers,
                                   double separation, double spread, std::uint64_t seed) {
    PointCloud pc;
    pc.points = Matrix(n, dim);
    Rng rng(Rng::mix(seed, 0x90a0551a));
    Matrix mu(centers, dim);
    mu.fill_uniform(rng, -separation, separation);
    auto gauss = [&]() {
        double s = 0.0;
        for (int k = 0; k < 12; ++k) s += rng.next_unit();
        return s - 6.0;
    };
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t c = static_cast<std::uint32_t>(i % centers);
        for (std::size_t d = 0; d < dim; ++d) pc.points(i, d) = mu(c, d) + spread * gauss();
        pc.ids.push_back(i);
        pc.center_of.push_back(c);
    }
    return pc;
}

}  // namespace fixtures

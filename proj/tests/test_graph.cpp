#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

#include "epgnn/graph.hpp"
#include "support/fixtures.hpp"

using namespace epgnn;
using Catch::Approx;

namespace {

RawInteraction ri(std::string u, std::string c, std::uint64_t clicks, std::uint64_t view) {
    return RawInteraction{std::move(u), std::move(c), clicks, view};
}

const Edge* find_edge(const Graph& g, const std::string& ea, const std::string& eb) {
    for (const Edge& e : g.edges) {
        const std::string& sa = g.nodes[e.src].external_id;
        const std::string& sb = g.nodes[e.dst].external_id;
        if ((sa == ea && sb == eb) || (sa == eb && sb == ea)) return &e;
    }
    return nullptr;
}

std::size_t count_kind(const Graph& g, EdgeKind k) {
    std::size_t n = 0;
    for (const Edge& e : g.edges)
        if (e.kind == k) ++n;
    return n;
}

}  // namespace

TEST_CASE("two users sharing one combo produce the smallest co-click graph") {
    GraphConfig cfg;
    cfg.coclick_min = 1;
    const Graph g = build_graph({ri("a", "x", 1, 0), ri("b", "x", 2, 0)}, {}, {}, cfg);
    REQUIRE(g.node_count() == 3);
    CHECK(g.nodes_of_kind(NodeKind::User).size() == 2);
    CHECK(g.nodes_of_kind(NodeKind::ShowCombo).size() == 1);
    CHECK(count_kind(g, EdgeKind::UserShow) == 2);
    CHECK(count_kind(g, EdgeKind::UserUser) == 1);
    const Edge* uu = find_edge(g, "a", "b");
    REQUIRE(uu != nullptr);
    CHECK(uu->kind == EdgeKind::UserUser);
    CHECK(uu->weight == 1.0);
}

TEST_CASE("a single interaction carries raw click and view channels") {
    const Graph g = build_graph({ri("a", "x", 3, 600)}, {}, {}, {});
    REQUIRE(g.edge_count() == 1);
    CHECK(g.edges[0].kind == EdgeKind::UserShow);
    REQUIRE(g.edges[0].features.size() == 2);
    CHECK(g.edges[0].features[0] == 3.0);
    CHECK(g.edges[0].features[1] == 600.0);
}

TEST_CASE("repeated interactions aggregate into one edge per pair") {
    const Graph g = build_graph({ri("a", "x", 1, 100), ri("a", "x", 2, 50), ri("a", "x", 0, 7)}, {}, {}, {});
    REQUIRE(g.edge_count() == 1);
    CHECK(g.edges[0].features[0] == 3.0);
    CHECK(g.edges[0].features[1] == 157.0);
}

TEST_CASE("malformed records are skipped and counted") {
    BuildStats stats;
    const Graph g = build_graph({ri("a", "x", 1, 1), ri("", "x", 5, 5), ri("b", "", 5, 5), ri("c", "x", 0, 0)},
                                {}, {}, {}, &stats);
    CHECK(stats.skipped_records == 3);
    CHECK(g.nodes_of_kind(NodeKind::User).size() == 1);
}

TEST_CASE("an empty interaction stream is an error") {
    CHECK_THROWS_WITH(build_graph({}, {}, {}, {}), "empty graph");
}

TEST_CASE("combos known only from side information become isolated nodes") {
    std::unordered_map<std::string, Profile> profiles{{"ghost", Profile{{"type", "t"}}}};
    const Graph g = build_graph({ri("a", "x", 1, 0)}, {}, profiles, {});
    const auto id = g.find_external("ghost");
    REQUIRE(id.has_value());
    CHECK(g.nodes[*id].kind == NodeKind::ShowCombo);
    CHECK(g.degree(*id) == 0);
    CHECK(g.nodes[*id].profile.at("type") == "t");
}

TEST_CASE("a 10k interaction stream matches a hash-map aggregation oracle") {
    Rng rng(Rng::mix(99, 0x10c));
    std::vector<RawInteraction> stream;
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> oracle;
    std::set<std::string> users, combos;
    std::uint64_t skipped = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string u = "u" + std::to_string(rng.next_below(50));
        std::string c = "c" + std::to_string(rng.next_below(30));
        std::uint64_t clicks = rng.next_below(5);
        std::uint64_t view = rng.next_below(4) == 0 ? 0 : rng.next_below(600);
        if (rng.next_below(50) == 0) u.clear();
        stream.push_back(ri(u, c, clicks, view));
        if (u.empty() || c.empty() || (clicks == 0 && view == 0)) {
            ++skipped;
            continue;
        }
        auto& agg = oracle[{u, c}];
        agg.first += static_cast<double>(clicks);
        agg.second += static_cast<double>(view);
        users.insert(u);
        combos.insert(c);
    }

    std::unordered_map<std::string, std::string> types;
    for (const std::string& c : combos) types[c] = "t" + std::to_string(c.size() % 3);

    GraphConfig cfg;
    cfg.coclick_min = 2;
    BuildStats stats;
    const Graph g = build_graph(stream, types, {}, cfg, &stats);

    CHECK(stats.skipped_records == skipped);
    CHECK(g.nodes_of_kind(NodeKind::User).size() == users.size());
    CHECK(g.nodes_of_kind(NodeKind::ShowCombo).size() == combos.size());
    CHECK(count_kind(g, EdgeKind::UserShow) == oracle.size());

    for (const Edge& e : g.edges) {
        if (e.kind != EdgeKind::UserShow) continue;
        const Node& a = g.nodes[e.src];
        const Node& b = g.nodes[e.dst];
        const Node& user = a.kind == NodeKind::User ? a : b;
        const Node& combo = a.kind == NodeKind::User ? b : a;
        const auto it = oracle.find({user.external_id, combo.external_id});
        REQUIRE(it != oracle.end());
        CHECK(e.features[0] == it->second.first);
        CHECK(e.features[1] == it->second.second);
        CHECK(e.weight == it->second.first + it->second.second);
    }

    // user-user edges: shared-combo counts from the oracle
    std::map<std::string, std::set<std::string>> combos_of;
    for (const auto& [key, agg] : oracle) combos_of[key.first].insert(key.second);
    std::size_t expect_uu = 0;
    for (auto a = combos_of.begin(); a != combos_of.end(); ++a)
        for (auto b = std::next(a); b != combos_of.end(); ++b) {
            std::size_t shared = 0;
            for (const std::string& c : a->second) shared += b->second.count(c);
            if (shared >= cfg.coclick_min) ++expect_uu;
        }
    CHECK(count_kind(g, EdgeKind::UserUser) == expect_uu);
    for (const Edge& e : g.edges) {
        if (e.kind != EdgeKind::UserUser) continue;
        const auto& ca = combos_of[g.nodes[e.src].external_id];
        const auto& cb = combos_of[g.nodes[e.dst].external_id];
        std::size_t shared = 0;
        for (const std::string& c : ca) shared += cb.count(c);
        CHECK(e.weight == static_cast<double>(shared));
    }

    // show-show edges: same-type pairs
    std::map<std::string, std::size_t> per_type;
    for (const std::string& c : combos) ++per_type[types[c]];
    std::size_t expect_ss = 0;
    for (const auto& [t, n] : per_type) expect_ss += n * (n - 1) / 2;
    CHECK(count_kind(g, EdgeKind::ShowShow) == expect_ss);
}

TEST_CASE("log1p-maxnorm maps channel endpoints to 0 and 1") {
    Graph g = build_graph({ri("a", "x", 0, 10), ri("b", "x", 2, 20)}, {}, {}, {});
    // plant {0, e-1} in channel 0 so log1p hits exactly {0, 1}
    g.edges[0].features[0] = 0.0;
    g.edges[1].features[0] = std::expm1(1.0);
    normalize_edge_features(g);
    CHECK(g.edges[0].features[0] == 0.0);
    CHECK(g.edges[1].features[0] == Approx(1.0).margin(1e-12));
}

TEST_CASE("a single edge normalizes its positive channels to 1") {
    Graph g = build_graph({ri("a", "x", 3, 600)}, {}, {}, {});
    normalize_edge_features(g);
    CHECK(g.edges[0].features[0] == Approx(1.0).margin(1e-15));
    CHECK(g.edges[0].features[1] == Approx(1.0).margin(1e-15));
    CHECK(g.edges[0].weight == Approx(2.0).margin(1e-12));
}

TEST_CASE("log1p-maxnorm of {1,3,7} matches the hand computation") {
    Graph g = build_graph({ri("a", "x", 1, 10), ri("b", "x", 3, 10), ri("c", "x", 7, 10)}, {}, {}, {});
    normalize_edge_features(g);
    const double den = std::log(8.0);
    CHECK(g.edges[0].features[0] == Approx(std::log(2.0) / den).margin(1e-12));
    CHECK(g.edges[1].features[0] == Approx(std::log(4.0) / den).margin(1e-12));
    CHECK(g.edges[2].features[0] == Approx(1.0).margin(1e-12));
}

TEST_CASE("minmax normalization of {1,3,7} spans 0 to 1") {
    Graph g = build_graph({ri("a", "x", 1, 10), ri("b", "x", 3, 10), ri("c", "x", 7, 10)}, {}, {}, {});
    normalize_edge_features(g, NormScheme::MinMax);
    CHECK(g.edges[0].features[0] == Approx(0.0).margin(1e-12));
    CHECK(g.edges[1].features[0] == Approx(1.0 / 3.0).margin(1e-12));
    CHECK(g.edges[2].features[0] == Approx(1.0).margin(1e-12));
}

TEST_CASE("an all-zero channel stays all zero under either scheme") {
    for (NormScheme scheme : {NormScheme::Log1pMaxNorm, NormScheme::MinMax}) {
        Graph g = build_graph({ri("a", "x", 0, 10), ri("b", "x", 0, 20)}, {}, {}, {});
        normalize_edge_features(g, scheme);
        CHECK(g.edges[0].features[0] == 0.0);
        CHECK(g.edges[1].features[0] == 0.0);
    }
}

TEST_CASE("normalization is idempotent") {
    fixtures::PlantedGraph pg = fixtures::planted_graph(20, 8, 5);
    std::vector<Vec> before;
    for (const Edge& e : pg.g.edges) before.push_back(e.features);
    normalize_edge_features(pg.g);
    for (std::size_t i = 0; i < pg.g.edges.size(); ++i)
        for (std::size_t k = 0; k < before[i].size(); ++k)
            CHECK(pg.g.edges[i].features[k] == Approx(before[i][k]).margin(1e-12));
}

TEST_CASE("every normalized channel lies in the unit interval") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(30, 10, 6);
    for (const Edge& e : pg.g.edges)
        for (double f : e.features) {
            CHECK(f >= 0.0);
            CHECK(f <= 1.0);
        }
}

TEST_CASE("adjacency is symmetric and kinds obey the edge typing") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(30, 10, 7);
    const Graph& g = pg.g;
    for (std::uint64_t i = 0; i < g.edges.size(); ++i) {
        const Edge& e = g.edges[i];
        CHECK(e.src != e.dst);
        auto has = [&](NodeId from, NodeId to) {
            for (const AdjEntry& a : g.adjacency[from])
                if (a.neighbor == to && a.edge == i) return true;
            return false;
        };
        CHECK(has(e.src, e.dst));
        CHECK(has(e.dst, e.src));
        const NodeKind ks = g.nodes[e.src].kind;
        const NodeKind kd = g.nodes[e.dst].kind;
        switch (e.kind) {
            case EdgeKind::UserShow: CHECK(ks != kd); break;
            case EdgeKind::UserUser:
                CHECK(ks == NodeKind::User);
                CHECK(kd == NodeKind::User);
                break;
            case EdgeKind::ShowShow:
                CHECK(ks == NodeKind::ShowCombo);
                CHECK(kd == NodeKind::ShowCombo);
                break;
        }
    }
}

TEST_CASE("degree cap keeps the highest-weight edges of an over-cap node") {
    // one user clicking 5 combos with distinct weights, cap 3
    std::vector<RawInteraction> stream;
    for (int c = 0; c < 5; ++c) stream.push_back(ri("a", "c" + std::to_string(c), 1 + c, 0));
    GraphConfig cfg;
    cfg.degree_cap = 3;
    BuildStats stats;
    const Graph g = build_graph(stream, {}, {}, cfg, &stats);
    const auto a = g.find_external("a");
    REQUIRE(a.has_value());
    CHECK(g.degree(*a) == 3);
    CHECK(stats.capped_edges == 2);
    std::set<std::string> kept;
    for (const AdjEntry& adj : g.adjacency[*a]) kept.insert(g.nodes[adj.neighbor].external_id);
    CHECK(kept == std::set<std::string>{"c2", "c3", "c4"});
}

TEST_CASE("parts=1 partitions to a single identical graph") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(20, 8, 8);
    std::unordered_map<NodeId, std::string> cat;
    for (NodeId c : pg.combos) cat[c] = pg.g.nodes[c].profile.at("type");
    const std::vector<Graph> parts = partition_by_category(pg.g, cat, 1);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].edge_count() == pg.g.edge_count());
    // every original node with an edge survives with its adjacency intact
    for (const Edge& e : parts[0].edges) {
        const NodeId ps = parts[0].parent_of(e.src);
        const NodeId pd = parts[0].parent_of(e.dst);
        CHECK(find_edge(pg.g, pg.g.nodes[ps].external_id, pg.g.nodes[pd].external_id) != nullptr);
    }
}

TEST_CASE("two categories with no cross edges split cleanly into two parts") {
    // two disjoint communities with no cross-community interactions at all
    const fixtures::PlantedGraph pg = fixtures::planted_graph(20, 8, 9, 0.4, 0.0);
    std::unordered_map<NodeId, std::string> cat;
    for (NodeId c : pg.combos) cat[c] = pg.g.nodes[c].profile.at("type");
    PartitionStats stats;
    const std::vector<Graph> parts = partition_by_category(pg.g, cat, 2, &stats);
    REQUIRE(parts.size() == 2);
    CHECK(stats.dropped_cross_edges == 0);
    CHECK(parts[0].edge_count() + parts[1].edge_count() == pg.g.edge_count());
}

TEST_CASE("a three-way partition conserves edges as intra plus dropped") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(40, 12, 10, 0.3, 0.1);
    std::unordered_map<NodeId, std::string> cat;
    for (NodeId c : pg.combos) cat[c] = "cat" + std::to_string(c % 3);
    PartitionStats stats;
    const std::vector<Graph> parts = partition_by_category(pg.g, cat, 3, &stats);

    // set-algebra oracle over parent-id edge keys
    auto key = [](NodeId a, NodeId b, EdgeKind k) {
        const NodeId lo = std::min(a, b), hi = std::max(a, b);
        return std::make_tuple(lo, hi, static_cast<int>(k));
    };
    std::multiset<std::tuple<NodeId, NodeId, int>> original, partitioned;
    for (const Edge& e : pg.g.edges) original.insert(key(e.src, e.dst, e.kind));
    std::size_t intra = 0;
    for (const Graph& sub : parts) {
        intra += sub.edge_count();
        for (const Edge& e : sub.edges)
            partitioned.insert(key(sub.parent_of(e.src), sub.parent_of(e.dst), e.kind));
    }
    CHECK(intra + stats.dropped_cross_edges == pg.g.edge_count());
    // partition edges are a sub-multiset of the original edges
    for (const auto& k : partitioned) CHECK(original.count(k) >= partitioned.count(k));
    CHECK(partitioned.size() == original.size() - stats.dropped_cross_edges);

    // users are replicated only where they keep an edge
    for (const Graph& sub : parts)
        for (const Node& n : sub.nodes)
            if (n.kind == NodeKind::User) CHECK(sub.degree(n.id) >= 1);
}

TEST_CASE("one user over threshold 20 among four users gives fraction 0.25") {
    Graph g = fixtures::make_graph(4, 0);
    // degrees {21, 7, 7, 7}: parallel co-click edges are fine for counting
    for (int r = 0; r < 7; ++r)
        for (NodeId other : {1, 2, 3}) g.add_edge(0, other, EdgeKind::UserUser, 1.0, Vec{1.0, 0.0});
    const std::vector<double> frac = degree_distribution(g, EdgeKind::UserUser, {20});
    REQUIRE(frac.size() == 1);
    CHECK(frac[0] == 0.25);
}

TEST_CASE("degree distribution matches a counting oracle on a random graph") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(30, 10, 11);
    for (EdgeKind kind : {EdgeKind::UserShow, EdgeKind::UserUser, EdgeKind::ShowShow}) {
        const std::vector<std::uint64_t> thresholds{10, 5, 1, 0};
        const std::vector<double> got = degree_distribution(pg.g, kind, thresholds);
        std::unordered_map<NodeId, std::uint64_t> deg;
        for (const Edge& e : pg.g.edges) {
            if (e.kind != kind) continue;
            ++deg[e.src];
            ++deg[e.dst];
        }
        std::vector<NodeId> pool;
        for (const Node& n : pg.g.nodes) {
            if (kind == EdgeKind::UserShow || (kind == EdgeKind::UserUser && n.kind == NodeKind::User) ||
                (kind == EdgeKind::ShowShow && n.kind == NodeKind::ShowCombo))
                pool.push_back(n.id);
        }
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            std::size_t over = 0;
            for (NodeId v : pool) over += deg[v] > thresholds[t] ? 1 : 0;
            CHECK(got[t] == Approx(static_cast<double>(over) / pool.size()).margin(1e-15));
        }
    }
}

TEST_CASE("ascending thresholds are rejected") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(10, 5, 12);
    CHECK_THROWS_AS(degree_distribution(pg.g, EdgeKind::UserShow, {5, 10}), std::invalid_argument);
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "epgnn/walker.hpp"
#include "support/fixtures.hpp"

using namespace epgnn;
using Catch::Approx;

namespace {

// chi-square critical values at significance 0.01
constexpr double kChi2Df1 = 6.634896601;

WalkConfig wcfg(std::uint32_t l, std::uint32_t r, std::uint32_t k, std::uint64_t seed) {
    WalkConfig c;
    c.length = l;
    c.per_node = r;
    c.window = k;
    c.rng_seed = seed;
    return c;
}

std::multiset<std::pair<NodeId, NodeId>> pair_multiset(const PairSet& ps) {
    std::multiset<std::pair<NodeId, NodeId>> out;
    for (const TrainingPair& p : ps.pairs) out.insert({p.center, p.context});
    return out;
}

}  // namespace

TEST_CASE("metapath strings parse to kind sequences") {
    const MetaPath mp = MetaPath::parse("user,show,user");
    REQUIRE(mp.pattern.size() == 3);
    CHECK(mp.pattern[0] == NodeKind::User);
    CHECK(mp.pattern[1] == NodeKind::ShowCombo);
    CHECK(mp.pattern[2] == NodeKind::User);
    CHECK_THROWS_AS(MetaPath::parse("user"), std::invalid_argument);
    CHECK_THROWS_AS(MetaPath::parse("user,banana"), std::invalid_argument);
}

TEST_CASE("a forced path walk bounces between the only two nodes") {
    Graph g = fixtures::make_graph(1, 1);
    g.add_edge(0, 1, EdgeKind::UserShow, 1.0, Vec{1.0, 0.0});
    const WalkCorpus corpus = generate_walks(g, MetaPath::parse("user,show,user"), wcfg(3, 1, 1, 4));
    bool found = false;
    for (const auto& w : corpus.walks)
        if (!w.empty() && w[0] == 0) {
            found = true;
            CHECK(w == std::vector<NodeId>{0, 1, 0});
        }
    CHECK(found);
}

TEST_CASE("an isolated node emits r single-node walks") {
    Graph g = fixtures::make_graph(2, 1);
    g.add_edge(0, 2, EdgeKind::UserShow, 1.0, Vec{1.0, 0.0});
    // user 1 is isolated
    const WalkCorpus corpus = generate_walks(g, MetaPath::parse("user,show,user"), wcfg(5, 3, 1, 4));
    std::size_t singles = 0;
    for (const auto& w : corpus.walks)
        if (w.size() == 1 && w[0] == 1) ++singles;
    CHECK(singles == 3);
}

TEST_CASE("a dead end truncates the walk instead of restarting") {
    // u0 - s0 only; walks starting at s0 need a user-user hop at step 2 and stop
    Graph g = fixtures::make_graph(1, 1);
    g.add_edge(0, 1, EdgeKind::UserShow, 1.0, Vec{1.0, 0.0});
    const WalkCorpus corpus = generate_walks(g, MetaPath::parse("user,show,user"), wcfg(6, 2, 1, 4));
    for (const auto& w : corpus.walks) {
        if (w.empty() || w[0] != 1) continue;
        CHECK(w == std::vector<NodeId>{1, 0});
    }
}

TEST_CASE("transition picks are proportional to edge weight") {
    Graph g = fixtures::make_graph(2, 1);
    g.add_edge(0, 2, EdgeKind::UserShow, 3.0, Vec{3.0, 0.0});
    g.add_edge(1, 2, EdgeKind::UserShow, 1.0, Vec{1.0, 0.0});
    Rng rng(Rng::mix(12, 0x7a11));
    std::size_t picked0 = 0;
    const std::size_t trials = 10000;
    for (std::size_t t = 0; t < trials; ++t) {
        NodeId out = 99;
        REQUIRE(detail::walk_step(g, 2, NodeKind::User, rng, out));
        if (out == 0) ++picked0;
    }
    const double freq = static_cast<double>(picked0) / trials;
    CHECK(freq == Approx(0.75).margin(0.02));

    // chi-square against the 3:1 weights at significance 0.01
    const double e0 = 0.75 * trials, e1 = 0.25 * trials;
    const double o0 = static_cast<double>(picked0), o1 = static_cast<double>(trials - picked0);
    const double chi2 = (o0 - e0) * (o0 - e0) / e0 + (o1 - e1) * (o1 - e1) / e1;
    CHECK(chi2 < kChi2Df1);
}

TEST_CASE("every walk follows the metapath pattern cyclically") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(30, 10, 21);
    const MetaPath mp = MetaPath::parse("user,show,user");
    const WalkCorpus corpus = generate_walks(pg.g, mp, wcfg(9, 2, 2, 13));
    REQUIRE(!corpus.walks.empty());
    for (const auto& w : corpus.walks) {
        REQUIRE(!w.empty());
        std::size_t offset = 0;
        while (mp.pattern[offset] != pg.g.nodes[w[0]].kind) ++offset;
        for (std::size_t t = 0; t < w.size(); ++t)
            CHECK(pg.g.nodes[w[t]].kind == mp.at(offset, t));
    }
}

TEST_CASE("walk corpora are seed deterministic and worker-count independent") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(30, 10, 22);
    const MetaPath mp = MetaPath::parse("user,show,user");
    const WalkCorpus a = generate_walks(pg.g, mp, wcfg(8, 2, 2, 13), 1);
    const WalkCorpus b = generate_walks(pg.g, mp, wcfg(8, 2, 2, 13), 1);
    const WalkCorpus c = generate_walks(pg.g, mp, wcfg(8, 2, 2, 13), 4);
    CHECK(a.walks == b.walks);
    CHECK(a.walks == c.walks);
    const WalkCorpus d = generate_walks(pg.g, mp, wcfg(8, 2, 2, 14), 1);
    CHECK(a.walks != d.walks);
}

TEST_CASE("walks start from combo nodes as well as users") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(20, 8, 23);
    const WalkCorpus corpus = generate_walks(pg.g, MetaPath::parse("user,show,user"), wcfg(6, 1, 1, 5));
    bool combo_start = false;
    for (const auto& w : corpus.walks)
        if (!w.empty() && pg.g.nodes[w[0]].kind == NodeKind::ShowCombo) combo_start = true;
    CHECK(combo_start);
    CHECK(corpus.walks.size() == pg.g.node_count());
}

TEST_CASE("a metapath kind missing from the graph is an error") {
    Graph g = fixtures::make_graph(2, 0);
    g.add_edge(0, 1, EdgeKind::UserUser, 1.0, Vec{1.0, 0.0});
    CHECK_THROWS_AS(generate_walks(g, MetaPath::parse("user,show,user"), wcfg(4, 1, 1, 3)),
                    std::invalid_argument);
}

TEST_CASE("window pairs for a 3-walk at k=1 are the adjacent ordered pairs") {
    WalkCorpus corpus;
    corpus.walks.push_back({7, 8, 9});
    const PairSet ps = generate_pairs(corpus, 1);
    CHECK(pair_multiset(ps) ==
          std::multiset<std::pair<NodeId, NodeId>>{{7, 8}, {8, 7}, {8, 9}, {9, 8}});
}

TEST_CASE("window pairs for a 3-walk at k=2 add the distance-2 pair both ways") {
    WalkCorpus corpus;
    corpus.walks.push_back({7, 8, 9});
    const PairSet ps = generate_pairs(corpus, 2);
    CHECK(ps.pairs.size() == 6);
    CHECK(pair_multiset(ps) == std::multiset<std::pair<NodeId, NodeId>>{
                                   {7, 8}, {8, 7}, {8, 9}, {9, 8}, {7, 9}, {9, 7}});
}

TEST_CASE("a single-node walk emits no pairs") {
    WalkCorpus corpus;
    corpus.walks.push_back({5});
    CHECK(generate_pairs(corpus, 2).pairs.empty());
}

TEST_CASE("repeated co-occurrences keep their multiplicity") {
    WalkCorpus corpus;
    corpus.walks.push_back({1, 2, 1});
    const PairSet ps = generate_pairs(corpus, 2);
    const auto ms = pair_multiset(ps);
    CHECK(ms.count({1, 2}) == 2);
    CHECK(ms.count({2, 1}) == 2);
    // the identical-endpoint pair (1,1) at distance 2 is dropped
    CHECK(ms.count({1, 1}) == 0);
    CHECK(ps.pairs.size() == 4);
}

TEST_CASE("window pairs match an exhaustive enumeration oracle") {
    Rng rng(Rng::mix(31, 0xabc));
    for (std::uint32_t k : {1u, 2u, 3u}) {
        WalkCorpus corpus;
        for (int w = 0; w < 50; ++w) {
            std::vector<NodeId> walk;
            const std::size_t len = 1 + rng.next_below(9);
            for (std::size_t t = 0; t < len; ++t) walk.push_back(rng.next_below(6));
            corpus.walks.push_back(std::move(walk));
        }
        const PairSet got = generate_pairs(corpus, k);

        std::multiset<std::pair<NodeId, NodeId>> oracle;
        for (const auto& walk : corpus.walks)
            for (std::size_t i = 0; i < walk.size(); ++i)
                for (std::size_t j = 0; j < walk.size(); ++j) {
                    const std::size_t dist = i > j ? i - j : j - i;
                    if (i == j || dist > k || walk[i] == walk[j]) continue;
                    oracle.insert({walk[i], walk[j]});
                }
        CHECK(pair_multiset(got) == oracle);
    }
}

TEST_CASE("pair emission is symmetric with equal multiplicity") {
    const fixtures::PlantedGraph pg = fixtures::planted_graph(30, 10, 24);
    const WalkCorpus corpus = generate_walks(pg.g, MetaPath::parse("user,show,user"), wcfg(8, 2, 2, 9));
    const PairSet ps = generate_pairs(corpus, 2);
    REQUIRE(!ps.pairs.empty());
    const auto ms = pair_multiset(ps);
    for (const auto& [a, b] : ms) CHECK(ms.count({a, b}) == ms.count({b, a}));
}

TEST_CASE("walk and window configs validate their bounds") {
    CHECK_THROWS_AS(wcfg(1, 1, 1, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(wcfg(5, 0, 1, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(wcfg(5, 1, 0, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(wcfg(5, 1, 5, 0).validate(), std::invalid_argument);
    WalkCorpus corpus;
    corpus.walks.push_back({1, 2});
    CHECK_THROWS_AS(generate_pairs(corpus, 0), std::invalid_argument);
}

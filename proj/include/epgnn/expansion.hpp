#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "epgnn/graph.hpp"
#include "epgnn/rng.hpp"
#include "epgnn/vecmath.hpp"

// Audience expansion over user embeddings. Users are pre-grouped by k-means;
// a show embedding then recalls users either by exact pruned top-N score,
// by whole nearest groups, or by widening from an observed seed audience.

namespace epgnn {

struct ClusterConfig {
    std::uint32_t groups = 50;
    std::uint32_t max_iters = 50;
    std::uint64_t rng_seed = 23;

    void validate() const {
        if (groups < 1) throw std::invalid_argument("groups must be >= 1");
        if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    }
};

struct ClusterModel {
    Matrix centroids;                           // G x dim
    std::vector<NodeId> user_ids;               // row index -> user node id
    std::vector<std::uint32_t> assignment;      // per row, group index
    std::vector<std::vector<std::size_t>> members;  // per group, row indices
    Vec radius;                                 // per group, max member distance to centroid
    double objective = 0.0;                     // final sum of squared distances
    std::vector<double> objective_history;      // one entry per assignment pass
    std::uint32_t iters_run = 0;

    std::size_t dim() const { return centroids.cols(); }
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

// Lloyd iterations from k-means++ seeds. Ties in assignment go to the lowest
// group index; a group losing all members is reseeded from the point farthest
// from its current centroid. The objective never increases between iterations.
inline ClusterModel cluster_users(const Matrix& emb, const std::vector<NodeId>& users,
                                  const ClusterConfig& cfg) {
    cfg.validate();
    if (users.empty()) throw std::invalid_argument("no users to cluster");
    if (cfg.groups > users.size()) throw std::invalid_argument("more groups than users");
    const std::size_t n = users.size();
    const std::size_t dim = emb.cols();
    const std::uint32_t g_count = cfg.groups;
    Rng rng(Rng::mix(cfg.rng_seed, 0x6b3a4));

    ClusterModel model;
    model.user_ids = users;
    model.centroids = Matrix(g_count, dim);

    // k-means++: next seed with probability proportional to squared distance
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    {
        const std::size_t first = rng.next_below(n);
        std::copy(emb.row(users[first]).begin(), emb.row(users[first]).end(),
                  model.centroids.row(0).begin());
        for (std::uint32_t g = 1; g < g_count; ++g) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = detail::sq_dist(emb.row(users[i]), model.centroids.row(g - 1));
                d2[i] = std::min(d2[i], d);
                total += d2[i];
            }
            std::size_t pick = 0;
            if (total > 0.0) {
                const double target = rng.next_unit() * total;
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = rng.next_below(n);
            }
            std::copy(emb.row(users[pick]).begin(), emb.row(users[pick]).end(),
                      model.centroids.row(g).begin());
        }
    }

    model.assignment.assign(n, 0);
    std::vector<std::size_t> counts(g_count, 0);
    Matrix sums(g_count, dim);

    for (std::uint32_t iter = 0; iter < cfg.max_iters; ++iter) {
        bool changed = iter == 0;
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t best_g = 0;
            for (std::uint32_t g = 0; g < g_count; ++g) {
                const double d = detail::sq_dist(emb.row(users[i]), model.centroids.row(g));
                if (d < best) {
                    best = d;
                    best_g = g;
                }
            }
            if (model.assignment[i] != best_g) changed = true;
            model.assignment[i] = best_g;
            objective += best;
        }
        model.objective = objective;
        model.objective_history.push_back(objective);
        model.iters_run = iter + 1;
        if (!changed && iter > 0) break;

        sums.fill(0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            axpy(sums.row(model.assignment[i]), 1.0, emb.row(users[i]));
            ++counts[model.assignment[i]];
        }
        for (std::uint32_t g = 0; g < g_count; ++g) {
            if (counts[g] > 0) {
                auto c = model.centroids.row(g);
                const double inv = 1.0 / static_cast<double>(counts[g]);
                for (std::size_t d = 0; d < dim; ++d) c[d] = sums(g, d) * inv;
            } else {
                // reseed from the point farthest from its assigned centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d =
                        detail::sq_dist(emb.row(users[i]), model.centroids.row(model.assignment[i]));
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                std::copy(emb.row(users[far]).begin(), emb.row(users[far]).end(),
                          model.centroids.row(g).begin());
            }
        }
    }

    model.members.assign(g_count, {});
    for (std::size_t i = 0; i < n; ++i) model.members[model.assignment[i]].push_back(i);
    model.radius.assign(g_count, 0.0);
    for (std::uint32_t g = 0; g < g_count; ++g)
        for (std::size_t i : model.members[g])
            model.radius[g] = std::max(
                model.radius[g], std::sqrt(detail::sq_dist(emb.row(model.user_ids[i]), model.centroids.row(g))));
    return model;
}

struct ScoredUser {
    NodeId user = 0;
    double score = 0.0;
    std::uint32_t group = 0;
};

struct TopNStats {
    std::size_t groups_scanned = 0;
    std::size_t groups_total = 0;
};

// Exact top-N users by score sigmoid(dot(show, user)). Groups are scanned in
// descending centroid-score order; a group member's score never exceeds
//     sigmoid(dot(s, c_g) + |s| * r_g)
// so once N scores are held and no remaining group's bound beats the weakest
// of them, the rest are skipped. The group layer only prunes, it never changes
// the result. Ties order by score descending then node id ascending.
inline std::vector<ScoredUser> base_topn(const ClusterModel& model, const Matrix& emb,
                                         std::span<const double> show, std::size_t n,
                                         TopNStats* stats = nullptr) {
    check_dim(show.size() == model.dim(), "base_topn: embedding dim mismatch");
    if (n == 0) throw std::invalid_argument("base_topn: n must be >= 1");
    const std::uint32_t g_count = static_cast<std::uint32_t>(model.members.size());
    const double show_norm = norm2(show);

    struct GroupEntry {
        double centroid_score;
        double bound;
        std::uint32_t group;
    };
    std::vector<GroupEntry> order;
    order.reserve(g_count);
    for (std::uint32_t g = 0; g < g_count; ++g) {
        if (model.members[g].empty()) continue;
        const double c = dot(show, model.centroids.row(g));
        order.push_back(GroupEntry{sigmoid(c), sigmoid(c + show_norm * model.radius[g]), g});
    }
    std::sort(order.begin(), order.end(), [](const GroupEntry& a, const GroupEntry& b) {
        if (a.centroid_score != b.centroid_score) return a.centroid_score > b.centroid_score;
        return a.group < b.group;
    });
    // best bound among groups not yet scanned, for the stop test
    std::vector<double> bound_tail(order.size() + 1, -std::numeric_limits<double>::infinity());
    for (std::size_t i = order.size(); i-- > 0;)
        bound_tail[i] = std::max(bound_tail[i + 1], order[i].bound);

    auto worse = [](const ScoredUser& a, const ScoredUser& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.user < b.user;  // "better" = earlier in final order
    };
    std::vector<ScoredUser> heap;  // max-heap on `worse` => top() is the weakest kept
    std::size_t scanned = 0;
    for (std::size_t idx = 0; idx < order.size(); ++idx) {
        if (heap.size() >= n && bound_tail[idx] < heap.front().score) break;
        if (heap.size() >= n && order[idx].bound < heap.front().score) continue;
        ++scanned;
        for (std::size_t i : model.members[order[idx].group]) {
            ScoredUser cand{model.user_ids[i], sigmoid(dot(show, emb.row(model.user_ids[i]))),
                            order[idx].group};
            if (heap.size() < n) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end(), worse);
            } else if (worse(cand, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), worse);
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end(), worse);
            }
        }
    }
    if (stats) {
        stats->groups_scanned = scanned;
        stats->groups_total = order.size();
    }
    std::sort(heap.begin(), heap.end(), worse);
    return heap;
}

// Whole nearest groups by centroid score until at least n users are covered.
inline std::vector<ScoredUser> group_recall(const ClusterModel& model, const Matrix& emb,
                                            std::span<const double> show, std::size_t n) {
    check_dim(show.size() == model.dim(), "group_recall: embedding dim mismatch");
    std::vector<std::pair<double, std::uint32_t>> order;
    for (std::uint32_t g = 0; g < model.members.size(); ++g) {
        if (model.members[g].empty()) continue;
        order.emplace_back(dot(show, model.centroids.row(g)), g);
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<ScoredUser> out;
    for (const auto& [score, g] : order) {
        if (out.size() >= n) break;
        for (std::size_t i : model.members[g])
            out.push_back(
                ScoredUser{model.user_ids[i], sigmoid(dot(show, emb.row(model.user_ids[i]))), g});
    }
    std::sort(out.begin(), out.end(), [](const ScoredUser& a, const ScoredUser& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.user < b.user;
    });
    return out;
}

enum class DeltaMode { Count, Density };

struct DeltaResult {
    std::vector<ScoredUser> added;             // non-seed members, score = seed share of group
    std::vector<std::uint32_t> groups_used;    // in rank order, last may be partial
    std::size_t budget_spent = 0;              // gross members counted, seeds included
};

// Widen an observed seed audience: rank the groups the seeds fall into by seed
// count (or seed count / group size), then take whole groups in rank order,
// ties toward the lower group id. Group members count against the budget
// whether or not they are seeds; only non-seeds are emitted. When the budget
// ends inside a group, that partial quota is drawn uniformly from the group.
inline DeltaResult delta_expand(const ClusterModel& model, std::span<const NodeId> seeds,
                                std::size_t budget, DeltaMode mode, std::uint64_t rng_seed) {
    std::unordered_set<NodeId> seed_set(seeds.begin(), seeds.end());
    std::unordered_map<NodeId, std::size_t> row_of;
    for (std::size_t i = 0; i < model.user_ids.size(); ++i) row_of.emplace(model.user_ids[i], i);

    std::vector<std::size_t> seed_count(model.members.size(), 0);
    for (NodeId s : seed_set) {
        auto it = row_of.find(s);
        if (it != row_of.end()) ++seed_count[model.assignment[it->second]];
    }

    std::vector<std::pair<double, std::uint32_t>> rank;
    for (std::uint32_t g = 0; g < model.members.size(); ++g) {
        if (seed_count[g] == 0) continue;
        const double score = mode == DeltaMode::Count
                                 ? static_cast<double>(seed_count[g])
                                 : static_cast<double>(seed_count[g]) /
                                       static_cast<double>(model.members[g].size());
        rank.emplace_back(score, g);
    }
    std::sort(rank.begin(), rank.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    DeltaResult res;
    Rng rng(Rng::mix(rng_seed, 0xde17a));
    for (const auto& [score, g] : rank) {
        if (res.budget_spent >= budget) break;
        const auto& rows = model.members[g];
        const std::size_t room = budget - res.budget_spent;
        res.groups_used.push_back(g);
        if (rows.size() <= room) {
            for (std::size_t i : rows) {
                const NodeId u = model.user_ids[i];
                if (!seed_set.count(u)) res.added.push_back(ScoredUser{u, score, g});
            }
            res.budget_spent += rows.size();
        } else {
            // partial boundary group: uniform draw without replacement
            std::vector<std::size_t> pool(rows.begin(), rows.end());
            for (std::size_t k = 0; k < room; ++k) {
                const std::size_t j = k + rng.next_below(pool.size() - k);
                std::swap(pool[k], pool[j]);
                const NodeId u = model.user_ids[pool[k]];
                if (!seed_set.count(u)) res.added.push_back(ScoredUser{u, score, g});
            }
            res.budget_spent += room;
        }
    }
    std::sort(res.added.begin(), res.added.end(), [](const ScoredUser& a, const ScoredUser& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.group != b.group) return a.group < b.group;
        return a.user < b.user;
    });
    return res;
}

// |recalled ∩ exact| / |exact|
inline double recall_coverage(std::span<const ScoredUser> recalled,
                              std::span<const ScoredUser> exact) {
    if (exact.empty()) throw std::invalid_argument("empty reference set");
    std::unordered_set<NodeId> got;
    for (const ScoredUser& s : recalled) got.insert(s.user);
    std::size_t hit = 0;
    for (const ScoredUser& s : exact)
        if (got.count(s.user)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(exact.size());
}

struct AudienceMember {
    NodeId user = 0;
    double score = 0.0;          // model score for base rows, rank score for delta rows
    std::uint32_t group = 0;
    bool from_delta = false;
};

// Base list first, then delta additions not already present.
inline std::vector<AudienceMember> merge_audience(std::span<const ScoredUser> base,
                                                  std::span<const ScoredUser> delta) {
    std::vector<AudienceMember> out;
    std::unordered_set<NodeId> seen;
    for (const ScoredUser& s : base) {
        if (!seen.insert(s.user).second) continue;
        out.push_back(AudienceMember{s.user, s.score, s.group, false});
    }
    for (const ScoredUser& s : delta) {
        if (!seen.insert(s.user).second) continue;
        out.push_back(AudienceMember{s.user, s.score, s.group, true});
    }
    return out;
}

}  // namespace epgnn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "epgnn/graph.hpp"
#include "epgnn/rng.hpp"
#include "epgnn/sampler.hpp"
#include "epgnn/vecmath.hpp"
#include "epgnn/walker.hpp"

// The edge-prompted graph network. A node's embedding at the next iteration is
//
//     out_i = b_i + f(v_i) + g({u_ij}, {v_j}, v_i)
//     g     = sum_j alpha(v_i, v_j) * sum_k u_ijk * W_k * v_j
//     alpha = sigmoid(w_a . [v_i ; v_j] + b_a)
//
// with f a two-layer tanh net over the node's own embedding, W_k one trainable
// matrix per edge-feature channel, and u_ij the observed (not trained) edge
// channels. Trained with a log-sigmoid skip-gram loss over walk pairs and
// degree^0.75 negative samples, by Adam on hand-derived gradients.

namespace epgnn {

struct ModelDims {
    std::uint32_t node_dim = 32;  // m_n
    std::uint32_t edge_dim = 2;   // m_e
    std::uint32_t layers = 1;     // message passing iterations T
    std::uint32_t hidden = 32;    // one-body net hidden width

    void validate() const {
        if (node_dim < 1 || edge_dim < 1 || layers < 1 || hidden < 1)
            throw std::invalid_argument("model dims must be >= 1");
    }
};

// f(v) = w2 * tanh(w1 * v + b1) + b2
struct OneBodyNet {
    Matrix w1;  // hidden x m_n
    Vec b1;     // hidden
    Matrix w2;  // m_n x hidden
    Vec b2;     // m_n
};

// alpha(vi, vj) = sigmoid(w . [vi ; vj] + b)
struct AttentionNet {
    Vec w;  // 2 * m_n
    double b = 0.0;
};

struct ModelParams {
    ModelDims dims;
    Matrix embed;                 // |V| x m_n, the v table
    Matrix bias;                  // |V| x m_n, the b table
    OneBodyNet one_body;
    AttentionNet attn;
    std::vector<Matrix> channel;  // m_e matrices, each m_n x m_n
};

// Node table rows start from raw features when the node carries them,
// otherwise uniform(-0.5/m_n, 0.5/m_n); everything else small uniform.
inline ModelParams init_params(const Graph& g, const ModelDims& dims, std::uint64_t seed) {
    dims.validate();
    ModelParams p;
    p.dims = dims;
    const std::size_t n = g.node_count();
    const double half = 0.5 / dims.node_dim;
    Rng rng(Rng::mix(seed, 0x9e0de1));

    p.embed = Matrix(n, dims.node_dim);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = p.embed.row(i);
        if (g.nodes[i].raw_features.size() == dims.node_dim) {
            std::copy(g.nodes[i].raw_features.begin(), g.nodes[i].raw_features.end(), row.begin());
        } else {
            for (double& x : row) x = rng.next_uniform(-half, half);
        }
    }
    p.bias = Matrix(n, dims.node_dim);
    p.bias.fill_uniform(rng, -half, half);

    const double s1 = 1.0 / std::sqrt(static_cast<double>(dims.node_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
    p.one_body.w1 = Matrix(dims.hidden, dims.node_dim);
    p.one_body.w1.fill_uniform(rng, -s1, s1);
    p.one_body.b1.assign(dims.hidden, 0.0);
    p.one_body.w2 = Matrix(dims.node_dim, dims.hidden);
    p.one_body.w2.fill_uniform(rng, -s2, s2);
    p.one_body.b2.assign(dims.node_dim, 0.0);

    p.attn.w.assign(2 * static_cast<std::size_t>(dims.node_dim), 0.0);
    const double sa = 1.0 / std::sqrt(2.0 * dims.node_dim);
    for (double& x : p.attn.w) x = rng.next_uniform(-sa, sa);
    p.attn.b = 0.0;

    p.channel.reserve(dims.edge_dim);
    for (std::uint32_t k = 0; k < dims.edge_dim; ++k) {
        Matrix w(dims.node_dim, dims.node_dim);
        w.fill_uniform(rng, -s1, s1);
        p.channel.push_back(std::move(w));
    }
    return p;
}

// one sampled neighbor with its observed edge channels
struct NeighborView {
    std::span<const double> v;  // neighbor embedding, m_n
    std::span<const double> u;  // edge channels, m_e
};

inline double attention(const ModelParams& p, std::span<const double> vi, std::span<const double> vj) {
    const std::size_t m = p.dims.node_dim;
    check_dim(vi.size() == m && vj.size() == m, "attention: embedding dim mismatch");
    double z = p.attn.b;
    for (std::size_t d = 0; d < m; ++d) z += p.attn.w[d] * vi[d] + p.attn.w[m + d] * vj[d];
    return sigmoid(z);
}

// sum_k u_k * W_k * v_j for one neighbor
inline Vec channel_mix(const ModelParams& p, std::span<const double> u, std::span<const double> vj) {
    check_dim(u.size() == p.dims.edge_dim, "interaction: edge feature dim mismatch");
    check_dim(vj.size() == p.dims.node_dim, "interaction: embedding dim mismatch");
    Vec s(p.dims.node_dim, 0.0);
    for (std::size_t k = 0; k < u.size(); ++k) {
        if (u[k] == 0.0) continue;
        for (std::size_t r = 0; r < p.dims.node_dim; ++r)
            s[r] += u[k] * dot(p.channel[k].row(r), vj);
    }
    return s;
}

// two-body term; empty neighbor list -> zero vector
inline Vec interaction(const ModelParams& p, std::span<const double> vi,
                       std::span<const NeighborView> neighbors) {
    Vec g(p.dims.node_dim, 0.0);
    for (const NeighborView& nb : neighbors) {
        const Vec s = channel_mix(p, nb.u, nb.v);
        axpy(g, attention(p, vi, nb.v), s);
    }
    return g;
}

inline Vec one_body(const ModelParams& p, std::span<const double> v) {
    Vec h = p.one_body.w1.matvec(v);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i] + p.one_body.b1[i]);
    Vec out = p.one_body.w2.matvec(h);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.one_body.b2[i];
    return out;
}

// --- sampled computation tree -------------------------------------------------
//
// One forward evaluation consumes a per-layer snapshot of sampled neighbors.
// At depth 1 the previous-layer embeddings are table rows; deeper trees carry
// their own subtrees, each drawn from that node's first-order cache.

struct TreeEdge {
    NodeId neighbor = 0;
    std::span<const double> u;
};

struct SampleTree {
    NodeId node = 0;
    std::vector<TreeEdge> edges;
    std::unique_ptr<SampleTree> self_prev;   // null at depth 1
    std::vector<SampleTree> neighbor_prev;   // parallel to edges; empty at depth 1
};

inline SampleTree sample_tree(const NeighborCache& cache, const SampleConfig& cfg, NodeId v,
                              std::uint32_t depth, Rng& rng) {
    SampleTree t;
    t.node = v;
    for (const CacheEntry* e : resample(cache, v, cfg, rng))
        t.edges.push_back(TreeEdge{e->neighbor, std::span<const double>(e->edge_feats)});
    if (depth > 1) {
        t.self_prev = std::make_unique<SampleTree>(sample_tree(cache, cfg, v, depth - 1, rng));
        t.neighbor_prev.reserve(t.edges.size());
        for (const TreeEdge& e : t.edges)
            t.neighbor_prev.push_back(sample_tree(cache, cfg, e.neighbor, depth - 1, rng));
    }
    return t;
}

// full (unsampled) neighborhood, for inference
inline SampleTree full_tree(const Graph& g, NodeId v, std::uint32_t depth) {
    SampleTree t;
    t.node = v;
    for (const AdjEntry& a : g.adjacency[v])
        t.edges.push_back(TreeEdge{a.neighbor, std::span<const double>(g.edges[a.edge].features)});
    if (depth > 1) {
        t.self_prev = std::make_unique<SampleTree>(full_tree(g, v, depth - 1));
        t.neighbor_prev.reserve(t.edges.size());
        for (const TreeEdge& e : t.edges) t.neighbor_prev.push_back(full_tree(g, e.neighbor, depth - 1));
    }
    return t;
}

inline Vec forward(const ModelParams& p, const SampleTree& t) {
    check_dim(t.node < p.embed.rows(), "forward: unknown node");
    const std::size_t m = p.dims.node_dim;
    Vec vi_prev = t.self_prev ? forward(p, *t.self_prev)
                              : Vec(p.embed.row(t.node).begin(), p.embed.row(t.node).end());
    Vec out(p.bias.row(t.node).begin(), p.bias.row(t.node).end());
    const Vec f = one_body(p, vi_prev);
    for (std::size_t d = 0; d < m; ++d) out[d] += f[d];
    for (std::size_t j = 0; j < t.edges.size(); ++j) {
        const TreeEdge& e = t.edges[j];
        Vec vj_prev = t.neighbor_prev.empty()
                          ? Vec(p.embed.row(e.neighbor).begin(), p.embed.row(e.neighbor).end())
                          : forward(p, t.neighbor_prev[j]);
        const Vec s = channel_mix(p, e.u, vj_prev);
        axpy(out, attention(p, vi_prev, vj_prev), s);
    }
    return out;
}

// single-layer convenience form
inline Vec forward(const ModelParams& p, NodeId node, std::span<const TreeEdge> sampled) {
    SampleTree t;
    t.node = node;
    t.edges.assign(sampled.begin(), sampled.end());
    return forward(p, t);
}

// --- gradients ----------------------------------------------------------------

struct ModelGrads {
    std::unordered_map<NodeId, Vec> embed;
    std::unordered_map<NodeId, Vec> bias;
    OneBodyNet one_body;
    AttentionNet attn;
    std::vector<Matrix> channel;

    explicit ModelGrads(const ModelDims& dims) {
        one_body.w1 = Matrix(dims.hidden, dims.node_dim);
        one_body.b1.assign(dims.hidden, 0.0);
        one_body.w2 = Matrix(dims.node_dim, dims.hidden);
        one_body.b2.assign(dims.node_dim, 0.0);
        attn.w.assign(2 * static_cast<std::size_t>(dims.node_dim), 0.0);
        attn.b = 0.0;
        for (std::uint32_t k = 0; k < dims.edge_dim; ++k)
            channel.emplace_back(dims.node_dim, dims.node_dim);
    }

    Vec& embed_row(NodeId v, std::size_t m) {
        auto it = embed.find(v);
        if (it == embed.end()) it = embed.emplace(v, Vec(m, 0.0)).first;
        return it->second;
    }
    Vec& bias_row(NodeId v, std::size_t m) {
        auto it = bias.find(v);
        if (it == bias.end()) it = bias.emplace(v, Vec(m, 0.0)).first;
        return it->second;
    }

    void scale(double c) {
        for (auto& [k, v] : embed)
            for (double& x : v) x *= c;
        for (auto& [k, v] : bias)
            for (double& x : v) x *= c;
        for (double& x : one_body.w1.data()) x *= c;
        for (double& x : one_body.b1) x *= c;
        for (double& x : one_body.w2.data()) x *= c;
        for (double& x : one_body.b2) x *= c;
        for (double& x : attn.w) x *= c;
        attn.b *= c;
        for (Matrix& w : channel)
            for (double& x : w.data()) x *= c;
    }

    void check_finite() const {
        auto bad = [](double x) { return !std::isfinite(x); };
        auto scan = [&](std::span<const double> xs, const char* name) {
            for (double x : xs)
                if (bad(x)) throw std::runtime_error(std::string("non-finite gradient in ") + name);
        };
        for (const auto& [k, v] : embed) scan(v, "embed");
        for (const auto& [k, v] : bias) scan(v, "bias");
        scan(one_body.w1.data(), "one_body.w1");
        scan(one_body.b1, "one_body.b1");
        scan(one_body.w2.data(), "one_body.w2");
        scan(one_body.b2, "one_body.b2");
        scan(attn.w, "attn.w");
        if (bad(attn.b)) throw std::runtime_error("non-finite gradient in attn.b");
        for (std::size_t k = 0; k < channel.size(); ++k) scan(channel[k].data(), "channel");
    }
};

namespace detail {

// reverse pass through one tree node; recomputes forward activations
inline void backward_tree(const ModelParams& p, const SampleTree& t, std::span<const double> g_out,
                          ModelGrads& grads) {
    const std::size_t m = p.dims.node_dim;
    const Vec vi_prev = t.self_prev ? forward(p, *t.self_prev)
                                    : Vec(p.embed.row(t.node).begin(), p.embed.row(t.node).end());

    // bias term
    axpy(grads.bias_row(t.node, m), 1.0, g_out);

    // one-body path: out += w2 tanh(w1 vi + b1) + b2
    Vec h = p.one_body.w1.matvec(vi_prev);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i] + p.one_body.b1[i]);
    grads.one_body.w2.add_outer(1.0, g_out, h);
    axpy(grads.one_body.b2, 1.0, g_out);
    Vec dh = p.one_body.w2.matvec_t(g_out);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= 1.0 - h[i] * h[i];
    grads.one_body.w1.add_outer(1.0, dh, vi_prev);
    axpy(grads.one_body.b1, 1.0, dh);
    Vec d_vi = p.one_body.w1.matvec_t(dh);

    // interaction path
    for (std::size_t j = 0; j < t.edges.size(); ++j) {
        const TreeEdge& e = t.edges[j];
        const Vec vj_prev = t.neighbor_prev.empty()
                                ? Vec(p.embed.row(e.neighbor).begin(), p.embed.row(e.neighbor).end())
                                : forward(p, t.neighbor_prev[j]);
        const Vec s = channel_mix(p, e.u, vj_prev);
        double z = p.attn.b;
        for (std::size_t d = 0; d < m; ++d) z += p.attn.w[d] * vi_prev[d] + p.attn.w[m + d] * vj_prev[d];
        const double alpha = sigmoid(z);

        const double d_alpha = dot(g_out, s);
        const double dz = d_alpha * alpha * (1.0 - alpha);
        for (std::size_t d = 0; d < m; ++d) {
            grads.attn.w[d] += dz * vi_prev[d];
            grads.attn.w[m + d] += dz * vj_prev[d];
            d_vi[d] += dz * p.attn.w[d];
        }
        grads.attn.b += dz;

        Vec d_vj(m, 0.0);
        for (std::size_t d = 0; d < m; ++d) d_vj[d] = dz * p.attn.w[m + d];
        for (std::size_t k = 0; k < e.u.size(); ++k) {
            if (e.u[k] == 0.0) continue;
            // ds = alpha * g_out feeds both W_k and v_j
            grads.channel[k].add_outer(alpha * e.u[k], g_out, vj_prev);
            Vec back = p.channel[k].matvec_t(g_out);
            axpy(d_vj, alpha * e.u[k], back);
        }
        if (t.neighbor_prev.empty()) {
            axpy(grads.embed_row(e.neighbor, m), 1.0, d_vj);
        } else {
            backward_tree(p, t.neighbor_prev[j], d_vj, grads);
        }
    }

    if (t.self_prev) {
        backward_tree(p, *t.self_prev, d_vi, grads);
    } else {
        axpy(grads.embed_row(t.node, m), 1.0, d_vi);
    }
}

}  // namespace detail

struct LossConfig {
    double q = 1.0;                        // negative-term influence
    std::uint32_t negatives_per_positive = 5;
    double neg_power = 0.75;

    void validate() const {
        if (q < 0.0) throw std::invalid_argument("Q must be >= 0");
        if (negatives_per_positive < 1) throw std::invalid_argument("negatives_per_positive must be >= 1");
    }
};

// L = -log sig(vk.vi) - Q * mean_j log sig(-vj.vi), all through forward
inline double pair_loss(const ModelParams& p, const SampleTree& center, const SampleTree& context,
                        std::span<const SampleTree> negatives, double q) {
    const Vec vi = forward(p, center);
    const Vec vk = forward(p, context);
    double loss = -log_sigmoid(dot(vi, vk));
    if (!negatives.empty()) {
        double neg = 0.0;
        for (const SampleTree& t : negatives) neg += -log_sigmoid(-dot(vi, forward(p, t)));
        loss += q * neg / static_cast<double>(negatives.size());
    }
    return loss;
}

// loss plus gradient accumulation into `grads` (coefficient 1; callers scale)
inline double pair_loss_grad(const ModelParams& p, const SampleTree& center, const SampleTree& context,
                             std::span<const SampleTree> negatives, double q, ModelGrads& grads) {
    const Vec vi = forward(p, center);
    const Vec vk = forward(p, context);
    const std::size_t m = vi.size();

    const double s = dot(vi, vk);
    double loss = -log_sigmoid(s);
    const double ds = sigmoid(s) - 1.0;

    Vec d_vi(m, 0.0);
    axpy(d_vi, ds, vk);
    Vec d_vk(m, 0.0);
    axpy(d_vk, ds, vi);

    std::vector<Vec> d_vjs;
    if (!negatives.empty()) {
        const double inv = q / static_cast<double>(negatives.size());
        double neg = 0.0;
        for (const SampleTree& t : negatives) {
            const Vec vj = forward(p, t);
            const double tj = dot(vi, vj);
            neg += -log_sigmoid(-tj);
            const double dt = inv * sigmoid(tj);
            axpy(d_vi, dt, vj);
            Vec d_vj(m, 0.0);
            axpy(d_vj, dt, vi);
            d_vjs.push_back(std::move(d_vj));
        }
        loss += inv * neg;
    }

    detail::backward_tree(p, center, d_vi, grads);
    detail::backward_tree(p, context, d_vk, grads);
    for (std::size_t j = 0; j < d_vjs.size(); ++j)
        detail::backward_tree(p, negatives[j], d_vjs[j], grads);
    return loss;
}

// --- negative sampling --------------------------------------------------------

// unigram(degree)^power per node kind
class NegativeTable {
public:
    NegativeTable(const Graph& g, double power) {
        for (const Node& n : g.nodes) {
            KindTable& t = n.kind == NodeKind::User ? users_ : combos_;
            t.ids.push_back(n.id);
            const double w = std::pow(static_cast<double>(g.degree(n.id)), power);
            t.total += w;
            t.cum.push_back(t.total);
        }
    }

    // one draw of `kind`, never `exclude`; false when no candidate exists
    bool draw(NodeKind kind, NodeId exclude, Rng& rng, NodeId& out) const {
        const KindTable& t = kind == NodeKind::User ? users_ : combos_;
        if (t.ids.empty() || (t.ids.size() == 1 && t.ids[0] == exclude)) return false;
        for (int tries = 0; tries < 64; ++tries) {
            NodeId cand;
            if (t.total > 0.0) {
                const double target = rng.next_unit() * t.total;
                const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), target);
                cand = t.ids[std::min<std::size_t>(it - t.cum.begin(), t.ids.size() - 1)];
            } else {
                cand = t.ids[rng.next_below(t.ids.size())];
            }
            if (cand != exclude) {
                out = cand;
                return true;
            }
        }
        // exclude dominates the mass; fall back to uniform over the others
        std::size_t i = static_cast<std::size_t>(rng.next_below(t.ids.size() - 1));
        out = t.ids[i] == exclude ? t.ids[t.ids.size() - 1] : t.ids[i];
        return true;
    }

    std::vector<NodeId> sample(NodeKind kind, NodeId exclude, std::size_t count, Rng& rng) const {
        std::vector<NodeId> out;
        out.reserve(count);
        NodeId v;
        for (std::size_t i = 0; i < count; ++i) {
            if (!draw(kind, exclude, rng, v)) break;
            out.push_back(v);
        }
        return out;
    }

private:
    struct KindTable {
        std::vector<NodeId> ids;
        std::vector<double> cum;
        double total = 0.0;
    };
    KindTable users_, combos_;
};

// spec-shaped convenience; training keeps one NegativeTable across batches
inline std::vector<NodeId> negative_sample(const TrainingPair& pair, const Graph& g,
                                           const LossConfig& cfg, Rng& rng) {
    cfg.validate();
    NegativeTable table(g, cfg.neg_power);
    return table.sample(g.nodes[pair.context].kind, pair.context, cfg.negatives_per_positive, rng);
}

}  // namespace epgnn

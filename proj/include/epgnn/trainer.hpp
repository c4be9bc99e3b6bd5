#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "epgnn/graph.hpp"
#include "epgnn/model.hpp"
#include "epgnn/rng.hpp"
#include "epgnn/sampler.hpp"
#include "epgnn/walker.hpp"

namespace epgnn {

struct TrainConfig {
    std::uint32_t epochs = 5;
    std::uint32_t batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t rng_seed = 17;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
            throw std::invalid_argument("betas must lie in [0, 1)");
        if (eps <= 0.0) throw std::invalid_argument("eps must be > 0");
    }
};

// First/second moment buffers, one pair per trainable tensor. Node tables are
// stepped lazily: only rows touched by a batch move, against the global step
// counter, so untouched rows keep their moments unchanged.
struct AdamState {
    std::uint64_t step = 0;
    Matrix embed_m, embed_v;
    Matrix bias_m, bias_v;
    Matrix w1_m, w1_v, w2_m, w2_v;
    Vec b1_m, b1_v, b2_m, b2_v;
    Vec attn_w_m, attn_w_v;
    double attn_b_m = 0.0, attn_b_v = 0.0;
    std::vector<Matrix> channel_m, channel_v;

    explicit AdamState(const ModelParams& p) {
        const auto& d = p.dims;
        embed_m = Matrix(p.embed.rows(), d.node_dim);
        embed_v = Matrix(p.embed.rows(), d.node_dim);
        bias_m = Matrix(p.bias.rows(), d.node_dim);
        bias_v = Matrix(p.bias.rows(), d.node_dim);
        w1_m = Matrix(d.hidden, d.node_dim);
        w1_v = Matrix(d.hidden, d.node_dim);
        w2_m = Matrix(d.node_dim, d.hidden);
        w2_v = Matrix(d.node_dim, d.hidden);
        b1_m.assign(d.hidden, 0.0);
        b1_v.assign(d.hidden, 0.0);
        b2_m.assign(d.node_dim, 0.0);
        b2_v.assign(d.node_dim, 0.0);
        attn_w_m.assign(2 * static_cast<std::size_t>(d.node_dim), 0.0);
        attn_w_v.assign(2 * static_cast<std::size_t>(d.node_dim), 0.0);
        for (std::uint32_t k = 0; k < d.edge_dim; ++k) {
            channel_m.emplace_back(d.node_dim, d.node_dim);
            channel_v.emplace_back(d.node_dim, d.node_dim);
        }
    }
};

namespace detail {

inline void adam_span(std::span<double> p, std::span<const double> g, std::span<double> m,
                      std::span<double> v, const TrainConfig& c, std::uint64_t step) {
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        p[i] -= c.learning_rate * mh / (std::sqrt(vh) + c.eps);
    }
}

inline void adam_scalar(double& p, double g, double& m, double& v, const TrainConfig& c,
                        std::uint64_t step) {
    std::span<double> ps(&p, 1), ms(&m, 1), vs(&v, 1);
    std::span<const double> gs(&g, 1);
    adam_span(ps, gs, ms, vs, c, step);
}

}  // namespace detail

// One optimizer step from an already-averaged gradient.
inline void adam_step(ModelParams& p, const ModelGrads& g, AdamState& st, const TrainConfig& cfg) {
    ++st.step;
    for (const auto& [row, grad] : g.embed)
        detail::adam_span(p.embed.row(row), grad, st.embed_m.row(row), st.embed_v.row(row), cfg, st.step);
    for (const auto& [row, grad] : g.bias)
        detail::adam_span(p.bias.row(row), grad, st.bias_m.row(row), st.bias_v.row(row), cfg, st.step);
    detail::adam_span(p.one_body.w1.data(), g.one_body.w1.data(), st.w1_m.data(), st.w1_v.data(), cfg, st.step);
    detail::adam_span(p.one_body.b1, g.one_body.b1, st.b1_m, st.b1_v, cfg, st.step);
    detail::adam_span(p.one_body.w2.data(), g.one_body.w2.data(), st.w2_m.data(), st.w2_v.data(), cfg, st.step);
    detail::adam_span(p.one_body.b2, g.one_body.b2, st.b2_m, st.b2_v, cfg, st.step);
    detail::adam_span(p.attn.w, g.attn.w, st.attn_w_m, st.attn_w_v, cfg, st.step);
    detail::adam_scalar(p.attn.b, g.attn.b, st.attn_b_m, st.attn_b_v, cfg, st.step);
    for (std::size_t k = 0; k < p.channel.size(); ++k)
        detail::adam_span(p.channel[k].data(), g.channel[k].data(), st.channel_m[k].data(),
                          st.channel_v[k].data(), cfg, st.step);
}

struct TrainReport {
    std::vector<double> epoch_loss;  // mean batch loss per completed epoch
    std::uint64_t steps = 0;
    bool diverged = false;
};

struct TrainResult {
    ModelParams params;
    TrainReport report;
};

namespace detail {

struct PairWork {
    SampleTree center, context;
    std::vector<SampleTree> negatives;
};

inline PairWork draw_pair_work(const Graph& g, const NeighborCache& cache, const SampleConfig& scfg,
                               const NegativeTable& table, const TrainingPair& pr,
                               const LossConfig& lcfg, std::uint32_t layers, Rng& rng) {
    PairWork w;
    w.center = sample_tree(cache, scfg, pr.center, layers, rng);
    w.context = sample_tree(cache, scfg, pr.context, layers, rng);
    for (NodeId neg : table.sample(g.nodes[pr.context].kind, pr.context, lcfg.negatives_per_positive, rng))
        w.negatives.push_back(sample_tree(cache, scfg, neg, layers, rng));
    return w;
}

}  // namespace detail

// Mini-batch Adam over walk pairs. Neighbor snapshots are redrawn from the
// first-order cache per batch. Single worker is bit-stable for a fixed seed;
// workers > 1 splits each batch across threads and merges per-worker gradient
// sums in worker order, which changes summation order relative to the
// single-worker run and is therefore outside the bit-stability guarantee.
// A non-finite epoch rolls the parameters back to the last epoch boundary.
inline TrainResult train(const Graph& g, const NeighborCache& cache, const PairSet& pairs,
                         const ModelDims& dims, const LossConfig& lcfg, const TrainConfig& tcfg,
                         const SampleConfig& scfg, std::size_t workers = 1,
                         const ModelParams* initial = nullptr) {
    dims.validate();
    lcfg.validate();
    tcfg.validate();
    scfg.validate();
    if (pairs.pairs.empty()) throw std::invalid_argument("no training pairs");
    if (workers < 1) workers = 1;

    TrainResult res;
    res.params = initial ? *initial : init_params(g, dims, tcfg.rng_seed);
    AdamState adam(res.params);
    NegativeTable table(g, lcfg.neg_power);

    ModelParams snapshot = res.params;
    std::vector<std::size_t> order(pairs.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::uint64_t batch_counter = 0;

    for (std::uint32_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        Rng shuffle_rng(Rng::mix(tcfg.rng_seed, Rng::mix(0x5u, epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        bool bad = false;

        for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + tcfg.batch_size);
            const std::size_t count = stop - start;
            const std::uint64_t batch_id = batch_counter++;

            // one deterministic stream per (pair, batch), independent of threading
            std::vector<detail::PairWork> work(count);
            std::vector<double> losses(count, 0.0);
            const std::size_t nw = std::min(workers, count);
            std::vector<ModelGrads> partial;
            partial.reserve(nw);
            for (std::size_t w = 0; w < nw; ++w) partial.emplace_back(dims);

            auto run = [&](std::size_t w) {
                for (std::size_t i = start + w; i < stop; i += nw) {
                    Rng rng(Rng::mix(tcfg.rng_seed, Rng::mix(0xBA7C4u, Rng::mix(batch_id, order[i]))));
                    detail::PairWork pw = detail::draw_pair_work(g, cache, scfg, table,
                                                                 pairs.pairs[order[i]], lcfg,
                                                                 dims.layers, rng);
                    losses[i - start] = pair_loss_grad(res.params, pw.center, pw.context,
                                                       pw.negatives, lcfg.q, partial[w]);
                }
            };
            if (nw == 1) {
                run(0);
            } else {
                std::vector<std::thread> pool;
                for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(run, w);
                for (auto& t : pool) t.join();
            }

            ModelGrads& grads = partial[0];
            for (std::size_t w = 1; w < nw; ++w) {
                const ModelGrads& o = partial[w];
                for (const auto& [row, vec] : o.embed) axpy(grads.embed_row(row, dims.node_dim), 1.0, vec);
                for (const auto& [row, vec] : o.bias) axpy(grads.bias_row(row, dims.node_dim), 1.0, vec);
                axpy(grads.one_body.w1.data(), 1.0, o.one_body.w1.data());
                axpy(grads.one_body.b1, 1.0, o.one_body.b1);
                axpy(grads.one_body.w2.data(), 1.0, o.one_body.w2.data());
                axpy(grads.one_body.b2, 1.0, o.one_body.b2);
                axpy(grads.attn.w, 1.0, o.attn.w);
                grads.attn.b += o.attn.b;
                for (std::size_t k = 0; k < grads.channel.size(); ++k)
                    axpy(grads.channel[k].data(), 1.0, o.channel[k].data());
            }
            grads.scale(1.0 / static_cast<double>(count));

            double batch_loss = 0.0;
            for (double l : losses) batch_loss += l;
            batch_loss /= static_cast<double>(count);
            if (!std::isfinite(batch_loss)) {
                bad = true;
                break;
            }
            grads.check_finite();

            adam_step(res.params, grads, adam, tcfg);
            ++res.report.steps;
            epoch_loss += batch_loss;
            ++batches;
        }

        if (bad) {
            res.params = snapshot;
            res.report.diverged = true;
            break;
        }
        res.report.epoch_loss.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
        snapshot = res.params;
    }
    return res;
}

// Inference embedding over the full neighborhood at the trained depth.
inline Vec infer_embedding(const ModelParams& p, const Graph& g, NodeId v) {
    check_dim(v < g.node_count(), "infer_embedding: unknown node");
    return forward(p, full_tree(g, v, p.dims.layers));
}

inline Matrix infer_all(const ModelParams& p, const Graph& g, std::size_t workers = 1) {
    Matrix out(g.node_count(), p.dims.node_dim);
    detail::parallel_over(g.node_count(), workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t v = lo; v < hi; ++v) {
            const Vec e = infer_embedding(p, g, v);
            std::copy(e.begin(), e.end(), out.row(v).begin());
        }
    });
    return out;
}

}  // namespace epgnn

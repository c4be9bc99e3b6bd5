// Pipeline driver. Every stage is a subcommand reading one shared config file;
// each writes its artifacts plus a JSON run manifest into the output directory.
// Exit codes: 0 success, 1 validation error (including missing artifacts),
// 2 runtime error.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "epgnn/epgnn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace epgnn;

namespace {

struct MissingArtifact : std::invalid_argument {
    explicit MissingArtifact(const std::string& path)
        : std::invalid_argument("missing artifact: " + path) {}
};

struct Ctx {
    PipelineConfig cfg;
    fs::path out;
    std::uint32_t workers = 1;
    std::string eval_embeddings;  // optional external embedding file for `eval`

    fs::path artifact(const std::string& name) const { return out / name; }

    std::string require(const std::string& name) const {
        const fs::path p = artifact(name);
        if (!fs::exists(p)) throw MissingArtifact(p.string());
        return p.string();
    }

    std::string input(const std::string& path) const {
        if (!fs::exists(path)) throw MissingArtifact(path);
        return path;
    }

    std::uint64_t stage_seed(const char* stage) const {
        return Rng::mix(cfg.run.seed, fnv1a64(stage));
    }
};

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    std::int64_t ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void write_manifest(const Ctx& ctx, const std::string& stage, const StageTimer& timer,
                    const json& counts, const std::vector<std::string>& artifacts) {
    json m;
    m["stage"] = stage;
    m["config_hash"] = hash_hex(ctx.cfg.hash());
    m["seed"] = ctx.cfg.run.seed;
    m["workers"] = ctx.workers;
    m["duration_ms"] = timer.ms();
    m["counts"] = counts;
    json ah = json::object();
    for (const std::string& name : artifacts) ah[name] = io::file_hash(ctx.artifact(name).string());
    m["artifacts"] = ah;
    std::ofstream os(ctx.artifact(stage + "_manifest.json"));
    os << m.dump(2) << '\n';
    std::cout << stage << ": done in " << timer.ms() << " ms\n";
}

// --- shared loaders -----------------------------------------------------------

Graph load_graph(const Ctx& ctx) { return io::read_graph(ctx.require("graph.bin")); }

std::unordered_map<NodeId, std::string> category_map(const Graph& g, const std::string& type_key) {
    std::unordered_map<NodeId, std::string> out;
    for (const Node& n : g.nodes) {
        if (n.kind != NodeKind::ShowCombo) continue;
        const auto it = n.profile.find(type_key);
        if (it != n.profile.end()) out.emplace(n.id, it->second);
    }
    return out;
}

// embedding file rows aligned to graph node ids by external id
Matrix aligned_embeddings(const Graph& g, const io::EmbeddingFile& ef) {
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < ef.rows.size(); ++i) row_of[ef.rows[i].first] = i;
    Matrix m(g.node_count(), ef.dim);
    for (const Node& n : g.nodes) {
        const auto it = row_of.find(n.external_id);
        if (it == row_of.end())
            throw std::runtime_error("embedding missing for node " + n.external_id);
        std::copy(ef.rows[it->second].second.begin(), ef.rows[it->second].second.end(),
                  m.row(n.id).begin());
    }
    return m;
}

std::unordered_map<std::string, NodeId> external_index(const Graph& g, NodeKind kind) {
    std::unordered_map<std::string, NodeId> out;
    for (const Node& n : g.nodes)
        if (n.kind == kind) out.emplace(n.external_id, n.id);
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ',') {
            std::string item = text.substr(start, i - start);
            start = i + 1;
            while (!item.empty() && item.front() == ' ') item.erase(item.begin());
            while (!item.empty() && item.back() == ' ') item.pop_back();
            if (!item.empty()) out.push_back(std::move(item));
        }
    }
    return out;
}

struct LoadedClusters {
    ClusterModel model;
    Matrix emb;
};

// groups.tsv + centroids.tsv + embeddings.tsv -> in-memory cluster model
LoadedClusters load_clusters(const Ctx& ctx, const Graph& g) {
    LoadedClusters lc;
    lc.emb = aligned_embeddings(g, io::read_embeddings(ctx.require("embeddings.tsv")));

    const io::EmbeddingFile cf = io::read_embeddings(ctx.require("centroids.tsv"));
    lc.model.centroids = Matrix(cf.rows.size(), cf.dim);
    for (std::size_t gi = 0; gi < cf.rows.size(); ++gi)
        std::copy(cf.rows[gi].second.begin(), cf.rows[gi].second.end(),
                  lc.model.centroids.row(gi).begin());

    const auto users = external_index(g, NodeKind::User);
    std::ifstream in(ctx.require("groups.tsv"));
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("groups.tsv:" + std::to_string(ln) + ": expected 2 columns");
        const std::string ext = line.substr(0, tab);
        const auto uit = users.find(ext);
        if (uit == users.end()) throw std::runtime_error("groups.tsv: unknown user " + ext);
        const std::uint64_t group = std::stoull(line.substr(tab + 1));
        if (group >= lc.model.centroids.rows())
            throw std::runtime_error("groups.tsv: group out of range on line " + std::to_string(ln));
        lc.model.user_ids.push_back(uit->second);
        lc.model.assignment.push_back(static_cast<std::uint32_t>(group));
    }
    lc.model.members.assign(lc.model.centroids.rows(), {});
    for (std::size_t i = 0; i < lc.model.user_ids.size(); ++i)
        lc.model.members[lc.model.assignment[i]].push_back(i);
    lc.model.radius.assign(lc.model.centroids.rows(), 0.0);
    for (std::size_t gi = 0; gi < lc.model.members.size(); ++gi)
        for (std::size_t i : lc.model.members[gi]) {
            Vec diff(lc.emb.row(lc.model.user_ids[i]).begin(), lc.emb.row(lc.model.user_ids[i]).end());
            axpy(diff, -1.0, lc.model.centroids.row(gi));
            lc.model.radius[gi] = std::max(lc.model.radius[gi], norm2(diff));
        }
    return lc;
}

std::vector<std::string> configured_shows(const Ctx& ctx) {
    const auto shows = split_list(ctx.cfg.expansion.shows);
    if (shows.empty()) throw std::invalid_argument("expansion.shows is empty; list show-combo ids");
    return shows;
}

// --- stages -------------------------------------------------------------------

void stage_build_graph(const Ctx& ctx) {
    StageTimer t;
    const auto interactions = io::read_interactions(ctx.input(ctx.cfg.paths.interactions));
    const auto combo_map = io::read_combos(ctx.input(ctx.cfg.paths.combos));

    std::unordered_map<std::string, Profile> profiles(combo_map.begin(), combo_map.end());
    std::unordered_map<std::string, std::string> types;
    for (const auto& [ext, profile] : combo_map) {
        const auto it = profile.find(ctx.cfg.type_key);
        if (it != profile.end()) types.emplace(ext, it->second);
    }

    BuildStats stats;
    Graph g = build_graph(interactions, types, profiles, ctx.cfg.graph, &stats);
    normalize_edge_features(g, ctx.cfg.norm);
    io::write_graph(g, ctx.artifact("graph.bin").string());
    io::write_idmap(g, ctx.artifact("idmap.tsv").string());

    json counts;
    counts["nodes"] = g.node_count();
    counts["edges"] = g.edge_count();
    counts["user_show_edges"] = stats.user_show_edges;
    counts["user_user_edges"] = stats.user_user_edges;
    counts["show_show_edges"] = stats.show_show_edges;
    counts["skipped_records"] = stats.skipped_records;
    counts["capped_edges"] = stats.capped_edges;
    write_manifest(ctx, "build-graph", t, counts, {"graph.bin", "idmap.tsv"});
}

void stage_partition(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    PartitionStats stats;
    const auto parts = partition_by_category(g, category_map(g, ctx.cfg.type_key), ctx.cfg.parts, &stats);

    json per_part = json::array();
    std::vector<std::string> artifacts;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const std::string name = "part_" + std::to_string(i) + ".bin";
        io::write_graph(parts[i], ctx.artifact(name).string());
        per_part.push_back({{"nodes", parts[i].node_count()}, {"edges", parts[i].edge_count()}});
        artifacts.push_back(name);
    }
    json counts;
    counts["parts"] = parts.size();
    counts["dropped_cross_edges"] = stats.dropped_cross_edges;
    counts["missing_category"] = stats.missing_category;
    counts["per_part"] = per_part;
    write_manifest(ctx, "partition", t, counts, artifacts);
}

void stage_walk(const Ctx& ctx) {
    StageTimer t;
    const MetaPath mp = MetaPath::parse(ctx.cfg.metapath);
    WalkCorpus merged;
    std::uint64_t steps = 0;

    if (ctx.cfg.parts <= 1) {
        const Graph g = load_graph(ctx);
        WalkConfig wc = ctx.cfg.walk;
        wc.rng_seed = ctx.stage_seed("walk");
        merged = generate_walks(g, mp, wc, ctx.workers);
    } else {
        for (std::uint32_t i = 0; i < ctx.cfg.parts; ++i) {
            const Graph part = io::read_graph(ctx.require("part_" + std::to_string(i) + ".bin"));
            if (part.node_count() == 0) continue;
            WalkConfig wc = ctx.cfg.walk;
            wc.rng_seed = Rng::mix(ctx.stage_seed("walk"), i);
            WalkCorpus local = generate_walks(part, mp, wc, ctx.workers);
            for (auto& walk : local.walks) {
                for (NodeId& v : walk) v = part.parent_of(v);
                merged.walks.push_back(std::move(walk));
            }
        }
    }
    for (const auto& w : merged.walks) steps += w.size();
    io::write_walks(merged, ctx.artifact("walks.txt").string());
    write_manifest(ctx, "walk", t, {{"walks", merged.walks.size()}, {"steps", steps}}, {"walks.txt"});
}

void stage_pairs(const Ctx& ctx) {
    StageTimer t;
    const WalkCorpus corpus = io::read_walks(ctx.require("walks.txt"));
    const PairSet ps = generate_pairs(corpus, ctx.cfg.walk.window);
    io::write_pairs(ps, ctx.artifact("pairs.bin").string());
    write_manifest(ctx, "pairs", t, {{"pairs", ps.pairs.size()}}, {"pairs.bin"});
}

void stage_cache(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    SampleConfig sc = ctx.cfg.sample;
    sc.rng_seed = ctx.stage_seed("cache");
    const NeighborCache cache = build_neighbor_cache(g, sc, ctx.workers);
    io::write_cache(cache, ctx.artifact("cache.bin").string());
    std::uint64_t entries = 0;
    for (const auto& e : cache.entries) entries += e.size();
    write_manifest(ctx, "cache", t, {{"nodes", cache.entries.size()}, {"entries", entries}},
                   {"cache.bin"});
}

void stage_train(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    const PairSet ps = io::read_pairs(ctx.require("pairs.bin"));
    const NeighborCache cache = io::read_cache(ctx.require("cache.bin"));

    SampleConfig sc = ctx.cfg.sample;
    sc.rng_seed = ctx.stage_seed("cache");
    TrainConfig tc = ctx.cfg.train;
    tc.rng_seed = ctx.stage_seed("train");

    TrainResult res;
    if (tc.epochs == 0) {
        res.params = init_params(g, ctx.cfg.model, tc.rng_seed);
    } else {
        res = train(g, cache, ps, ctx.cfg.model, ctx.cfg.loss, tc, sc, ctx.workers);
    }
    io::write_checkpoint(res.params, nullptr, ctx.artifact("model.ckpt").string());

    json counts;
    counts["steps"] = res.report.steps;
    counts["epochs_run"] = res.report.epoch_loss.size();
    counts["epoch_loss"] = res.report.epoch_loss;
    counts["diverged"] = res.report.diverged;
    write_manifest(ctx, "train", t, counts, {"model.ckpt"});
}

void stage_embed(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    const io::Checkpoint ck = io::read_checkpoint(ctx.require("model.ckpt"));
    const Matrix emb = infer_all(ck.params, g, ctx.workers);

    io::EmbeddingFile ef;
    ef.dim = emb.cols();
    for (const Node& n : g.nodes)
        ef.rows.emplace_back(n.external_id, Vec(emb.row(n.id).begin(), emb.row(n.id).end()));
    io::write_embeddings(ef, ctx.artifact("embeddings.tsv").string());
    write_manifest(ctx, "embed", t, {{"rows", ef.rows.size()}, {"dim", ef.dim}}, {"embeddings.tsv"});
}

// trains inside the evaluation protocol, without touching pipeline artifacts
Matrix eval_train_embeddings(const Ctx& ctx, const Graph& g) {
    const MetaPath mp = MetaPath::parse(ctx.cfg.metapath);
    WalkConfig wc = ctx.cfg.walk;
    wc.rng_seed = Rng::mix(ctx.stage_seed("eval"), fnv1a64("walk"));
    const WalkCorpus corpus = generate_walks(g, mp, wc, ctx.workers);
    const PairSet ps = generate_pairs(corpus, ctx.cfg.walk.window);
    SampleConfig sc = ctx.cfg.sample;
    sc.rng_seed = Rng::mix(ctx.stage_seed("eval"), fnv1a64("cache"));
    const NeighborCache cache = build_neighbor_cache(g, sc, ctx.workers);
    TrainConfig tc = ctx.cfg.train;
    tc.rng_seed = Rng::mix(ctx.stage_seed("eval"), fnv1a64("train"));
    const TrainResult res = train(g, cache, ps, ctx.cfg.model, ctx.cfg.loss, tc, sc, ctx.workers);
    return infer_all(res.params, g, ctx.workers);
}

void stage_eval(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    SplitConfig sc;
    sc.valid_fraction = ctx.cfg.eval.valid_fraction;
    sc.test_fraction = ctx.cfg.eval.test_fraction;
    sc.rng_seed = ctx.stage_seed("eval");
    const EdgeSplit split = split_edges(g, sc);

    Matrix emb;
    std::string source;
    if (!ctx.eval_embeddings.empty()) {
        emb = aligned_embeddings(g, io::read_embeddings(ctx.input(ctx.eval_embeddings)));
        source = ctx.eval_embeddings;
    } else {
        emb = eval_train_embeddings(ctx, split.train_graph);
        source = "trained";
    }
    const MetricReport r = evaluate(emb, split, ctx.cfg.eval.cosine);

    json report;
    report["dataset"] = ctx.artifact("graph.bin").string();
    report["embeddings"] = source;
    report["split_seed"] = sc.rng_seed;
    report["valid_fraction"] = sc.valid_fraction;
    report["test_fraction"] = sc.test_fraction;
    report["scoring"] = ctx.cfg.eval.cosine ? "cosine" : "sigmoid-dot";
    report["counts"] = {{"test_pos", r.test_pos},
                        {"test_neg", r.test_neg},
                        {"valid_pos", r.valid_pos},
                        {"valid_neg", r.valid_neg}};
    report["metrics"] = {{"roc_auc", r.roc_auc},
                         {"pr_auc", r.pr_auc},
                         {"f1", r.f1},
                         {"threshold", r.threshold}};
    std::ofstream os(ctx.artifact("report.json"));
    os << report.dump(2) << '\n';
    std::cout << "eval: roc_auc=" << r.roc_auc << " pr_auc=" << r.pr_auc << " f1=" << r.f1 << '\n';
    write_manifest(ctx, "eval", t, report["metrics"], {"report.json"});
}

void stage_cluster(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    const Matrix emb = aligned_embeddings(g, io::read_embeddings(ctx.require("embeddings.tsv")));
    ClusterConfig cc = ctx.cfg.cluster;
    cc.rng_seed = ctx.stage_seed("cluster");
    const ClusterModel model = cluster_users(emb, g.nodes_of_kind(NodeKind::User), cc);
    io::write_groups(model, g, ctx.artifact("groups.tsv").string());
    io::write_centroids(model, ctx.artifact("centroids.tsv").string());

    json counts;
    counts["users"] = model.user_ids.size();
    counts["groups"] = model.centroids.rows();
    counts["iterations"] = model.iters_run;
    counts["objective"] = model.objective;
    write_manifest(ctx, "cluster", t, counts, {"groups.tsv", "centroids.tsv"});
}

void stage_base(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    const LoadedClusters lc = load_clusters(ctx, g);
    const auto combos = external_index(g, NodeKind::ShowCombo);

    json per_show = json::object();
    std::vector<std::string> artifacts;
    for (const std::string& show : configured_shows(ctx)) {
        const auto it = combos.find(show);
        if (it == combos.end()) throw std::invalid_argument("unknown show-combo id: " + show);
        TopNStats stats;
        const auto top = base_topn(lc.model, lc.emb, lc.emb.row(it->second),
                                   ctx.cfg.expansion.topn, &stats);
        std::vector<AudienceMember> members;
        for (const ScoredUser& s : top)
            members.push_back(AudienceMember{s.user, s.score, s.group, false});
        const std::string name = "audience_" + show + ".tsv";
        io::write_audience(members, g, ctx.artifact(name).string());
        per_show[show] = {{"size", members.size()},
                          {"groups_scanned", stats.groups_scanned},
                          {"groups_total", stats.groups_total}};
        artifacts.push_back(name);
    }
    write_manifest(ctx, "base", t, per_show, artifacts);
}

void stage_expand(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    const LoadedClusters lc = load_clusters(ctx, g);
    const auto combos = external_index(g, NodeKind::ShowCombo);
    const auto users = external_index(g, NodeKind::User);
    const auto seed_rows = io::read_seeds(ctx.input(ctx.cfg.paths.seeds));

    json per_show = json::object();
    std::vector<std::string> artifacts;
    for (const std::string& show : configured_shows(ctx)) {
        const auto it = combos.find(show);
        if (it == combos.end()) throw std::invalid_argument("unknown show-combo id: " + show);

        std::vector<NodeId> seeds;
        std::size_t unknown_seeds = 0;
        for (const io::SeedRecord& s : seed_rows) {
            if (s.show_id != show) continue;
            const auto uit = users.find(s.user_id);
            if (uit == users.end()) {
                ++unknown_seeds;
                continue;
            }
            seeds.push_back(uit->second);
        }

        const auto base = base_topn(lc.model, lc.emb, lc.emb.row(it->second), ctx.cfg.expansion.topn);
        const DeltaResult delta = delta_expand(lc.model, seeds, ctx.cfg.expansion.budget,
                                               ctx.cfg.expansion.mode, ctx.stage_seed("expand"));
        const auto merged = merge_audience(base, delta.added);
        const std::string name = "audience_" + show + ".tsv";
        io::write_audience(merged, g, ctx.artifact(name).string());
        per_show[show] = {{"base", base.size()},
                          {"delta", delta.added.size()},
                          {"merged", merged.size()},
                          {"seeds", seeds.size()},
                          {"unknown_seeds", unknown_seeds},
                          {"budget_spent", delta.budget_spent}};
        artifacts.push_back(name);
    }
    write_manifest(ctx, "expand", t, per_show, artifacts);
}

void stage_coldstart(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    const Matrix emb = aligned_embeddings(g, io::read_embeddings(ctx.require("embeddings.tsv")));
    const auto new_shows = io::read_combos(ctx.input(ctx.cfg.paths.newshow));
    const std::vector<NodeId> combo_ids = g.nodes_of_kind(NodeKind::ShowCombo);

    ColdStartConfig cc;
    cc.top_m = ctx.cfg.cold.top_m;
    cc.measure = ctx.cfg.cold.measure;
    cc.global_mean_fallback = ctx.cfg.cold.fallback;
    const FieldWeights weights = field_weights_from_config(ctx.cfg.cold.weights);

    io::EmbeddingFile ef;
    ef.dim = emb.cols();
    for (const auto& [ext, profile] : new_shows)
        ef.rows.emplace_back(ext, coldstart_embed(profile, g, combo_ids, emb, cc, weights));
    io::write_embeddings(ef, ctx.artifact("coldstart_embeddings.tsv").string());
    write_manifest(ctx, "coldstart", t, {{"shows", ef.rows.size()}}, {"coldstart_embeddings.tsv"});
}

void stage_stats(const Ctx& ctx) {
    StageTimer t;
    const Graph g = load_graph(ctx);
    const std::vector<std::uint64_t> thresholds = {20, 10, 5, 1};

    json counts;
    for (EdgeKind kind : {EdgeKind::UserShow, EdgeKind::UserUser, EdgeKind::ShowShow}) {
        const auto fractions = degree_distribution(g, kind, thresholds);
        json rows = json::array();
        for (std::size_t i = 0; i < thresholds.size(); ++i)
            rows.push_back({{"threshold", thresholds[i]}, {"fraction", fractions[i]}});
        counts[to_string(kind)] = rows;
        std::cout << to_string(kind) << ":";
        for (std::size_t i = 0; i < thresholds.size(); ++i)
            std::cout << "  >" << thresholds[i] << ": " << fractions[i];
        std::cout << '\n';
    }
    counts["nodes"] = g.node_count();
    counts["edges"] = g.edge_count();
    std::ofstream os(ctx.artifact("stats.json"));
    os << counts.dump(2) << '\n';
    write_manifest(ctx, "stats", t, counts, {"stats.json"});
}

void stage_pipeline(const Ctx& ctx) {
    stage_build_graph(ctx);
    if (ctx.cfg.parts > 1) stage_partition(ctx);
    stage_walk(ctx);
    stage_pairs(ctx);
    stage_cache(ctx);
    stage_train(ctx);
    stage_embed(ctx);
    stage_cluster(ctx);
    stage_base(ctx);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"edge-prompted graph embedding and audience expansion pipeline"};
    app.require_subcommand(1);
    app.allow_extras();

    std::string config_path = "config.ini";
    std::string out_dir_flag, eval_embeddings;
    std::uint64_t seed_flag = 0;
    std::uint32_t workers_flag = 0;
    bool seed_set = false, workers_set = false;

    app.add_option("-c,--config", config_path, "pipeline config file")->capture_default_str();
    app.add_option("--seed", seed_flag, "override run.seed")->each([&](const std::string&) { seed_set = true; });
    app.add_option("--workers", workers_flag, "override run.workers")->each([&](const std::string&) { workers_set = true; });
    app.add_option("--out-dir", out_dir_flag, "override paths.out_dir");

    const std::vector<std::pair<std::string, void (*)(const Ctx&)>> stages = {
        {"build-graph", stage_build_graph}, {"partition", stage_partition},
        {"walk", stage_walk},               {"pairs", stage_pairs},
        {"cache", stage_cache},             {"train", stage_train},
        {"embed", stage_embed},             {"eval", stage_eval},
        {"cluster", stage_cluster},         {"base", stage_base},
        {"expand", stage_expand},           {"coldstart", stage_coldstart},
        {"stats", stage_stats},             {"pipeline", stage_pipeline},
    };
    for (const auto& [name, fn] : stages) {
        CLI::App* sub = app.add_subcommand(name);
        sub->allow_extras();
        if (name == "eval")
            sub->add_option("--embeddings", eval_embeddings,
                            "score an external embedding file instead of training");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    Ctx ctx;
    try {
        ctx.cfg = load_config(config_path);

        // dotted --section.key overrides from leftover args
        std::vector<std::string> extras = app.remaining(true);
        for (std::size_t i = 0; i < extras.size(); ++i) {
            std::string key = extras[i];
            if (key.rfind("--", 0) != 0 || key.find('.') == std::string::npos)
                throw std::invalid_argument("unrecognized argument: " + key);
            key = key.substr(2);
            const std::size_t eq = key.find('=');
            std::string value;
            if (eq != std::string::npos) {
                value = key.substr(eq + 1);
                key = key.substr(0, eq);
            } else {
                if (i + 1 >= extras.size())
                    throw std::invalid_argument("missing value for override --" + key);
                value = extras[++i];
            }
            apply_override(ctx.cfg, key, value);
        }

        if (seed_set) ctx.cfg.run.seed = seed_flag;
        if (workers_set) ctx.cfg.run.workers = workers_flag;
        if (!out_dir_flag.empty()) ctx.cfg.paths.out_dir = out_dir_flag;
        ctx.cfg.validate();
        ctx.workers = ctx.cfg.run.workers;
        ctx.eval_embeddings = eval_embeddings;
        ctx.out = ctx.cfg.paths.out_dir;
        fs::create_directories(ctx.out);
    } catch (const std::exception& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 1;
    }

    try {
        for (const auto& [name, fn] : stages)
            if (app.get_subcommand(name)->parsed()) {
                fn(ctx);
                return 0;
            }
        std::cerr << "no stage selected\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

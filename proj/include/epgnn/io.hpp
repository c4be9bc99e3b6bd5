#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epgnn/expansion.hpp"
#include "epgnn/graph.hpp"
#include "epgnn/model.hpp"
#include "epgnn/rng.hpp"
#include "epgnn/trainer.hpp"
#include "epgnn/vecmath.hpp"
#include "epgnn/walker.hpp"

// Readers and writers for every pipeline artifact. Binary formats are
// little-endian with a four-byte magic; text artifacts are tab-separated.
// Writers are deterministic: identical inputs produce identical bytes.

namespace epgnn {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace io {

inline std::runtime_error open_error(const std::string& path) {
    return std::runtime_error("cannot open " + path);
}

inline std::runtime_error line_error(const std::string& path, std::size_t line, const std::string& what) {
    return std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

// --- numeric text formatting --------------------------------------------------

// 9 significant digits, shortest form
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

inline std::string join_values(std::span<const double> v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(',');
        out += fmt_double(v[i]);
    }
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& path, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw line_error(path, line, "bad number '" + s + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& path, std::size_t line) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw line_error(path, line, "bad integer '" + s + "'");
    }
}

// --- binary primitives --------------------------------------------------------

template <class T>
inline void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
inline T get_val(std::istream& is, const std::string& path) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated file " + path);
    return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, const std::string& path) {
    const std::uint32_t n = get_val<std::uint32_t>(is, path);
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw std::runtime_error("truncated file " + path);
    return s;
}

inline void put_vec(std::ostream& os, std::span<const double> v) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline Vec get_vec(std::istream& is, const std::string& path) {
    const std::uint32_t n = get_val<std::uint32_t>(is, path);
    Vec v(n);
    if (n && !is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
        throw std::runtime_error("truncated file " + path);
    return v;
}

inline void put_matrix(std::ostream& os, const Matrix& m) {
    put<std::uint64_t>(os, m.rows());
    put<std::uint64_t>(os, m.cols());
    os.write(reinterpret_cast<const char*>(m.data().data()),
             static_cast<std::streamsize>(m.data().size() * sizeof(double)));
}

inline Matrix get_matrix(std::istream& is, const std::string& path) {
    const std::uint64_t r = get_val<std::uint64_t>(is, path);
    const std::uint64_t c = get_val<std::uint64_t>(is, path);
    Matrix m(r, c);
    if (r * c != 0 &&
        !is.read(reinterpret_cast<char*>(m.data().data()),
                 static_cast<std::streamsize>(m.data().size() * sizeof(double))))
        throw std::runtime_error("truncated file " + path);
    return m;
}

inline void check_magic(std::istream& is, const char* magic, const std::string& path) {
    char buf[4];
    if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
        throw std::runtime_error(path + ": bad magic, expected " + magic);
}

// --- interactions / combos ----------------------------------------------------

inline std::vector<RawInteraction> read_interactions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw open_error(path);
    std::vector<RawInteraction> out;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 4) throw line_error(path, ln, "expected 4 tab-separated columns");
        RawInteraction r;
        r.user_id = cols[0];
        r.show_combo_id = cols[1];
        r.click_count = parse_u64(cols[2], path, ln);
        r.view_time = parse_u64(cols[3], path, ln);
        out.push_back(std::move(r));
    }
    return out;
}

inline Profile parse_profile(const std::string& text, const std::string& path, std::size_t ln) {
    Profile p;
    for (const std::string& field : split(text, ';')) {
        if (field.empty()) continue;
        const std::size_t eq = field.find('=');
        if (eq == std::string::npos || eq == 0) throw line_error(path, ln, "bad field '" + field + "'");
        p[field.substr(0, eq)] = field.substr(eq + 1);
    }
    return p;
}

// show_combo_id \t key=value;key=value;...
inline std::map<std::string, Profile> read_combos(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw open_error(path);
    std::map<std::string, Profile> out;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 2) throw line_error(path, ln, "expected 2 tab-separated columns");
        out[cols[0]] = parse_profile(cols[1], path, ln);
    }
    return out;
}

// --- graph.bin / idmap.tsv ----------------------------------------------------

inline void write_graph(const Graph& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw open_error(path);
    os.write("EPG1", 4);
    put<std::uint64_t>(os, g.node_count());
    put<std::uint64_t>(os, g.edge_count());
    put<std::uint8_t>(os, g.features_normalized ? 1 : 0);
    put<std::uint8_t>(os, g.parent_ids.empty() ? 0 : 1);
    for (const Node& n : g.nodes) {
        put<std::uint8_t>(os, static_cast<std::uint8_t>(n.kind));
        put_string(os, n.external_id);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(n.profile.size()));
        for (const auto& [k, v] : n.profile) {
            put_string(os, k);
            put_string(os, v);
        }
        put_vec(os, n.raw_features);
    }
    for (const Edge& e : g.edges) {
        put<std::uint64_t>(os, e.src);
        put<std::uint64_t>(os, e.dst);
        put<std::uint8_t>(os, static_cast<std::uint8_t>(e.kind));
        put<double>(os, e.weight);
        put_vec(os, e.features);
    }
    for (NodeId p : g.parent_ids) put<std::uint64_t>(os, p);
}

inline Graph read_graph(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw open_error(path);
    check_magic(is, "EPG1", path);
    const std::uint64_t nodes = get_val<std::uint64_t>(is, path);
    const std::uint64_t edges = get_val<std::uint64_t>(is, path);
    const bool normalized = get_val<std::uint8_t>(is, path) != 0;
    const bool has_parents = get_val<std::uint8_t>(is, path) != 0;
    Graph g;
    g.features_normalized = normalized;
    g.nodes.reserve(nodes);
    for (std::uint64_t i = 0; i < nodes; ++i) {
        Node n;
        n.id = i;
        n.kind = static_cast<NodeKind>(get_val<std::uint8_t>(is, path));
        n.external_id = get_string(is, path);
        const std::uint32_t fields = get_val<std::uint32_t>(is, path);
        for (std::uint32_t f = 0; f < fields; ++f) {
            std::string k = get_string(is, path);
            n.profile[std::move(k)] = get_string(is, path);
        }
        n.raw_features = get_vec(is, path);
        g.nodes.push_back(std::move(n));
    }
    g.adjacency.assign(nodes, {});
    for (std::uint64_t i = 0; i < edges; ++i) {
        const NodeId src = get_val<std::uint64_t>(is, path);
        const NodeId dst = get_val<std::uint64_t>(is, path);
        const EdgeKind kind = static_cast<EdgeKind>(get_val<std::uint8_t>(is, path));
        const double w = get_val<double>(is, path);
        Vec feats = get_vec(is, path);
        g.add_edge(src, dst, kind, w, std::move(feats));
    }
    if (has_parents) {
        g.parent_ids.resize(nodes);
        for (std::uint64_t i = 0; i < nodes; ++i) g.parent_ids[i] = get_val<std::uint64_t>(is, path);
    }
    return g;
}

inline void write_idmap(const Graph& g, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw open_error(path);
    for (const Node& n : g.nodes) os << n.external_id << '\t' << n.id << '\n';
}

inline std::map<std::string, NodeId> read_idmap(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw open_error(path);
    std::map<std::string, NodeId> out;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 2) throw line_error(path, ln, "expected 2 tab-separated columns");
        out[cols[0]] = parse_u64(cols[1], path, ln);
    }
    return out;
}

// --- walks.txt / pairs.bin ----------------------------------------------------

inline void write_walks(const WalkCorpus& corpus, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw open_error(path);
    for (const auto& walk : corpus.walks) {
        for (std::size_t i = 0; i < walk.size(); ++i) {
            if (i) os << ' ';
            os << walk[i];
        }
        os << '\n';
    }
}

inline WalkCorpus read_walks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw open_error(path);
    WalkCorpus corpus;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        std::vector<NodeId> walk;
        for (const std::string& tok : split(line, ' '))
            if (!tok.empty()) walk.push_back(parse_u64(tok, path, ln));
        corpus.walks.push_back(std::move(walk));
    }
    return corpus;
}

inline void write_pairs(const PairSet& ps, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw open_error(path);
    os.write("EPP1", 4);
    put<std::uint64_t>(os, ps.pairs.size());
    for (const TrainingPair& p : ps.pairs) {
        put<std::uint64_t>(os, p.center);
        put<std::uint64_t>(os, p.context);
    }
}

inline PairSet read_pairs(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw open_error(path);
    check_magic(is, "EPP1", path);
    const std::uint64_t n = get_val<std::uint64_t>(is, path);
    PairSet ps;
    ps.pairs.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        TrainingPair p;
        p.center = get_val<std::uint64_t>(is, path);
        p.context = get_val<std::uint64_t>(is, path);
        ps.pairs.push_back(p);
    }
    return ps;
}

// --- embeddings.tsv -----------------------------------------------------------

struct EmbeddingFile {
    std::size_t dim = 0;
    std::vector<std::pair<std::string, Vec>> rows;  // external id, vector

    std::optional<std::size_t> find(const std::string& ext) const {
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].first == ext) return i;
        return std::nullopt;
    }
};

// header `#dim=<m_n> count=<N>`, then `external_id \t f1,f2,...`
inline void write_embeddings(const EmbeddingFile& ef, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw open_error(path);
    os << "#dim=" << ef.dim << " count=" << ef.rows.size() << '\n';
    for (const auto& [ext, vec] : ef.rows) os << ext << '\t' << join_values(vec) << '\n';
}

inline EmbeddingFile read_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw open_error(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    EmbeddingFile ef;
    std::size_t count = 0;
    if (std::sscanf(line.c_str(), "#dim=%zu count=%zu", &ef.dim, &count) != 2)
        throw line_error(path, 1, "bad header '" + line + "'");
    std::size_t ln = 1;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 2) throw line_error(path, ln, "expected 2 tab-separated columns");
        Vec v;
        for (const std::string& tok : split(cols[1], ','))
            v.push_back(parse_double(tok, path, ln));
        if (v.size() != ef.dim) throw line_error(path, ln, "row dim mismatch");
        ef.rows.emplace_back(cols[0], std::move(v));
    }
    if (ef.rows.size() != count) throw std::runtime_error(path + ": row count does not match header");
    return ef;
}

// --- model.ckpt ---------------------------------------------------------------

inline void write_checkpoint(const ModelParams& p, const AdamState* adam, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw open_error(path);
    os.write("EPM1", 4);
    put<std::uint32_t>(os, p.dims.node_dim);
    put<std::uint32_t>(os, p.dims.edge_dim);
    put<std::uint32_t>(os, p.dims.layers);
    put<std::uint32_t>(os, p.dims.hidden);
    put_matrix(os, p.embed);
    put_matrix(os, p.bias);
    put_matrix(os, p.one_body.w1);
    put_vec(os, p.one_body.b1);
    put_matrix(os, p.one_body.w2);
    put_vec(os, p.one_body.b2);
    put_vec(os, p.attn.w);
    put<double>(os, p.attn.b);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.channel.size()));
    for (const Matrix& w : p.channel) put_matrix(os, w);
    put<std::uint8_t>(os, adam ? 1 : 0);
    if (adam) {
        put<std::uint64_t>(os, adam->step);
        put_matrix(os, adam->embed_m);
        put_matrix(os, adam->embed_v);
        put_matrix(os, adam->bias_m);
        put_matrix(os, adam->bias_v);
        put_matrix(os, adam->w1_m);
        put_matrix(os, adam->w1_v);
        put_matrix(os, adam->w2_m);
        put_matrix(os, adam->w2_v);
        put_vec(os, adam->b1_m);
        put_vec(os, adam->b1_v);
        put_vec(os, adam->b2_m);
        put_vec(os, adam->b2_v);
        put_vec(os, adam->attn_w_m);
        put_vec(os, adam->attn_w_v);
        put<double>(os, adam->attn_b_m);
        put<double>(os, adam->attn_b_v);
        for (std::size_t k = 0; k < adam->channel_m.size(); ++k) {
            put_matrix(os, adam->channel_m[k]);
            put_matrix(os, adam->channel_v[k]);
        }
    }
}

struct Checkpoint {
    ModelParams params;
    std::optional<AdamState> adam;
};

inline Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw open_error(path);
    check_magic(is, "EPM1", path);
    Checkpoint ck;
    ModelParams& p = ck.params;
    p.dims.node_dim = get_val<std::uint32_t>(is, path);
    p.dims.edge_dim = get_val<std::uint32_t>(is, path);
    p.dims.layers = get_val<std::uint32_t>(is, path);
    p.dims.hidden = get_val<std::uint32_t>(is, path);
    p.embed = get_matrix(is, path);
    p.bias = get_matrix(is, path);
    p.one_body.w1 = get_matrix(is, path);
    p.one_body.b1 = get_vec(is, path);
    p.one_body.w2 = get_matrix(is, path);
    p.one_body.b2 = get_vec(is, path);
    p.attn.w = get_vec(is, path);
    p.attn.b = get_val<double>(is, path);
    const std::uint32_t channels = get_val<std::uint32_t>(is, path);
    for (std::uint32_t k = 0; k < channels; ++k) p.channel.push_back(get_matrix(is, path));
    const bool has_adam = get_val<std::uint8_t>(is, path) != 0;
    if (has_adam) {
        AdamState st(p);
        st.step = get_val<std::uint64_t>(is, path);
        st.embed_m = get_matrix(is, path);
        st.embed_v = get_matrix(is, path);
        st.bias_m = get_matrix(is, path);
        st.bias_v = get_matrix(is, path);
        st.w1_m = get_matrix(is, path);
        st.w1_v = get_matrix(is, path);
        st.w2_m = get_matrix(is, path);
        st.w2_v = get_matrix(is, path);
        st.b1_m = get_vec(is, path);
        st.b1_v = get_vec(is, path);
        st.b2_m = get_vec(is, path);
        st.b2_v = get_vec(is, path);
        st.attn_w_m = get_vec(is, path);
        st.attn_w_v = get_vec(is, path);
        st.attn_b_m = get_val<double>(is, path);
        st.attn_b_v = get_val<double>(is, path);
        for (std::uint32_t k = 0; k < channels; ++k) {
            st.channel_m[k] = get_matrix(is, path);
            st.channel_v[k] = get_matrix(is, path);
        }
        ck.adam.emplace(std::move(st));
    }
    return ck;
}

// --- cache.bin ----------------------------------------------------------------

inline void write_cache(const NeighborCache& cache, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw open_error(path);
    os.write("EPC1", 4);
    put<std::uint64_t>(os, cache.entries.size());
    for (const auto& node_entries : cache.entries) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(node_entries.size()));
        for (const CacheEntry& e : node_entries) {
            put<std::uint64_t>(os, e.neighbor);
            put_vec(os, e.edge_feats);
        }
    }
}

inline NeighborCache read_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw open_error(path);
    check_magic(is, "EPC1", path);
    NeighborCache cache;
    const std::uint64_t n = get_val<std::uint64_t>(is, path);
    cache.entries.resize(n);
    for (std::uint64_t v = 0; v < n; ++v) {
        const std::uint32_t count = get_val<std::uint32_t>(is, path);
        cache.entries[v].reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            CacheEntry e;
            e.neighbor = get_val<std::uint64_t>(is, path);
            e.edge_feats = get_vec(is, path);
            cache.entries[v].push_back(std::move(e));
        }
    }
    return cache;
}

// --- clustering artifacts -----------------------------------------------------

// user_external_id \t group_id
inline void write_groups(const ClusterModel& model, const Graph& g, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw open_error(path);
    for (std::size_t i = 0; i < model.user_ids.size(); ++i)
        os << g.nodes[model.user_ids[i]].external_id << '\t' << model.assignment[i] << '\n';
}

inline void write_centroids(const ClusterModel& model, const std::string& path) {
    EmbeddingFile ef;
    ef.dim = model.dim();
    for (std::size_t gi = 0; gi < model.centroids.rows(); ++gi)
        ef.rows.emplace_back(std::to_string(gi), Vec(model.centroids.row(gi).begin(),
                                                     model.centroids.row(gi).end()));
    write_embeddings(ef, path);
}

struct SeedRecord {
    std::string show_id;
    std::string user_id;
    std::uint64_t epoch_seconds = 0;
};

// show_id \t user_external_id \t epoch_seconds
inline std::vector<SeedRecord> read_seeds(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw open_error(path);
    std::vector<SeedRecord> out;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 3) throw line_error(path, ln, "expected 3 tab-separated columns");
        out.push_back(SeedRecord{cols[0], cols[1], parse_u64(cols[2], path, ln)});
    }
    return out;
}

// user_external_id \t score-or-source-group \t base|delta
inline void write_audience(std::span<const AudienceMember> members, const Graph& g,
                           const std::string& path) {
    std::ofstream os(path);
    if (!os) throw open_error(path);
    for (const AudienceMember& m : members) {
        os << g.nodes[m.user].external_id << '\t';
        if (m.from_delta)
            os << m.group;
        else
            os << fmt_double(m.score);
        os << '\t' << (m.from_delta ? "delta" : "base") << '\n';
    }
}

// --- hashing ------------------------------------------------------------------

inline std::string file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw open_error(path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        const std::streamsize n = is.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!is) break;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace io
}  // namespace epgnn

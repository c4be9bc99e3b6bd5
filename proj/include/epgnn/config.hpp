#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "epgnn/coldstart.hpp"
#include "epgnn/expansion.hpp"
#include "epgnn/graph.hpp"
#include "epgnn/model.hpp"
#include "epgnn/rng.hpp"
#include "epgnn/sampler.hpp"
#include "epgnn/trainer.hpp"
#include "epgnn/evaluator.hpp"
#include "epgnn/walker.hpp"

// One structured config drives every pipeline stage: INI-style sections with
// key = value lines, '#' or ';' comments. Unknown sections or keys are
// rejected. Any key can be overridden on the command line as
// --<section>.<key> <value>.

namespace epgnn {

struct PathsConfig {
    std::string interactions = "interactions.tsv";
    std::string combos = "combos.tsv";
    std::string seeds = "seeds.tsv";
    std::string newshow = "newshow.tsv";
    std::string out_dir = "out";
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::uint32_t workers = 1;
};

struct EvalConfig {
    double valid_fraction = 0.05;
    double test_fraction = 0.10;
    bool cosine = false;
};

struct ExpandConfig {
    std::uint64_t topn = 100;
    std::uint64_t budget = 100;
    DeltaMode mode = DeltaMode::Count;
    std::string shows;  // comma-separated external show-combo ids
};

struct ColdConfigText {
    std::uint32_t top_m = 20;
    OverlapMeasure measure = OverlapMeasure::MatchCount;
    bool fallback = false;
    std::string weights;  // "field:weight,field:weight"
};

struct PipelineConfig {
    PathsConfig paths;
    GraphConfig graph;
    NormScheme norm = NormScheme::Log1pMaxNorm;
    std::uint32_t parts = 1;
    std::string type_key = "type";
    std::string metapath = "user,show,user";
    WalkConfig walk;
    SampleConfig sample;
    ModelDims model;
    LossConfig loss;
    TrainConfig train;
    EvalConfig eval;
    ClusterConfig cluster;
    ExpandConfig expansion;
    ColdConfigText cold;
    RunConfig run;

    void validate() const;
    std::string serialize() const;
    std::uint64_t hash() const { return fnv1a64(serialize()); }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return std::string(s.substr(a, b - a));
}

inline std::uint64_t conf_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": bad integer '" + v + "'");
    }
}

inline double conf_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": bad number '" + v + "'");
    }
}

inline bool conf_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config key " + key + ": bad boolean '" + v + "'");
}

inline std::string fmt_conf_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct ConfField {
    std::string name;  // "section.key"
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&)> set;
};

inline const std::vector<ConfField>& conf_fields() {
    auto u64_field = [](const char* name, auto member) {
        return ConfField{name,
                         [member](const PipelineConfig& c) { return std::to_string(member(const_cast<PipelineConfig&>(c))); },
                         [member, n = std::string(name)](PipelineConfig& c, const std::string& v) {
                             member(c) = conf_u64(v, n);
                         }};
    };
    auto u32_field = [](const char* name, auto member) {
        return ConfField{name,
                         [member](const PipelineConfig& c) { return std::to_string(member(const_cast<PipelineConfig&>(c))); },
                         [member, n = std::string(name)](PipelineConfig& c, const std::string& v) {
                             member(c) = static_cast<std::uint32_t>(conf_u64(v, n));
                         }};
    };
    auto dbl_field = [](const char* name, auto member) {
        return ConfField{name,
                         [member](const PipelineConfig& c) { return fmt_conf_double(member(const_cast<PipelineConfig&>(c))); },
                         [member, n = std::string(name)](PipelineConfig& c, const std::string& v) {
                             member(c) = conf_double(v, n);
                         }};
    };
    auto bool_field = [](const char* name, auto member) {
        return ConfField{name,
                         [member](const PipelineConfig& c) {
                             return std::string(member(const_cast<PipelineConfig&>(c)) ? "true" : "false");
                         },
                         [member, n = std::string(name)](PipelineConfig& c, const std::string& v) {
                             member(c) = conf_bool(v, n);
                         }};
    };
    auto str_field = [](const char* name, auto member) {
        return ConfField{name,
                         [member](const PipelineConfig& c) { return member(const_cast<PipelineConfig&>(c)); },
                         [member](PipelineConfig& c, const std::string& v) { member(c) = v; }};
    };

    static const std::vector<ConfField> fields = {
        str_field("paths.interactions", [](PipelineConfig& c) -> std::string& { return c.paths.interactions; }),
        str_field("paths.combos", [](PipelineConfig& c) -> std::string& { return c.paths.combos; }),
        str_field("paths.seeds", [](PipelineConfig& c) -> std::string& { return c.paths.seeds; }),
        str_field("paths.newshow", [](PipelineConfig& c) -> std::string& { return c.paths.newshow; }),
        str_field("paths.out_dir", [](PipelineConfig& c) -> std::string& { return c.paths.out_dir; }),

        u64_field("graph.coclick_min", [](PipelineConfig& c) -> std::uint64_t& { return c.graph.coclick_min; }),
        u64_field("graph.degree_cap", [](PipelineConfig& c) -> std::uint64_t& { return c.graph.degree_cap; }),
        ConfField{"graph.norm",
                  [](const PipelineConfig& c) {
                      return std::string(c.norm == NormScheme::Log1pMaxNorm ? "log1pmax" : "minmax");
                  },
                  [](PipelineConfig& c, const std::string& v) {
                      if (v == "log1pmax") c.norm = NormScheme::Log1pMaxNorm;
                      else if (v == "minmax") c.norm = NormScheme::MinMax;
                      else throw std::invalid_argument("config key graph.norm: expected log1pmax or minmax");
                  }},
        u32_field("graph.parts", [](PipelineConfig& c) -> std::uint32_t& { return c.parts; }),
        str_field("graph.type_key", [](PipelineConfig& c) -> std::string& { return c.type_key; }),

        str_field("walk.metapath", [](PipelineConfig& c) -> std::string& { return c.metapath; }),
        u32_field("walk.length", [](PipelineConfig& c) -> std::uint32_t& { return c.walk.length; }),
        u32_field("walk.per_node", [](PipelineConfig& c) -> std::uint32_t& { return c.walk.per_node; }),
        u32_field("walk.window", [](PipelineConfig& c) -> std::uint32_t& { return c.walk.window; }),

        dbl_field("sample.s1", [](PipelineConfig& c) -> double& { return c.sample.s1_fraction; }),
        dbl_field("sample.s2", [](PipelineConfig& c) -> double& { return c.sample.s2_fraction; }),
        bool_field("sample.weighted", [](PipelineConfig& c) -> bool& { return c.sample.weighted; }),

        u32_field("model.node_dim", [](PipelineConfig& c) -> std::uint32_t& { return c.model.node_dim; }),
        u32_field("model.edge_dim", [](PipelineConfig& c) -> std::uint32_t& { return c.model.edge_dim; }),
        u32_field("model.layers", [](PipelineConfig& c) -> std::uint32_t& { return c.model.layers; }),
        u32_field("model.hidden", [](PipelineConfig& c) -> std::uint32_t& { return c.model.hidden; }),

        dbl_field("loss.q", [](PipelineConfig& c) -> double& { return c.loss.q; }),
        u32_field("loss.negatives", [](PipelineConfig& c) -> std::uint32_t& { return c.loss.negatives_per_positive; }),
        dbl_field("loss.neg_power", [](PipelineConfig& c) -> double& { return c.loss.neg_power; }),

        u32_field("train.epochs", [](PipelineConfig& c) -> std::uint32_t& { return c.train.epochs; }),
        u32_field("train.batch_size", [](PipelineConfig& c) -> std::uint32_t& { return c.train.batch_size; }),
        dbl_field("train.learning_rate", [](PipelineConfig& c) -> double& { return c.train.learning_rate; }),
        dbl_field("train.beta1", [](PipelineConfig& c) -> double& { return c.train.beta1; }),
        dbl_field("train.beta2", [](PipelineConfig& c) -> double& { return c.train.beta2; }),
        dbl_field("train.eps", [](PipelineConfig& c) -> double& { return c.train.eps; }),

        dbl_field("eval.valid_fraction", [](PipelineConfig& c) -> double& { return c.eval.valid_fraction; }),
        dbl_field("eval.test_fraction", [](PipelineConfig& c) -> double& { return c.eval.test_fraction; }),
        bool_field("eval.cosine", [](PipelineConfig& c) -> bool& { return c.eval.cosine; }),

        u32_field("cluster.groups", [](PipelineConfig& c) -> std::uint32_t& { return c.cluster.groups; }),
        u32_field("cluster.max_iters", [](PipelineConfig& c) -> std::uint32_t& { return c.cluster.max_iters; }),

        u64_field("expansion.topn", [](PipelineConfig& c) -> std::uint64_t& { return c.expansion.topn; }),
        u64_field("expansion.budget", [](PipelineConfig& c) -> std::uint64_t& { return c.expansion.budget; }),
        ConfField{"expansion.mode",
                  [](const PipelineConfig& c) {
                      return std::string(c.expansion.mode == DeltaMode::Count ? "count" : "density");
                  },
                  [](PipelineConfig& c, const std::string& v) {
                      if (v == "count") c.expansion.mode = DeltaMode::Count;
                      else if (v == "density") c.expansion.mode = DeltaMode::Density;
                      else throw std::invalid_argument("config key expansion.mode: expected count or density");
                  }},
        str_field("expansion.shows", [](PipelineConfig& c) -> std::string& { return c.expansion.shows; }),

        u32_field("coldstart.top_m", [](PipelineConfig& c) -> std::uint32_t& { return c.cold.top_m; }),
        ConfField{"coldstart.measure",
                  [](const PipelineConfig& c) {
                      return std::string(c.cold.measure == OverlapMeasure::MatchCount ? "count" : "jaccard");
                  },
                  [](PipelineConfig& c, const std::string& v) {
                      if (v == "count") c.cold.measure = OverlapMeasure::MatchCount;
                      else if (v == "jaccard") c.cold.measure = OverlapMeasure::Jaccard;
                      else throw std::invalid_argument("config key coldstart.measure: expected count or jaccard");
                  }},
        bool_field("coldstart.fallback", [](PipelineConfig& c) -> bool& { return c.cold.fallback; }),
        str_field("coldstart.weights", [](PipelineConfig& c) -> std::string& { return c.cold.weights; }),

        u64_field("run.seed", [](PipelineConfig& c) -> std::uint64_t& { return c.run.seed; }),
        u32_field("run.workers", [](PipelineConfig& c) -> std::uint32_t& { return c.run.workers; }),
    };
    return fields;
}

inline const ConfField* find_field(const std::string& name) {
    for (const ConfField& f : conf_fields())
        if (f.name == name) return &f;
    return nullptr;
}

}  // namespace detail

inline void apply_override(PipelineConfig& cfg, const std::string& dotted, const std::string& value) {
    const detail::ConfField* f = detail::find_field(dotted);
    if (!f) throw std::invalid_argument("unknown config key: " + dotted);
    f->set(cfg, value);
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    PipelineConfig cfg;
    std::string line, section;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw std::runtime_error(path + ":" + std::to_string(ln) + ": bad section");
            section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(ln) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(t).substr(0, eq));
        const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        if (section.empty())
            throw std::runtime_error(path + ":" + std::to_string(ln) + ": key outside any section");
        try {
            apply_override(cfg, section + "." + key, value);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(path + ":" + std::to_string(ln) + ": " + e.what());
        }
    }
    return cfg;
}

inline std::string PipelineConfig::serialize() const {
    std::vector<std::string> lines;
    for (const detail::ConfField& f : detail::conf_fields()) lines.push_back(f.name + " = " + f.get(*this));
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const std::string& l : lines) {
        out += l;
        out.push_back('\n');
    }
    return out;
}

// "field:weight,field:weight" -> FieldWeights; empty string -> empty map
inline FieldWeights field_weights_from_config(const std::string& text) {
    FieldWeights out;
    if (text.empty()) return out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ',') {
            const std::string item = detail::trim(std::string_view(text).substr(start, i - start));
            start = i + 1;
            if (item.empty()) continue;
            const std::size_t colon = item.find(':');
            if (colon == std::string::npos || colon == 0)
                throw std::invalid_argument("coldstart.weights: bad item '" + item + "'");
            out[item.substr(0, colon)] =
                detail::conf_double(item.substr(colon + 1), "coldstart.weights");
        }
    }
    return out;
}

inline void PipelineConfig::validate() const {
    walk.validate();
    sample.validate();
    model.validate();
    loss.validate();
    train.validate();
    cluster.validate();
    SplitConfig sc{eval.valid_fraction, eval.test_fraction, 0};
    sc.validate();
    if (parts < 1) throw std::invalid_argument("graph.parts must be >= 1");
    if (run.workers < 1) throw std::invalid_argument("run.workers must be >= 1");
    if (cold.top_m < 1) throw std::invalid_argument("coldstart.top_m must be >= 1");
    MetaPath::parse(metapath);  // throws on malformed patterns
    field_weights_from_config(cold.weights);
}

}  // namespace epgnn

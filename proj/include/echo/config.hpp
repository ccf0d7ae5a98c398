#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "echo/clustering.hpp"
#include "echo/error.hpp"
#include "echo/extraction.hpp"
#include "echo/io.hpp"
#include "echo/router.hpp"
#include "echo/trainer.hpp"

namespace echo {

/// Every tunable of the detection pipeline plus its file paths.
///
/// File grammar: one `key = value` per line; blank lines and lines starting
/// with `#` are ignored, as is anything after a ` #` on a value line. Keys are
/// case-sensitive, unknown or repeated keys are errors.
struct PipelineConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  RouterConfig router;
  TrainConfig train;
  ExtractConfig extract;
  LouvainConfig louvain;
  std::size_t lpa_max_iters = 100;

  std::string graph_path;
  std::string features_path;
  std::string truth_path;
  std::string partition_path;
  std::string embeddings_path;
  std::string attention_path;
  std::string similarity_path;

  /// Copies the shared seed into the per-phase configs.
  PipelineConfig resolved() const {
    PipelineConfig c = *this;
    c.train.seed = seed;
    c.louvain.seed = seed;
    return c;
  }

  void validate() const {
    router.validate();
    train.validate();
    extract.validate();
    louvain.validate();
  }
};

namespace detail {

/// Shortest text that parses back to the same double.
inline std::string fmt_real(double v) {
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  if (!parse_int(v, out)) throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

inline double parse_number(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_real(v, out)) throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

inline bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

struct ConfigKey {
  const char* name;
  const char* help;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

#define ECHO_COUNT_KEY(NAME, FIELD, HELP)                                                    \
  ConfigKey {                                                                                \
    NAME, HELP, [](const PipelineConfig& c) { return std::to_string(c.FIELD); },             \
        [](PipelineConfig& c, const std::string& v) {                                        \
          c.FIELD = static_cast<decltype(c.FIELD)>(parse_count(NAME, v));                    \
        }                                                                                    \
  }
#define ECHO_REAL_KEY(NAME, FIELD, HELP)                                                                        \
  ConfigKey {                                                                                                   \
    NAME, HELP, [](const PipelineConfig& c) { return fmt_real(c.FIELD); },                                      \
        [](PipelineConfig& c, const std::string& v) { c.FIELD = parse_number(NAME, v); }                        \
  }
#define ECHO_FLAG_KEY(NAME, FIELD, HELP)                                                                        \
  ConfigKey {                                                                                                   \
    NAME, HELP, [](const PipelineConfig& c) { return std::string(c.FIELD ? "true" : "false"); },                \
        [](PipelineConfig& c, const std::string& v) { c.FIELD = parse_flag(NAME, v); }                          \
  }
#define ECHO_PATH_KEY(NAME, FIELD, HELP)                                                                        \
  ConfigKey {                                                                                                   \
    NAME, HELP, [](const PipelineConfig& c) { return c.FIELD; },                                                \
        [](PipelineConfig& c, const std::string& v) { c.FIELD = v; }                                            \
  }

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      ECHO_COUNT_KEY("seed", seed, "master seed for every random stream"),
      ECHO_COUNT_KEY("threads", threads, "worker threads, 0 = hardware default"),
      ConfigKey{"pathway", "auto, isolating or densifying",
                [](const PipelineConfig& c) {
                  return c.router.force ? std::string(to_string(*c.router.force)) : std::string("auto");
                },
                [](PipelineConfig& c, const std::string& v) {
                  if (v == "auto") {
                    c.router.force.reset();
                  } else {
                    c.router.force = parse_pathway(v);
                  }
                }},
      ECHO_REAL_KEY("degree_threshold", router.degree_threshold, "isolate above this mean degree"),
      ECHO_REAL_KEY("homophily_threshold", router.homophily_threshold, "isolate below this homophily ratio"),
      ECHO_REAL_KEY("sparsity_threshold", router.sparsity_threshold, "feature sparsity reporting threshold"),
      ECHO_COUNT_KEY("random_pair_samples", router.random_pair_samples, "random pairs for the homophily baseline"),
      ECHO_COUNT_KEY("exact_max_nodes", router.exact_max_nodes, "exact homophily baseline up to this N"),
      ECHO_COUNT_KEY("epochs", train.epochs, "full-batch training epochs"),
      ECHO_REAL_KEY("lr", train.adam.learning_rate, "Adam learning rate"),
      ECHO_REAL_KEY("weight_decay", train.adam.weight_decay, "decoupled weight decay"),
      ECHO_COUNT_KEY("embed_dim", train.embed_dim, "embedding width d"),
      ECHO_COUNT_KEY("mlp_depth", train.mlp_depth, "layers of the isolating encoder"),
      ECHO_COUNT_KEY("steps", train.steps, "diffusion steps K"),
      ECHO_REAL_KEY("temperature", train.loss.temperature, "contrastive temperature tau"),
      ECHO_COUNT_KEY("neg_per_node", train.loss.neg_per_node, "negatives per node P"),
      ECHO_REAL_KEY("epsilon", train.loss.epsilon, "stabilizer inside the loss logarithms"),
      ECHO_REAL_KEY("sparsity", train.loss.sparsity, "attention L1 weight lambda"),
      ECHO_COUNT_KEY("shard_threshold", train.loss.shard_elem_threshold, "shard when N*P*d exceeds this"),
      ECHO_COUNT_KEY("k_min", extract.k_min, "smallest similarity neighborhood"),
      ECHO_COUNT_KEY("k_max", extract.k_max, "largest similarity neighborhood"),
      ECHO_REAL_KEY("delta", extract.delta, "minimum cosine similarity of an edge"),
      ECHO_COUNT_KEY("chunk_rows", extract.chunk_rows, "rows per extraction chunk"),
      ECHO_FLAG_KEY("one_sided", extract.one_sided, "keep pairs selected by either endpoint"),
      ECHO_COUNT_KEY("max_passes", louvain.max_passes, "Louvain aggregation passes"),
      ECHO_REAL_KEY("min_gain", louvain.min_modularity_gain, "stop when a pass gains less modularity"),
      ECHO_REAL_KEY("resolution", louvain.resolution, "modularity resolution gamma"),
      ECHO_COUNT_KEY("lpa_max_iters", lpa_max_iters, "label propagation sweeps"),
      ECHO_PATH_KEY("graph", graph_path, "input edge list"),
      ECHO_PATH_KEY("features", features_path, "input features (CSV or binary)"),
      ECHO_PATH_KEY("truth", truth_path, "ground-truth partition for evaluation"),
      ECHO_PATH_KEY("out", partition_path, "output partition"),
      ECHO_PATH_KEY("embeddings", embeddings_path, "output embeddings"),
      ECHO_PATH_KEY("attention", attention_path, "output attention weights"),
      ECHO_PATH_KEY("similarity", similarity_path, "output similarity graph"),
  };
  return keys;
}

#undef ECHO_COUNT_KEY
#undef ECHO_REAL_KEY
#undef ECHO_FLAG_KEY
#undef ECHO_PATH_KEY

inline const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

}  // namespace detail

/// Sets one key; throws ConfigError on an unknown key or a malformed value.
inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  const auto* k = detail::find_key(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  k->set(cfg, value);
}

inline std::string get_config_value(const PipelineConfig& cfg, const std::string& key) {
  const auto* k = detail::find_key(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  return k->get(cfg);
}

/// Applies `key = value` lines from text; `origin` names the source in errors.
inline void parse_config_text(PipelineConfig& cfg, const std::string& text, const std::string& origin = "config") {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find(" #");
    if (hash != std::string::npos) line.resize(hash);
    auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key(detail::trim(s.substr(0, eq)));
    const std::string value(detail::trim(s.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' set twice");
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

inline void load_config_file(PipelineConfig& cfg, const std::string& path) {
  auto in = detail::open_in(path);
  std::ostringstream text;
  text << in.rdbuf();
  parse_config_text(cfg, text.str(), path);
}

/// All keys in table order as `key = value` lines; parse_config_text on the
/// result reproduces cfg.
inline std::string dump_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  for (const auto& k : detail::config_keys()) out << k.name << " = " << k.get(cfg) << '\n';
  return out.str();
}

}  // namespace echo

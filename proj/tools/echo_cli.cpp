// Command-line front end: one subcommand per pipeline stage plus `detect`.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "echo/echo.hpp"
#include "echo/report_json.hpp"

namespace {

using echo::PipelineConfig;

/// Options shared by every pipeline subcommand. Flags are recorded as config
/// key overrides and applied after the config file.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> overrides;
  bool dry_run = false;
  bool timings = false;
  bool verbose = false;
  std::string json_path;
};

void key_option(CLI::App* app, Common& c, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&c, key](const std::string& v) { c.overrides.emplace_back(key, v); }, help);
}

void common_options(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value config file");
  app->add_option("--set", c.sets, "override any config key (key=value)");
  key_option(app, c, "--seed", "seed", "master seed");
  key_option(app, c, "--threads", "threads", "worker threads (0 = all cores)");
}

void train_options(CLI::App* app, Common& c) {
  key_option(app, c, "--pathway", "pathway", "auto, isolating or densifying");
  key_option(app, c, "--epochs", "epochs", "training epochs");
  key_option(app, c, "--lr", "lr", "learning rate");
  key_option(app, c, "--steps", "steps", "diffusion steps K");
  key_option(app, c, "--temperature", "temperature", "contrastive temperature");
  key_option(app, c, "--sparsity", "sparsity", "attention L1 weight");
  key_option(app, c, "--embed-dim", "embed_dim", "embedding width");
  key_option(app, c, "--neg-per-node", "neg_per_node", "negatives per node");
  app->add_flag("--verbose", c.verbose, "print the loss of every epoch to stderr");
}

void extract_options(CLI::App* app, Common& c) {
  key_option(app, c, "--k-min", "k_min", "smallest neighborhood");
  key_option(app, c, "--k-max", "k_max", "largest neighborhood");
  key_option(app, c, "--delta", "delta", "similarity threshold");
  key_option(app, c, "--chunk", "chunk_rows", "rows per extraction chunk");
  app->add_flag_callback("--one-sided", [&c] { c.overrides.emplace_back("one_sided", "true"); },
                         "keep pairs chosen by either endpoint");
}

void cluster_options(CLI::App* app, Common& c) {
  key_option(app, c, "--resolution", "resolution", "modularity resolution");
  key_option(app, c, "--max-passes", "max_passes", "Louvain passes");
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg;
  if (!c.config_path.empty()) echo::load_config_file(cfg, c.config_path);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw echo::ConfigError("--set expects key=value, got '" + kv + "'");
    echo::set_config_value(cfg, std::string(echo::detail::trim(kv.substr(0, eq))),
                           std::string(echo::detail::trim(kv.substr(eq + 1))));
  }
  for (const auto& [k, v] : c.overrides) echo::set_config_value(cfg, k, v);
  cfg.validate();
  echo::set_num_threads(cfg.threads);
  return cfg;
}

void require_path(const std::string& path, const std::string& what) {
  if (path.empty()) throw echo::ConfigError("missing required " + what);
}

echo::Graph load_graph(const PipelineConfig& cfg) {
  require_path(cfg.graph_path, "--graph");
  return echo::load_edge_list(cfg.graph_path);
}

echo::FeatureMatrix load_features(const PipelineConfig& cfg, const echo::Graph& g) {
  require_path(cfg.features_path, "--features");
  auto x = echo::load_features(cfg.features_path);
  if (x.rows() != g.num_nodes()) {
    throw echo::FormatError("'" + cfg.features_path + "' has " + std::to_string(x.rows()) + " rows but the graph has " +
                            std::to_string(g.num_nodes()) + " nodes");
  }
  return x;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = echo::detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw echo::IoError("write failed for '" + path + "'");
}

void print_timings(const echo::PhaseTimings& t, std::size_t n) {
  std::cout << std::setprecision(6) << "phase1_s=" << t.phase1_s << '\n'
            << "phase2_s=" << t.phase2_s << '\n'
            << "phase3_s=" << t.phase3_s << '\n'
            << "total_s=" << t.total_s << '\n'
            << "nodes_per_s=" << echo::throughput(n, t.total_s) << '\n';
}

echo::EpochCallback epoch_logger(bool verbose) {
  if (!verbose) return {};
  return [](std::size_t epoch, const echo::LossBreakdown& b) {
    std::cerr << "epoch " << epoch << " loss " << std::setprecision(8) << b.total << " contrastive " << b.contrastive
              << (b.sharded ? " sharded" : "") << '\n';
  };
}

void print_route(const echo::RouterReport& r) {
  std::cout << std::setprecision(std::numeric_limits<double>::max_digits10) << "feature_sparsity=" << r.feature_sparsity
            << '\n'
            << "mean_degree=" << r.mean_degree << '\n'
            << "assortativity_ratio=" << r.assortativity_ratio << '\n'
            << "exact_baseline=" << (r.exact_baseline ? "true" : "false") << '\n'
            << "pathway=" << echo::to_string(r.decision) << (r.forced ? " (forced)" : "") << '\n';
}

int cmd_version() {
  std::cout << "echo " << echo::kVersion << '\n'
            << "compiler " << __VERSION__ << '\n'
            << "hardware_threads " << std::thread::hardware_concurrency() << '\n'
            << "default_embed_dim " << echo::kDefaultEmbedDim << '\n'
            << "shard_elem_threshold " << echo::kDefaultShardElemThreshold << '\n';
  return 0;
}

int dry_run(const PipelineConfig& cfg) {
  std::cout << echo::dump_config(cfg);
  return 0;
}

int cmd_route(const Common& c) {
  const auto cfg = resolve(c);
  if (c.dry_run) return dry_run(cfg);
  const auto g = load_graph(cfg);
  const auto x = load_features(cfg, g);
  const auto r = echo::run_route(g, x, cfg);
  print_route(r);
  if (!c.json_path.empty()) write_json(c.json_path, r);
  return 0;
}

int cmd_train(const Common& c) {
  const auto cfg = resolve(c);
  if (c.dry_run) return dry_run(cfg);
  require_path(cfg.embeddings_path, "--out (embeddings path)");
  const auto g = load_graph(cfg);
  const auto x = load_features(cfg, g);
  const auto r = echo::run_route(g, x, cfg);
  const auto res = echo::run_train(g, x, r, cfg, epoch_logger(c.verbose));
  echo::save_embeddings(cfg.embeddings_path, res.embeddings);
  if (!cfg.attention_path.empty()) echo::save_attention(cfg.attention_path, res.attention);
  std::cout << "pathway=" << echo::to_string(r.decision) << '\n'
            << "final_loss=" << std::setprecision(8) << res.report.history.back().total << '\n'
            << "sharded=" << (res.report.history.back().sharded ? "true" : "false") << '\n';
  if (c.timings) {
    std::cout << std::setprecision(6) << "sampling_s=" << res.report.seconds_sampling << '\n'
              << "forward_s=" << res.report.seconds_forward << '\n'
              << "backward_s=" << res.report.seconds_backward << '\n'
              << "update_s=" << res.report.seconds_update << '\n'
              << "total_s=" << res.report.seconds_total << '\n';
  }
  return 0;
}

int cmd_extract(const Common& c) {
  const auto cfg = resolve(c);
  if (c.dry_run) return dry_run(cfg);
  require_path(cfg.embeddings_path, "--embeddings");
  require_path(cfg.similarity_path, "--out (similarity graph path)");
  const auto g = load_graph(cfg);
  const auto s = echo::load_embeddings(cfg.embeddings_path);
  const auto sg = echo::run_extract(s, g, cfg);
  echo::save_weighted_edges(cfg.similarity_path, sg);
  std::cout << "similarity_edges=" << sg.num_edges() << '\n';
  return 0;
}

int cmd_cluster(const Common& c) {
  const auto cfg = resolve(c);
  if (c.dry_run) return dry_run(cfg);
  require_path(cfg.similarity_path, "--sim");
  require_path(cfg.partition_path, "--out");
  const auto sg = echo::load_weighted_edges(cfg.similarity_path);
  const auto res = echo::run_cluster(sg, cfg);
  echo::save_partition(cfg.partition_path, res.partition);
  std::cout << "communities=" << res.partition.num_communities() << '\n'
            << "modularity=" << std::setprecision(10) << res.pass_modularity.back() << '\n'
            << "passes=" << res.passes << '\n';
  return 0;
}

int cmd_lpa(const Common& c) {
  const auto cfg = resolve(c);
  if (c.dry_run) return dry_run(cfg);
  require_path(cfg.partition_path, "--out");
  const auto g = load_graph(cfg);
  const auto p = echo::run_lpa(g, cfg);
  echo::save_partition(cfg.partition_path, p);
  std::cout << "communities=" << p.num_communities() << '\n';
  return 0;
}

int cmd_eval(const Common& c) {
  const auto cfg = resolve(c);
  if (c.dry_run) return dry_run(cfg);
  require_path(cfg.truth_path, "--truth");
  require_path(cfg.partition_path, "--pred");
  const auto truth = echo::load_partition(cfg.truth_path);
  const auto pred = echo::load_partition(cfg.partition_path);
  echo::EvalReport r;
  if (!cfg.graph_path.empty()) {
    r = echo::evaluate(load_graph(cfg), truth, pred);
  } else {
    r = echo::evaluate(truth, pred);
  }
  std::cout << std::setprecision(std::numeric_limits<double>::max_digits10) << "nmi=" << r.nmi << '\n'
            << "n_communities_pred=" << r.n_communities_pred << '\n'
            << "n_communities_true=" << r.n_communities_true << '\n';
  if (r.modularity_pred) std::cout << "modularity_pred=" << *r.modularity_pred << '\n';
  if (!c.json_path.empty()) write_json(c.json_path, r);
  return 0;
}

struct LfrOptions {
  echo::LfrConfig lfr;
  double sigma = 0.5;
  std::string prefix;
};

int cmd_gen_lfr(const LfrOptions& o) {
  const auto [g, truth] = echo::generate_lfr(o.lfr);
  echo::Rng feat_rng = echo::Rng(o.lfr.seed).fork(1);
  echo::FeatureSynthConfig fcfg;
  fcfg.noise_sigma = o.sigma;
  const auto x = echo::synthesize_features(g, truth, fcfg, feat_rng);
  echo::save_edge_list(o.prefix + ".edges", g);
  echo::save_partition(o.prefix + ".truth", truth);
  echo::save_features_csv(o.prefix + ".features.csv", x);
  std::cout << "nodes=" << g.num_nodes() << '\n'
            << "edges=" << g.num_edges() << '\n'
            << "mean_degree=" << echo::mean_degree(g) << '\n'
            << "communities=" << truth.num_communities() << '\n'
            << "mixing=" << echo::realized_mixing(g, truth) << '\n';
  return 0;
}

int cmd_detect(const Common& c) {
  const auto cfg = resolve(c);
  if (c.dry_run) return dry_run(cfg);
  require_path(cfg.partition_path, "--out");
  const auto g = load_graph(cfg);
  const auto x = load_features(cfg, g);
  const auto res = echo::detect(g, x, cfg, epoch_logger(c.verbose));
  const auto& part = res.clustering.partition;
  echo::save_partition(cfg.partition_path, part);
  if (!cfg.embeddings_path.empty()) echo::save_embeddings(cfg.embeddings_path, res.training.embeddings);
  if (!cfg.attention_path.empty()) echo::save_attention(cfg.attention_path, res.training.attention);
  if (!cfg.similarity_path.empty()) echo::save_weighted_edges(cfg.similarity_path, res.similarity);

  nlohmann::json report = {{"route", res.route},
                           {"n_nodes", g.num_nodes()},
                           {"n_communities_pred", part.num_communities()},
                           {"similarity_edges", res.similarity.num_edges()},
                           {"louvain_pass_modularity", res.clustering.pass_modularity},
                           {"modularity_pred", echo::modularity(g, part)},
                           {"timings", res.timings},
                           {"nodes_per_s", echo::throughput(g.num_nodes(), res.timings.total_s)},
                           {"config", echo::config_json(cfg)}};
  std::cout << "pathway=" << echo::to_string(res.route.decision) << '\n'
            << "communities=" << part.num_communities() << '\n'
            << "similarity_edges=" << res.similarity.num_edges() << '\n';
  if (!cfg.truth_path.empty()) {
    const auto truth = echo::load_partition(cfg.truth_path);
    const double score = echo::nmi(truth, part);
    report["nmi"] = score;
    report["n_communities_true"] = truth.num_communities();
    std::cout << std::setprecision(6) << "nmi=" << score << '\n';
  }
  if (c.timings) print_timings(res.timings, g.num_nodes());
  if (!c.json_path.empty()) write_json(c.json_path, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attributed-graph community detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("echo ") + echo::kVersion);

  Common c;
  LfrOptions lfr;
  std::string mode;

  auto* version = app.add_subcommand("version", "print build information");
  auto* info = app.add_subcommand("info", "print build information");

  auto* route = app.add_subcommand("route", "compute routing heuristics and the encoder decision");
  common_options(route, c);
  key_option(route, c, "--graph", "graph", "edge list");
  key_option(route, c, "--features", "features", "feature file");
  key_option(route, c, "--pathway", "pathway", "auto, isolating or densifying");
  route->add_option("--json", c.json_path, "write the report as JSON");
  route->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");

  auto* train = app.add_subcommand("train", "train embeddings");
  common_options(train, c);
  key_option(train, c, "--graph", "graph", "edge list");
  key_option(train, c, "--features", "features", "feature file");
  key_option(train, c, "--out", "embeddings", "output embeddings");
  key_option(train, c, "--dump-attention", "attention", "write final attention weights");
  train_options(train, c);
  train->add_flag("--timings", c.timings, "print per-stage training seconds");
  train->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");

  auto* extract = app.add_subcommand("extract", "build the similarity graph from embeddings");
  common_options(extract, c);
  key_option(extract, c, "--graph", "graph", "edge list (for degrees)");
  key_option(extract, c, "--embeddings", "embeddings", "input embeddings");
  key_option(extract, c, "--out", "similarity", "output similarity graph");
  extract_options(extract, c);
  extract->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");

  auto* cluster = app.add_subcommand("cluster", "Louvain on a similarity graph");
  common_options(cluster, c);
  key_option(cluster, c, "--sim", "similarity", "input similarity graph");
  key_option(cluster, c, "--out", "out", "output partition");
  cluster_options(cluster, c);
  cluster->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");

  auto* lpa = app.add_subcommand("lpa", "label propagation baseline");
  common_options(lpa, c);
  key_option(lpa, c, "--graph", "graph", "edge list");
  key_option(lpa, c, "--out", "out", "output partition");
  key_option(lpa, c, "--max-iters", "lpa_max_iters", "sweeps");
  lpa->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");

  auto* eval = app.add_subcommand("eval", "score a partition against ground truth");
  common_options(eval, c);
  key_option(eval, c, "--truth", "truth", "ground-truth partition");
  key_option(eval, c, "--pred", "out", "predicted partition");
  key_option(eval, c, "--graph", "graph", "edge list for modularity (optional)");
  eval->add_option("--json", c.json_path, "write the report as JSON");
  eval->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");

  auto* gen = app.add_subcommand("gen-lfr", "generate an LFR benchmark with noisy features");
  gen->add_option("--n", lfr.lfr.n, "nodes");
  gen->add_option("--mu", lfr.lfr.mu, "mixing parameter");
  gen->add_option("--mean-degree", lfr.lfr.mean_degree, "target mean degree");
  gen->add_option("--max-degree", lfr.lfr.max_degree, "degree cap");
  gen->add_option("--min-community", lfr.lfr.min_community, "smallest community");
  gen->add_option("--max-community", lfr.lfr.max_community, "largest community");
  gen->add_option("--degree-exponent", lfr.lfr.degree_exponent, "degree power-law exponent");
  gen->add_option("--community-exponent", lfr.lfr.community_exponent, "community-size exponent");
  gen->add_option("--sigma", lfr.sigma, "feature noise standard deviation");
  gen->add_option("--seed", lfr.lfr.seed, "seed");
  gen->add_option("--out-prefix", lfr.prefix, "writes PREFIX.edges, PREFIX.truth, PREFIX.features.csv")->required();

  auto* det = app.add_subcommand("detect", "route, train, extract and cluster in one run");
  common_options(det, c);
  key_option(det, c, "--graph", "graph", "edge list");
  key_option(det, c, "--features", "features", "feature file");
  key_option(det, c, "--out", "out", "output partition");
  key_option(det, c, "--truth", "truth", "ground truth, adds NMI to the report");
  key_option(det, c, "--dump-embeddings", "embeddings", "write final embeddings");
  key_option(det, c, "--dump-attention", "attention", "write final attention weights");
  key_option(det, c, "--dump-similarity", "similarity", "write the similarity graph");
  train_options(det, c);
  extract_options(det, c);
  cluster_options(det, c);
  det->add_flag("--timings", c.timings, "print per-phase seconds and throughput");
  det->add_option("--json", c.json_path, "write the run report as JSON");
  det->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*version || *info) return cmd_version();
    if (*route) return cmd_route(c);
    if (*train) return cmd_train(c);
    if (*extract) return cmd_extract(c);
    if (*cluster) return cmd_cluster(c);
    if (*lpa) return cmd_lpa(c);
    if (*eval) return cmd_eval(c);
    if (*gen) return cmd_gen_lfr(lfr);
    if (*det) return cmd_detect(c);
  } catch (const echo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return echo::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

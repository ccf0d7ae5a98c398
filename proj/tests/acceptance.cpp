// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli_util.hpp"
#include "echo/echo.hpp"
#include "gradient_suite.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace echo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& what, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", id, what.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

PipelineConfig lfr_preset(std::uint64_t seed) {
  PipelineConfig cfg;
  load_config_file(cfg, std::string(ECHO_PRESET_DIR) + "/lfr.conf");
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

FeatureMatrix lfr_features(const LfrGraph& g, std::uint64_t seed) {
  Rng rng = Rng(seed).fork(1);
  return synthesize_features(g.graph, g.truth, FeatureSynthConfig{}, rng);
}

// ---- 1: sharded negatives agree with the dense evaluation

Outcome sharded_vs_dense() {
  const auto t0 = Clock::now();
  const auto lfr = generate_lfr(LfrConfig{.n = 500, .mu = 0.3, .seed = 1});
  const auto x = lfr_features(lfr, 1);
  TrainConfig cfg;
  cfg.embed_dim = 32;
  cfg.steps = 2;
  cfg.loss.neg_per_node = 64;
  auto model = init_model<float>(Pathway::Densifying, x.cols(), cfg);
  auto inputs = prepare_encoder_inputs<float>(lfr.graph, x);
  const auto edges = DirectedEdges::from_graph(lfr.graph);
  Rng neg(3);
  const auto pool = sample_negatives(500, 64, neg);
  auto params = model.parameters();

  struct Run {
    double loss;
    LossBreakdown bd;
    std::vector<std::vector<double>> grads;
  };
  auto run = [&](std::size_t threshold) {
    LossConfig lc = cfg.loss;
    lc.shard_elem_threshold = threshold;
    for (auto* p : params) p->zero_grad();
    ad::Tape<float> tape;
    auto out = forward(model, inputs, edges, tape);
    auto r = compute_loss(*out.s, *out.alpha, edges, pool, lc, tape);
    tape.backward(*r.loss);
    Run res{r.breakdown.total, r.breakdown, {}};
    for (auto* p : params) res.grads.push_back(p->grad);
    return res;
  };
  const auto dense = run(kDefaultShardElemThreshold);
  const auto shard = run(64 * 32 * 37);  // 37 nodes per chunk
  auto rel = [](double a, double b) {
    const double d = std::max(std::abs(a), std::abs(b));
    return d == 0.0 ? 0.0 : std::abs(a - b) / d;
  };
  double worst = rel(dense.loss, shard.loss);
  for (std::size_t k = 0; k < dense.grads.size(); ++k)
    for (std::size_t i = 0; i < dense.grads[k].size(); ++i) worst = std::max(worst, rel(dense.grads[k][i], shard.grads[k][i]));
  const double secs = seconds_since(t0);
  const bool ok = !dense.bd.sharded && shard.bd.sharded && shard.bd.chunks_used == 14 && worst < 1e-6 && secs < 5.0;
  return {ok, "max rel err " + fmt(worst) + ", chunks " + std::to_string(shard.bd.chunks_used) + ", " + fmt(secs) + " s"};
}

// ---- 2: tiled extraction equals the dense oracle

Outcome extraction_vs_oracle() {
  const auto t0 = Clock::now();
  const std::size_t n = 300, d = 32;
  Rng rng(8);
  std::vector<float> x(n * d);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  // A few exact duplicates and a zero row exercise ties and exclusion.
  std::copy_n(x.begin(), d, x.begin() + 10 * d);
  std::copy_n(x.begin(), d, x.begin() + 20 * d);
  std::fill_n(x.begin() + 30 * d, d, 0.0f);
  std::vector<std::size_t> degree(n);
  for (auto& k : degree) k = rng.below(45);
  ExtractConfig cfg;
  cfg.delta = 0.05;
  std::vector<std::size_t> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = adaptive_k(degree[i], cfg);
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> w;
  const auto expect = oracle::knn_edges(x, n, d, k, cfg.delta, false, &w);
  const EmbeddingMatrix s(n, d, x);
  std::size_t mismatched = 0;
  for (std::size_t chunk : {1u, 7u, 64u, 300u}) {
    cfg.chunk_rows = chunk;
    const auto got = extract_similarity_graph(s, degree, cfg);
    bool same = got.edges.size() == expect.size();
    auto it = expect.begin();
    for (std::size_t e = 0; same && e < got.edges.size(); ++e, ++it) {
      same = std::make_pair(got.edges[e].i, got.edges[e].j) == *it && got.edges[e].w == w.at(*it);
    }
    if (!same) ++mismatched;
  }
  const double secs = seconds_since(t0);
  return {mismatched == 0 && secs < 5.0 && !expect.empty(), std::to_string(expect.size()) + " edges, " +
                                                               std::to_string(mismatched) + " chunk sizes differ, " +
                                                               fmt(secs) + " s"};
}

// ---- 3: finite differences

Outcome finite_differences() {
  double worst = 0.0;
  std::string worst_name;
  std::size_t count = 0;
  for (const auto& list : {gradsuite::op_checks(), gradsuite::pipeline_checks()}) {
    for (const auto& r : list) {
      ++count;
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        worst_name = r.name;
      }
    }
  }
  return {worst < 1e-4, std::to_string(count) + " checks, worst " + fmt(worst) + " in " + worst_name};
}

// ---- 4 and 5: LFR benchmark

struct LfrScores {
  std::vector<double> echo;
  std::vector<double> lpa;
  double seconds = 0.0;
};

LfrScores lfr_scores(double mu) {
  LfrScores s;
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto g = generate_lfr(LfrConfig{.mu = mu, .seed = seed});
    const auto x = lfr_features(g, seed);
    const auto cfg = lfr_preset(seed);
    const auto res = detect(g.graph, x, cfg);
    s.echo.push_back(nmi(g.truth, res.clustering.partition));
    s.lpa.push_back(nmi(g.truth, run_lpa(g.graph, cfg)));
  }
  s.seconds = seconds_since(t0);
  return s;
}

std::string list(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : " ") + fmt(x, 3);
  return out;
}

Outcome lfr_hard() {
  const auto s = lfr_scores(0.5);
  const double me = median(s.echo);
  const double ml = median(s.lpa);
  return {me >= 0.20 && me > ml && s.seconds < 600.0, "median NMI " + fmt(me) + " [" + list(s.echo) + "] vs LPA " +
                                                          fmt(ml) + " [" + list(s.lpa) + "], " + fmt(s.seconds) + " s"};
}

Outcome lfr_easy() {
  const auto s = lfr_scores(0.1);
  const double me = median(s.echo);
  return {me >= 0.9, "median NMI " + fmt(me) + " [" + list(s.echo) + "], " + fmt(s.seconds) + " s"};
}

// ---- 6: Louvain

Outcome louvain_checks() {
  const auto karate = WeightedGraph::from_graph(load_edge_list(std::string(ECHO_TEST_DATA) + "/karate.edges"));
  Rng rng = Rng(0).fork(kClusterStream);
  const auto res = louvain_detailed(karate, LouvainConfig{}, rng);
  bool monotone = true;
  for (std::size_t k = 1; k < res.pass_modularity.size(); ++k) {
    monotone = monotone && res.pass_modularity[k] > res.pass_modularity[k - 1];
  }
  const double q = res.pass_modularity.back();
  const double q_oracle = oracle::modularity(karate, res.partition.labels());

  WeightedGraph tri{6, {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}, {3, 4, 1}, {3, 5, 1}, {4, 5, 1}}};
  std::vector<std::uint32_t> best;
  double best_q = -1.0;
  for (const auto& p : oracle::all_partitions(6)) {
    const double v = oracle::modularity(tri, p);
    if (v > best_q + 1e-12) {
      best_q = v;
      best = p;
    }
  }
  bool exact = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) exact = exact && louvain(tri, LouvainConfig{.seed = seed}) == Partition(best);
  const bool ok = q >= 0.40 && monotone && std::abs(q - q_oracle) < 1e-12 && exact;
  return {ok, "karate Q " + fmt(q, 6) + " over " + std::to_string(res.passes) + " passes" +
                  (monotone ? ", monotone" : ", NOT monotone") + "; triangles " + (exact ? "exact" : "wrong") +
                  " (oracle Q " + fmt(best_q) + ")"};
}

// ---- 7: NMI

Outcome nmi_checks() {
  Rng rng(2);
  const Partition a(std::vector<std::uint32_t>{0, 0, 1, 1});
  const Partition b(std::vector<std::uint32_t>{0, 1, 0, 1});
  bool ok = nmi(a, a) == 1.0 && std::abs(nmi(a, b)) < 1e-15;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 10 + rng.below(300);
    std::vector<std::uint32_t> x(n), y(n);
    const auto kx = 1 + rng.below(12), ky = 1 + rng.below(12);
    for (auto& v : x) v = rng.below(kx);
    for (auto& v : y) v = rng.below(ky);
    std::vector<std::uint32_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0u);
    rng.shuffle(std::span<std::uint32_t>(perm));
    auto yp = y;
    for (auto& v : yp) v = perm[v];
    const double base = nmi(Partition(x), Partition(y));
    ok = ok && nmi(Partition(x), Partition(x)) == 1.0;
    worst = std::max({worst, std::abs(base - nmi(Partition(y), Partition(x))),
                      std::abs(base - nmi(Partition(x), Partition(yp))),
                      std::abs(base - std::clamp(oracle::nmi(x, y), 0.0, 1.0))});
  }
  return {ok && worst <= 1e-12, "identity/independence exact, max deviation " + fmt(worst) + " over 100 pairs"};
}

// ---- 8: large extraction under a memory cap

Outcome large_extraction() {
  constexpr rlim_t kCap = 4ull << 30;
  const auto t0 = Clock::now();
  const pid_t child = ::fork();
  if (child == 0) {
    rlimit lim{kCap, kCap};
    if (::setrlimit(RLIMIT_AS, &lim) != 0) ::_exit(3);
    try {
      const std::size_t n = 200'000, d = 32;
      Rng rng(42);
      // 1000 noisy cluster centers so that neighborhoods are meaningful.
      std::vector<float> centers(1000 * d);
      for (auto& v : centers) v = static_cast<float>(rng.normal());
      std::vector<float> x(n * d);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.below(1000);
        for (std::size_t k = 0; k < d; ++k) x[i * d + k] = centers[c * d + k] + static_cast<float>(rng.normal(0.0, 0.5));
      }
      std::vector<std::size_t> degree(n);
      for (auto& k : degree) k = 1 + rng.below(40);
      const EmbeddingMatrix s(n, d, std::move(x));
      const auto g = extract_similarity_graph(s, degree, ExtractConfig{});
      std::printf("  large extraction: %zu edges\n", g.num_edges());
      std::fflush(stdout);
      ::_exit(g.num_edges() > 0 ? 0 : 4);
    } catch (const std::bad_alloc&) {
      ::_exit(5);
    } catch (...) {
      ::_exit(6);
    }
  }
  int status = 0;
  ::waitpid(child, &status, 0);
  const double secs = seconds_since(t0);
  rusage ru{};
  ::getrusage(RUSAGE_CHILDREN, &ru);
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code == 0 && secs < 900.0, "exit " + std::to_string(code) + ", " + fmt(secs) + " s, peak RSS " +
                                         fmt(ru.ru_maxrss / 1024.0) + " MiB under a 4096 MiB address-space cap"};
}

// ---- 9: detect determinism

Outcome detect_determinism() {
  const auto dir = fs::temp_directory_path() / ("echo_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string prefix = (dir / "g").string();
  if (cli::run("gen-lfr --mu 0.3 --seed 7 --out-prefix " + prefix).code != 0) return {false, "gen-lfr failed"};
  std::vector<std::string> outputs;
  for (int rep = 0; rep < 3; ++rep) {
    const auto out = (dir / ("p" + std::to_string(rep) + ".txt")).string();
    const auto r = cli::run("detect --config " + std::string(ECHO_PRESET_DIR) + "/lfr.conf --seed 7 --graph " + prefix +
                            ".edges --features " + prefix + ".features.csv --out " + out);
    if (r.code != 0) return {false, "detect exited " + std::to_string(r.code)};
    outputs.push_back(cli::slurp(out));
  }
  fs::remove_all(dir);
  const bool same = outputs[0] == outputs[1] && outputs[1] == outputs[2] && !outputs[0].empty();
  return {same, same ? "3 runs, identical partition files" : "partition files differ"};
}

}  // namespace

int main() {
  report(1, "sharded and dense loss/gradients agree (N=500, d=32, P=64)", sharded_vs_dense);
  report(2, "extraction matches dense oracle for chunk sizes 1, 7, 64, 300", extraction_vs_oracle);
  report(3, "finite-difference gradients for every op and the full pipeline", finite_differences);
  report(4, "LFR mu=0.5: median NMI >= 0.20 and above LPA", lfr_hard);
  report(5, "LFR mu=0.1: median NMI >= 0.9", lfr_easy);
  report(6, "Louvain: karate Q >= 0.40, monotone passes, two triangles exact", louvain_checks);
  report(7, "NMI identity, independence, symmetry, permutation invariance", nmi_checks);
  report(8, "extraction at N=200000, d=32 within 4 GB and 15 min", large_extraction);
  report(9, "detect is bit-for-bit deterministic", detect_determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

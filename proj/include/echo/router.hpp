#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "echo/error.hpp"
#include "echo/graph.hpp"
#include "echo/rng.hpp"

namespace echo {

enum class Pathway { Isolating, Densifying };

inline const char* to_string(Pathway p) { return p == Pathway::Isolating ? "isolating" : "densifying"; }

inline Pathway parse_pathway(const std::string& s) {
  if (s == "isolating" || s == "mlp") return Pathway::Isolating;
  if (s == "densifying" || s == "sage") return Pathway::Densifying;
  throw ConfigError("unknown encoder pathway '" + s + "' (expected isolating|densifying)");
}

struct RouterConfig {
  double degree_threshold = 20.0;
  /// Isolating is chosen below this edge-vs-random cosine ratio. An
  /// alternative reading of the rule uses 0.1 (set homophily_threshold).
  double homophily_threshold = 1.5;
  /// Reported only; sparsity never gates the decision on its own.
  double sparsity_threshold = 0.85;
  /// Random pairs drawn for the homophily baseline; 0 selects 10 * N capped at 1e6.
  std::size_t random_pair_samples = 0;
  /// At or below this node count the baseline is computed exactly over all pairs.
  std::size_t exact_max_nodes = 2000;
  std::optional<Pathway> force;

  void validate() const {
    if (!(degree_threshold > 0) || !(homophily_threshold > 0) || !(sparsity_threshold > 0)) {
      throw ConfigError("router thresholds must be positive");
    }
  }
};

struct RouterReport {
  double feature_sparsity = 0.0;
  double mean_degree = 0.0;
  double assortativity_ratio = 0.0;
  Pathway decision = Pathway::Isolating;
  std::size_t sample_pairs_used = 0;
  bool exact_baseline = false;
  bool forced = false;

  friend bool operator==(const RouterReport&, const RouterReport&) = default;
};

/// Fraction of entries that are exactly zero.
inline double feature_sparsity(const FeatureMatrix& x) {
  if (x.empty()) throw ConfigError("feature_sparsity: empty matrix");
  std::size_t zeros = 0;
  for (float v : x.data()) zeros += (v == 0.0f);
  return static_cast<double>(zeros) / static_cast<double>(x.data().size());
}

namespace detail {

/// Rows scaled to unit length in double; zero rows stay zero.
inline std::vector<double> unit_rows(const FeatureMatrix& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += out[i * d + j] * out[i * d + j];
    const double norm = std::sqrt(s);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = norm > 0.0 ? out[i * d + j] / norm : 0.0;
  }
  return out;
}

inline double dot_rows(const std::vector<double>& u, std::size_t d, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += u[a * d + j] * u[b * d + j];
  return s;
}

}  // namespace detail

struct AssortativityDetail {
  double ratio = 0.0;
  double mean_edge_cosine = 0.0;
  double mean_random_cosine = 0.0;
  std::size_t pairs_used = 0;
  bool exact = false;
};

/// Mean cosine over edges divided by the mean cosine over random node pairs
/// (u != v). Zero-norm rows contribute cosine 0. For N <= exact_max_nodes the
/// random baseline is exact: with unit rows x_u, the mean over all unordered
/// pairs is (|sum x_u|^2 - sum |x_u|^2) / (N (N - 1)).
inline AssortativityDetail assortativity_detail(const Graph& g, const FeatureMatrix& x, Rng& rng,
                                                std::size_t samples, std::size_t exact_max_nodes = 2000) {
  check_consistent(g, x);
  if (g.num_edges() == 0) throw ConfigError("H_R undefined: graph has no edges");
  if (samples == 0) throw ConfigError("assortativity: samples must be >= 1");
  const std::size_t n = g.num_nodes();
  const std::size_t d = x.cols();
  const auto unit = detail::unit_rows(x);

  AssortativityDetail out;
  double edge_sum = 0.0;
  for (const auto& e : g.edges()) edge_sum += detail::dot_rows(unit, d, e.u, e.v);
  out.mean_edge_cosine = edge_sum / static_cast<double>(g.num_edges());

  if (n <= exact_max_nodes) {
    std::vector<double> total(d, 0.0);
    double self = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        total[j] += unit[i * d + j];
        self += unit[i * d + j] * unit[i * d + j];
      }
    }
    double sq = 0.0;
    for (double t : total) sq += t * t;
    out.mean_random_cosine = (sq - self) / (static_cast<double>(n) * static_cast<double>(n - 1));
    out.pairs_used = n * (n - 1) / 2;
    out.exact = true;
  } else {
    double s = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
      const auto u = static_cast<std::size_t>(rng.below(n));
      std::size_t v = u;
      while (v == u) v = static_cast<std::size_t>(rng.below(n));
      s += detail::dot_rows(unit, d, u, v);
    }
    out.mean_random_cosine = s / static_cast<double>(samples);
    out.pairs_used = samples;
  }
  out.ratio = out.mean_edge_cosine / std::max(out.mean_random_cosine, 1e-9);
  return out;
}

inline double assortativity_ratio(const Graph& g, const FeatureMatrix& x, Rng& rng, std::size_t samples,
                                  std::size_t exact_max_nodes = 2000) {
  return assortativity_detail(g, x, rng, samples, exact_max_nodes).ratio;
}

/// Pure decision rule: isolate when the graph is dense or weakly homophilic.
inline Pathway routing_decision(double mean_deg, double homophily_ratio, const RouterConfig& cfg) {
  if (mean_deg > cfg.degree_threshold || homophily_ratio < cfg.homophily_threshold) return Pathway::Isolating;
  return Pathway::Densifying;
}

inline RouterReport route(const Graph& g, const FeatureMatrix& x, const RouterConfig& cfg, Rng& rng) {
  cfg.validate();
  check_consistent(g, x);
  RouterReport r;
  r.feature_sparsity = feature_sparsity(x);
  r.mean_degree = mean_degree(g);
  const std::size_t samples = cfg.random_pair_samples != 0
                                  ? cfg.random_pair_samples
                                  : std::min<std::size_t>(10 * g.num_nodes(), 1'000'000);
  if (cfg.force && g.num_edges() == 0) {
    // A forced route still reports what it can; H_R needs at least one edge.
    r.assortativity_ratio = 0.0;
  } else {
    auto h = assortativity_detail(g, x, rng, std::max<std::size_t>(samples, 1), cfg.exact_max_nodes);
    r.assortativity_ratio = h.ratio;
    r.sample_pairs_used = h.pairs_used;
    r.exact_baseline = h.exact;
  }
  if (cfg.force) {
    r.decision = *cfg.force;
    r.forced = true;
  } else {
    r.decision = routing_decision(r.mean_degree, r.assortativity_ratio, cfg);
  }
  return r;
}

}  // namespace echo

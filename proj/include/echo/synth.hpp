#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <unordered_set>
#include <vector>

#include "echo/error.hpp"
#include "echo/graph.hpp"
#include "echo/rng.hpp"

namespace echo {

struct LfrConfig {
  std::size_t n = 500;
  double mean_degree = 15.0;
  std::size_t max_degree = 50;
  double mu = 0.5;
  double degree_exponent = 2.0;
  double community_exponent = 1.0;
  std::size_t min_community = 20;
  std::size_t max_community = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 2) throw ConfigError("lfr: n must be >= 2");
    if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("lfr: mu must lie in [0, 1]");
    if (min_community < 1 || min_community > max_community || max_community > n) {
      throw ConfigError("lfr: need 1 <= min_community <= max_community <= n");
    }
    if (max_degree < 1 || max_degree >= n) throw ConfigError("lfr: need 1 <= max_degree < n");
    if (!(mean_degree >= 1.0 && mean_degree < static_cast<double>(max_degree))) {
      throw ConfigError("lfr: need 1 <= mean_degree < max_degree");
    }
    if (!(degree_exponent > 0.0) || !(community_exponent >= 0.0)) throw ConfigError("lfr: exponents must be positive");
  }
};

struct LfrGraph {
  Graph graph;
  Partition truth;
};

namespace detail {

/// Integral of x^a over [lo, hi].
inline double power_integral(double a, double lo, double hi) {
  if (std::abs(a + 1.0) < 1e-12) return std::log(hi / lo);
  return (std::pow(hi, a + 1.0) - std::pow(lo, a + 1.0)) / (a + 1.0);
}

/// Mean of the continuous density proportional to x^-gamma on [lo, hi].
inline double power_law_mean(double gamma, double lo, double hi) {
  return power_integral(1.0 - gamma, lo, hi) / power_integral(-gamma, lo, hi);
}

/// Inverse-CDF draw from x^-gamma on [lo, hi].
inline double power_law_draw(double gamma, double lo, double hi, Rng& rng) {
  const double u = rng.uniform();
  if (std::abs(gamma - 1.0) < 1e-12) return lo * std::pow(hi / lo, u);
  const double a = std::pow(lo, 1.0 - gamma);
  const double b = std::pow(hi, 1.0 - gamma);
  return std::pow(a + u * (b - a), 1.0 / (1.0 - gamma));
}

/// Lower cutoff that gives the truncated power law the requested mean.
inline double solve_lower_cutoff(double gamma, double target, double hi) {
  double lo = 1.0;
  double up = hi;
  if (power_law_mean(gamma, lo, hi) > target) throw ConfigError("lfr: mean degree too small for the degree law");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + up);
    (power_law_mean(gamma, mid, hi) < target ? lo : up) = mid;
  }
  return 0.5 * (lo + up);
}

inline std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

/// Configuration-model matching of a stub list. Invalid pairs (self loops,
/// duplicates, pairs rejected by `allowed`) are reshuffled up to `retries`
/// times, then repaired by swapping endpoints with a random accepted edge;
/// stubs that still cannot be placed are dropped.
template <class Allowed>
void wire_stubs(std::vector<NodeId> stubs, Allowed allowed, std::unordered_set<std::uint64_t>& present,
                std::vector<Edge>& out, Rng& rng, int retries = 20) {
  if (stubs.size() % 2 == 1) stubs.pop_back();
  auto ok = [&](NodeId a, NodeId b) { return a != b && allowed(a, b) && !present.count(pair_key(a, b)); };
  std::vector<Edge> placed;
  for (int round = 0; round <= retries && !stubs.empty(); ++round) {
    rng.shuffle(std::span<NodeId>(stubs));
    std::vector<NodeId> left;
    for (std::size_t k = 0; k + 1 < stubs.size(); k += 2) {
      const NodeId a = stubs[k];
      const NodeId b = stubs[k + 1];
      if (ok(a, b)) {
        present.insert(pair_key(a, b));
        placed.push_back({std::min(a, b), std::max(a, b)});
      } else {
        left.push_back(a);
        left.push_back(b);
      }
    }
    stubs.swap(left);
  }
  for (std::size_t k = 0; k + 1 < stubs.size() && !placed.empty(); k += 2) {
    const NodeId a = stubs[k];
    const NodeId b = stubs[k + 1];
    for (int attempt = 0; attempt < 50; ++attempt) {
      const std::size_t pick = static_cast<std::size_t>(rng.below(placed.size()));
      const Edge e = placed[pick];
      // (a, b) + (x, y) -> (a, x) + (b, y); try both orientations of (x, y).
      const NodeId x = rng.below(2) ? e.u : e.v;
      const NodeId y = x == e.u ? e.v : e.u;
      if (a == x || b == y || pair_key(a, x) == pair_key(b, y)) continue;
      present.erase(pair_key(e.u, e.v));
      if (ok(a, x) && ok(b, y)) {
        present.insert(pair_key(a, x));
        present.insert(pair_key(b, y));
        placed[pick] = {std::min(a, x), std::max(a, x)};
        placed.push_back({std::min(b, y), std::max(b, y)});
        break;
      }
      present.insert(pair_key(e.u, e.v));
    }
  }
  out.insert(out.end(), placed.begin(), placed.end());
}

inline std::vector<std::size_t> sample_degrees(const LfrConfig& cfg, Rng& rng) {
  const double hi = static_cast<double>(cfg.max_degree);
  const double lo = solve_lower_cutoff(cfg.degree_exponent, cfg.mean_degree, hi);
  std::vector<std::size_t> deg(cfg.n);
  for (int attempt = 0; attempt < 100; ++attempt) {
    double sum = 0.0;
    for (auto& k : deg) {
      const double x = power_law_draw(cfg.degree_exponent, lo, hi, rng);
      k = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(x)), 1, cfg.max_degree);
      sum += static_cast<double>(k);
    }
    if (std::abs(sum / static_cast<double>(cfg.n) - cfg.mean_degree) <= 0.1 * cfg.mean_degree) return deg;
  }
  throw ConfigError("lfr: could not realize the requested mean degree");
}

inline std::vector<std::size_t> sample_community_sizes(const LfrConfig& cfg, Rng& rng) {
  const double lo = static_cast<double>(cfg.min_community);
  const double hi = static_cast<double>(cfg.max_community) + 0.5;
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<std::size_t> sizes;
    std::size_t total = 0;
    while (total < cfg.n) {
      const double x = power_law_draw(cfg.community_exponent, lo, hi, rng);
      const auto s = std::clamp<std::size_t>(static_cast<std::size_t>(x), cfg.min_community, cfg.max_community);
      sizes.push_back(s);
      total += s;
    }
    // Trim the overshoot from communities above the minimum, largest first.
    std::size_t excess = total - cfg.n;
    while (excess > 0) {
      auto it = std::max_element(sizes.begin(), sizes.end());
      if (*it <= cfg.min_community) break;
      --*it;
      --excess;
    }
    if (excess == 0) return sizes;
  }
  throw ConfigError("lfr: community sizes cannot sum to n within [min_community, max_community]");
}

}  // namespace detail

/// LFR-style benchmark graph with a planted partition.
///
/// Degrees follow a power law truncated at max_degree whose lower cutoff is
/// solved so the expected degree equals mean_degree; community sizes follow a
/// power law on [min_community, max_community]. Node i gets
/// round((1 - mu) deg(i)) internal stubs and the rest external. Nodes are
/// placed largest internal degree first into a community that can host that
/// many neighbors when one exists. Stubs are matched by a configuration model
/// with rejection and repair.
inline LfrGraph generate_lfr(const LfrConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = cfg.n;
  const auto deg = detail::sample_degrees(cfg, rng);
  const auto sizes = detail::sample_community_sizes(cfg, rng);
  std::vector<std::size_t> k_in(n);
  for (std::size_t i = 0; i < n; ++i) {
    k_in[i] = static_cast<std::size_t>(std::lround((1.0 - cfg.mu) * static_cast<double>(deg[i])));
  }

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0u);
  rng.shuffle(std::span<NodeId>(order));
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return k_in[a] > k_in[b]; });

  std::vector<std::uint32_t> label(n, 0);
  std::vector<std::size_t> free(sizes);
  std::vector<std::uint32_t> candidates;
  for (NodeId v : order) {
    candidates.clear();
    std::size_t free_total = 0;
    for (std::uint32_t c = 0; c < sizes.size(); ++c) {
      if (free[c] > 0 && sizes[c] > k_in[v]) {
        candidates.push_back(c);
        free_total += free[c];
      }
    }
    std::uint32_t chosen = 0;
    if (candidates.empty()) {
      // No community is large enough: use the largest one with room.
      std::size_t best = 0;
      for (std::uint32_t c = 0; c < sizes.size(); ++c) {
        if (free[c] > 0 && sizes[c] > best) {
          best = sizes[c];
          chosen = c;
        }
      }
    } else {
      // Free slots weight the pick so every community fills up.
      auto r = static_cast<std::size_t>(rng.below(free_total));
      for (auto c : candidates) {
        if (r < free[c]) {
          chosen = c;
          break;
        }
        r -= free[c];
      }
    }
    label[v] = chosen;
    --free[chosen];
  }

  std::unordered_set<std::uint64_t> present;
  std::vector<Edge> edges;
  std::vector<std::vector<NodeId>> internal(sizes.size());
  std::vector<NodeId> external;
  for (NodeId v = 0; v < n; ++v) {
    const std::size_t kin = std::min(k_in[v], sizes[label[v]] - 1);
    internal[label[v]].insert(internal[label[v]].end(), kin, v);
    external.insert(external.end(), deg[v] - std::min(k_in[v], deg[v]), v);
  }
  for (auto& stubs : internal) {
    detail::wire_stubs(std::move(stubs), [](NodeId, NodeId) { return true; }, present, edges, rng);
  }
  detail::wire_stubs(std::move(external), [&](NodeId a, NodeId b) { return label[a] != label[b]; }, present, edges,
                     rng);
  return {Graph::from_edges(n, edges), Partition(std::move(label))};
}

inline LfrGraph generate_lfr(const LfrConfig& cfg) {
  Rng rng(cfg.seed);
  return generate_lfr(cfg, rng);
}

/// Fraction of each node's edges that leave its community, averaged over
/// nodes with at least one edge.
inline double realized_mixing(const Graph& g, const Partition& truth) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (g.degree(v) == 0) continue;
    std::size_t out = 0;
    for (NodeId u : g.neighbors(v)) out += truth[u] != truth[v];
    sum += static_cast<double>(out) / static_cast<double>(g.degree(v));
    ++counted;
  }
  return counted ? sum / static_cast<double>(counted) : 0.0;
}

struct FeatureSynthConfig {
  double noise_sigma = 0.5;
  bool include_degree = true;

  void validate() const {
    if (!(noise_sigma >= 0.0)) throw ConfigError("feature noise sigma must be >= 0");
  }
};

/// [deg(i) / max deg | one-hot community] plus i.i.d. N(0, sigma^2) noise on
/// every entry, drawn row by row.
inline FeatureMatrix synthesize_features(const Graph& g, const Partition& truth, const FeatureSynthConfig& cfg,
                                         Rng& rng) {
  cfg.validate();
  if (truth.size() != g.num_nodes()) throw ConfigError("synthesize_features: truth must cover every node");
  const auto canon = truth.canonical();
  const std::size_t k = canon.num_communities();
  const std::size_t off = cfg.include_degree ? 1 : 0;
  const std::size_t d = off + k;
  std::size_t max_deg = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) max_deg = std::max(max_deg, g.degree(v));
  std::vector<float> data(g.num_nodes() * d, 0.0f);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    float* row = data.data() + static_cast<std::size_t>(v) * d;
    if (cfg.include_degree && max_deg > 0) {
      row[0] = static_cast<float>(static_cast<double>(g.degree(v)) / static_cast<double>(max_deg));
    }
    row[off + canon[v]] = 1.0f;
    if (cfg.noise_sigma > 0.0) {
      for (std::size_t c = 0; c < d; ++c) row[c] = static_cast<float>(row[c] + rng.normal(0.0, cfg.noise_sigma));
    }
  }
  return FeatureMatrix(g.num_nodes(), d, std::move(data));
}

}  // namespace echo

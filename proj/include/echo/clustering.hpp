#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "echo/error.hpp"
#include "echo/graph.hpp"
#include "echo/rng.hpp"
#include "echo/weighted_graph.hpp"

namespace echo {

struct LouvainConfig {
  std::size_t max_passes = 20;
  double min_modularity_gain = 1e-7;
  double resolution = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(resolution > 0.0)) throw ConfigError("louvain resolution must be > 0");
    if (!(min_modularity_gain >= 0.0)) throw ConfigError("louvain min_modularity_gain must be >= 0");
    if (max_passes == 0) throw ConfigError("louvain max_passes must be >= 1");
  }
};

namespace detail {

/// Symmetric weighted adjacency in CSR form with the diagonal kept apart.
/// strength[i] = sum_j A_ij, where the diagonal entry counts once.
struct WeightedAdjacency {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  std::vector<NodeId> targets;
  std::vector<double> weights;
  std::vector<double> self;
  std::vector<double> strength;
  double two_m = 0.0;

  static WeightedAdjacency from_edges(std::size_t n, std::span<const WeightedEdge> edges,
                                      std::span<const double> self_weights = {}) {
    WeightedAdjacency a;
    a.n = n;
    a.offsets.assign(n + 1, 0);
    a.self.assign(n, 0.0);
    for (std::size_t i = 0; i < self_weights.size(); ++i) a.self[i] = self_weights[i];
    for (const auto& e : edges) {
      if (e.i >= n || e.j >= n) throw ConfigError("weighted graph edge references a node beyond n");
      if (!(e.w >= 0.0)) throw ConfigError("modularity requires non-negative weights");
      if (e.i == e.j) {
        a.self[e.i] += e.w;
        continue;
      }
      ++a.offsets[e.i + 1];
      ++a.offsets[e.j + 1];
    }
    for (std::size_t i = 0; i < n; ++i) a.offsets[i + 1] += a.offsets[i];
    a.targets.resize(a.offsets[n]);
    a.weights.resize(a.offsets[n]);
    std::vector<std::size_t> cursor(a.offsets.begin(), a.offsets.end() - 1);
    for (const auto& e : edges) {
      if (e.i == e.j) continue;
      a.targets[cursor[e.i]] = e.j;
      a.weights[cursor[e.i]++] = e.w;
      a.targets[cursor[e.j]] = e.i;
      a.weights[cursor[e.j]++] = e.w;
    }
    a.strength.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = a.self[i];
      for (std::size_t p = a.offsets[i]; p < a.offsets[i + 1]; ++p) s += a.weights[p];
      a.strength[i] = s;
      a.two_m += s;
    }
    return a;
  }

  static WeightedAdjacency from_graph(const WeightedGraph& g) { return from_edges(g.n_nodes, g.edges); }
};

/// Q = (1/2m) sum_c [ in_c - gamma tot_c^2 / 2m ], in_c summing A_ij over
/// ordered pairs inside c (diagonal once).
inline double modularity(const WeightedAdjacency& a, std::span<const std::uint32_t> label, double resolution) {
  if (label.size() != a.n) throw ConfigError("modularity: partition size differs from node count");
  if (a.n == 0) throw ConfigError("modularity: empty graph");
  if (!(a.two_m > 0.0)) return 0.0;
  const std::size_t c = label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
  std::vector<double> in(c, 0.0);
  std::vector<double> tot(c, 0.0);
  for (std::size_t i = 0; i < a.n; ++i) {
    in[label[i]] += a.self[i];
    tot[label[i]] += a.strength[i];
    for (std::size_t p = a.offsets[i]; p < a.offsets[i + 1]; ++p) {
      if (label[a.targets[p]] == label[i]) in[label[i]] += a.weights[p];
    }
  }
  double q = 0.0;
  for (std::size_t k = 0; k < c; ++k) q += in[k] - resolution * tot[k] * tot[k] / a.two_m;
  return q / a.two_m;
}

}  // namespace detail

/// Weighted modularity with resolution gamma:
///   Q = (1/2m) sum_ij [A_ij - gamma k_i k_j / 2m] delta(c_i, c_j).
/// An edgeless graph has Q = 0.
inline double modularity(const WeightedGraph& g, const Partition& p, double resolution = 1.0) {
  const auto a = detail::WeightedAdjacency::from_graph(g);
  const auto canon = p.canonical();
  return detail::modularity(a, canon.labels(), resolution);
}

inline double modularity(const Graph& g, const Partition& p, double resolution = 1.0) {
  return modularity(WeightedGraph::from_graph(g), p, resolution);
}

struct LouvainResult {
  Partition partition;
  /// Modularity of the flat partition after each accepted pass, preceded by
  /// the singleton partition's value.
  std::vector<double> pass_modularity;
  std::size_t passes = 0;
};

namespace detail {

/// Local-move phase on one level. Returns the community of every node,
/// relabeled to 0..c-1 in order of first appearance.
inline std::vector<std::uint32_t> local_moves(const WeightedAdjacency& a, double gamma, double min_gain, Rng& rng) {
  const std::size_t n = a.n;
  std::vector<std::uint32_t> comm(n);
  std::iota(comm.begin(), comm.end(), 0u);
  std::vector<double> tot(a.strength);
  std::vector<double> link(n, 0.0);  // weight from the current node to each community
  std::vector<char> marked(n, 0);
  std::vector<std::uint32_t> touched;
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0u);
  double q = modularity(a, comm, gamma);
  for (;;) {
    rng.shuffle(std::span<NodeId>(order));
    std::size_t moved = 0;
    for (NodeId i : order) {
      const std::uint32_t own = comm[i];
      const double ki = a.strength[i];
      touched.assign(1, own);
      marked[own] = 1;
      for (std::size_t p = a.offsets[i]; p < a.offsets[i + 1]; ++p) {
        const std::uint32_t c = comm[a.targets[p]];
        if (!marked[c]) {
          marked[c] = 1;
          touched.push_back(c);
        }
        link[c] += a.weights[p];
      }
      tot[own] -= ki;
      // Gain of inserting i into c, up to the common factor 1/m.
      auto gain = [&](std::uint32_t c) { return link[c] - gamma * tot[c] * ki / a.two_m; };
      std::uint32_t best = own;
      double best_gain = gain(own);
      for (std::uint32_t c : touched) {
        const double g = gain(c);
        if (g > best_gain) {
          best = c;
          best_gain = g;
        }
      }
      tot[best] += ki;
      if (best != own) {
        comm[i] = best;
        ++moved;
      }
      for (std::uint32_t c : touched) {
        link[c] = 0.0;
        marked[c] = 0;
      }
    }
    if (moved == 0) break;
    const double q_new = modularity(a, comm, gamma);
    const bool small = q_new - q <= min_gain;
    q = q_new;
    if (small) break;
  }
  std::vector<std::uint32_t> remap(n, UINT32_MAX);
  std::uint32_t next = 0;
  for (auto& c : comm) {
    if (remap[c] == UINT32_MAX) remap[c] = next++;
    c = remap[c];
  }
  return comm;
}

/// Community graph: A'_cd = sum_{i in c, j in d} A_ij.
inline WeightedAdjacency aggregate(const WeightedAdjacency& a, std::span<const std::uint32_t> comm, std::size_t c) {
  std::vector<double> self(c, 0.0);
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i < a.n; ++i) {
    self[comm[i]] += a.self[i];
    for (std::size_t p = a.offsets[i]; p < a.offsets[i + 1]; ++p) {
      const NodeId j = a.targets[p];
      const std::uint32_t ci = comm[i];
      const std::uint32_t cj = comm[j];
      if (ci == cj) {
        self[ci] += a.weights[p];  // both orientations land here, matching A'_cc
      } else if (i < j) {
        edges.push_back({std::min(ci, cj), std::max(ci, cj), a.weights[p]});
      }
    }
  }
  std::sort(edges.begin(), edges.end(),
            [](const WeightedEdge& x, const WeightedEdge& y) { return x.i != y.i ? x.i < y.i : x.j < y.j; });
  std::vector<WeightedEdge> merged;
  for (const auto& e : edges) {
    if (!merged.empty() && merged.back().i == e.i && merged.back().j == e.j) {
      merged.back().w += e.w;
    } else {
      merged.push_back(e);
    }
  }
  return WeightedAdjacency::from_edges(c, merged, self);
}

}  // namespace detail

/// Two-phase Louvain: local moves in a shuffled order until a sweep gains no
/// more than min_modularity_gain, then aggregation of communities into nodes.
/// A pass is kept only if it raises the modularity of the flat partition by
/// more than min_modularity_gain, so the recorded sequence is increasing.
inline LouvainResult louvain_detailed(const WeightedGraph& sg, const LouvainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (sg.n_nodes == 0) throw ConfigError("louvain: graph has no nodes");
  const auto base = detail::WeightedAdjacency::from_graph(sg);
  LouvainResult res;
  std::vector<std::uint32_t> flat(sg.n_nodes);
  std::iota(flat.begin(), flat.end(), 0u);
  double q = detail::modularity(base, flat, cfg.resolution);
  res.pass_modularity.push_back(q);
  if (!(base.two_m > 0.0)) {
    res.partition = Partition{std::move(flat)};
    return res;
  }
  detail::WeightedAdjacency level = base;
  for (std::size_t pass = 0; pass < cfg.max_passes; ++pass) {
    auto comm = detail::local_moves(level, cfg.resolution, cfg.min_modularity_gain, rng);
    const std::size_t c = comm.empty() ? 0 : *std::max_element(comm.begin(), comm.end()) + 1;
    if (c == level.n) break;
    std::vector<std::uint32_t> next_flat(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) next_flat[i] = comm[flat[i]];
    const double q_new = detail::modularity(base, next_flat, cfg.resolution);
    if (!(q_new - q > cfg.min_modularity_gain)) break;
    flat = std::move(next_flat);
    q = q_new;
    res.pass_modularity.push_back(q);
    ++res.passes;
    level = detail::aggregate(level, comm, c);
  }
  res.partition = Partition{std::move(flat)};
  return res;
}

inline Partition louvain(const WeightedGraph& sg, const LouvainConfig& cfg, Rng& rng) {
  return louvain_detailed(sg, cfg, rng).partition;
}

inline Partition louvain(const WeightedGraph& sg, const LouvainConfig& cfg) {
  Rng rng(cfg.seed);
  return louvain(sg, cfg, rng);
}

/// Asynchronous label propagation. Each sweep visits nodes in a fresh random
/// order and gives each node the label most frequent among its neighbors,
/// breaking ties uniformly at random. Stops once every node already holds a
/// most frequent neighbor label, or after max_iters sweeps.
inline Partition lpa(const Graph& g, std::size_t max_iters, Rng& rng) {
  const std::size_t n = g.num_nodes();
  if (n == 0) throw ConfigError("lpa: graph has no nodes");
  std::vector<std::uint32_t> label(n);
  std::iota(label.begin(), label.end(), 0u);
  std::vector<std::uint32_t> count(n, 0);
  std::vector<std::uint32_t> seen;
  std::vector<std::uint32_t> best;
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0u);

  auto tally = [&](NodeId v) {
    seen.clear();
    for (NodeId u : g.neighbors(v)) {
      if (count[label[u]]++ == 0) seen.push_back(label[u]);
    }
    std::uint32_t top = 0;
    for (auto l : seen) top = std::max(top, count[l]);
    best.clear();
    for (auto l : seen) {
      if (count[l] == top) best.push_back(l);
    }
    std::sort(best.begin(), best.end());
    for (auto l : seen) count[l] = 0;
  };

  for (std::size_t it = 0; it < max_iters; ++it) {
    rng.shuffle(std::span<NodeId>(order));
    for (NodeId v : order) {
      if (g.degree(v) == 0) continue;
      tally(v);
      label[v] = best.size() == 1 ? best[0] : best[rng.below(best.size())];
    }
    bool stable = true;
    for (NodeId v = 0; v < n && stable; ++v) {
      if (g.degree(v) == 0) continue;
      tally(v);
      stable = std::binary_search(best.begin(), best.end(), label[v]);
    }
    if (stable) break;
  }
  return Partition{std::move(label)}.canonical();
}

inline Partition lpa(const Graph& g, std::size_t max_iters, std::uint64_t seed) {
  Rng rng(seed);
  return lpa(g, max_iters, rng);
}

}  // namespace echo

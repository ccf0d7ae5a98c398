#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "echo/clustering.hpp"
#include "echo/error.hpp"
#include "echo/graph.hpp"

namespace echo {

namespace detail {

/// Shannon entropy (nats) of a count vector summing to n.
inline double entropy(const std::vector<std::size_t>& counts, double n) {
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace detail

/// Normalized mutual information 2 I(Y;C) / (H(Y) + H(C)) in natural log.
/// Two single-cluster partitions score 1.
inline double nmi(const Partition& truth, const Partition& pred) {
  if (truth.size() != pred.size()) throw ConfigError("nmi: partitions cover different node counts");
  if (truth.size() == 0) throw ConfigError("nmi: empty partitions");
  const auto a = truth.canonical();
  const auto b = pred.canonical();
  const std::size_t n = a.size();
  const std::size_t ka = a.num_communities();
  const std::size_t kb = b.num_communities();
  std::vector<std::size_t> ca(ka, 0);
  std::vector<std::size_t> cb(kb, 0);
  std::unordered_map<std::uint64_t, std::size_t> joint;
  for (std::size_t i = 0; i < n; ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++joint[static_cast<std::uint64_t>(a[i]) * kb + b[i]];
  }
  const double dn = static_cast<double>(n);
  const double ha = detail::entropy(ca, dn);
  const double hb = detail::entropy(cb, dn);
  if (ha + hb == 0.0) return 1.0;
  // I = H(a) + H(b) - H(a, b), cells visited in (row, col) order so the sum
  // does not depend on hashing. For identical partitions the joint entropy
  // repeats the marginal sum term for term and the score is exactly 1.
  std::vector<std::pair<std::uint64_t, std::size_t>> cells(joint.begin(), joint.end());
  std::sort(cells.begin(), cells.end());
  std::vector<std::size_t> cc;
  cc.reserve(cells.size());
  for (const auto& cell : cells) cc.push_back(cell.second);
  const double mi = ha + hb - detail::entropy(cc, dn);
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

/// Wall-clock seconds per pipeline phase: routing, training, extraction plus
/// clustering.
struct PhaseTimings {
  double phase1_s = 0.0;
  double phase2_s = 0.0;
  double phase3_s = 0.0;
  double total_s = 0.0;

  friend bool operator==(const PhaseTimings&, const PhaseTimings&) = default;
};

struct EvalReport {
  std::size_t n_nodes = 0;
  double nmi = 0.0;
  std::size_t n_communities_pred = 0;
  std::size_t n_communities_true = 0;
  /// Modularity of the prediction on the input graph, when one is given.
  std::optional<double> modularity_pred;
  PhaseTimings timings;
  double throughput_nodes_per_second = 0.0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// N / total seconds, 0 when no time was recorded.
inline double throughput(std::size_t n_nodes, double total_seconds) {
  return total_seconds > 0.0 ? static_cast<double>(n_nodes) / total_seconds : 0.0;
}

inline EvalReport evaluate(const Partition& truth, const Partition& pred, const PhaseTimings& t = {}) {
  EvalReport r;
  r.n_nodes = pred.size();
  r.nmi = nmi(truth, pred);
  r.n_communities_pred = pred.num_communities();
  r.n_communities_true = truth.num_communities();
  r.timings = t;
  r.throughput_nodes_per_second = throughput(r.n_nodes, t.total_s);
  return r;
}

/// As above, with the modularity of pred measured on g.
inline EvalReport evaluate(const Graph& g, const Partition& truth, const Partition& pred, const PhaseTimings& t = {}) {
  if (pred.size() != g.num_nodes()) throw ConfigError("evaluate: partition size differs from graph node count");
  EvalReport r = evaluate(truth, pred, t);
  r.modularity_pred = modularity(g, pred);
  return r;
}

}  // namespace echo

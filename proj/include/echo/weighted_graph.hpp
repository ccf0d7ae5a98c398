#pragma once

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <string>
#include <vector>

#include "echo/graph.hpp"
#include "echo/io.hpp"

namespace echo {

struct WeightedEdge {
  NodeId i = 0;
  NodeId j = 0;
  double w = 0.0;

  friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

/// Sparse symmetric weighted graph stored as its upper triangle (i < j),
/// sorted by (i, j).
struct WeightedGraph {
  std::size_t n_nodes = 0;
  std::vector<WeightedEdge> edges;

  std::size_t num_edges() const noexcept { return edges.size(); }

  static WeightedGraph from_graph(const Graph& g) {
    WeightedGraph w;
    w.n_nodes = g.num_nodes();
    w.edges.reserve(g.num_edges());
    for (const auto& e : g.edges()) w.edges.push_back({e.u, e.v, 1.0});
    return w;
  }

  friend bool operator==(const WeightedGraph&, const WeightedGraph&) = default;
};

/// The sparse similarity graph handed to modularity maximization.
using SimilarityGraph = WeightedGraph;

/// Writes "# nodes N" then "i j w" lines; weights use max_digits10 so a
/// reload reproduces them exactly.
inline void save_weighted_edges(const std::string& path, const WeightedGraph& g) {
  auto out = detail::open_out(path);
  out << "# nodes " << g.n_nodes << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& e : g.edges) out << e.i << ' ' << e.j << ' ' << e.w << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline WeightedGraph load_weighted_edges(const std::string& path) {
  auto in = detail::open_in(path);
  WeightedGraph g;
  std::size_t declared = 0;
  bool has_declared = false;
  std::size_t max_id_plus_one = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      auto toks = detail::split_ws(s.substr(1));
      if (toks.size() >= 2 && toks[0] == "nodes" && detail::parse_int(toks[1], declared)) has_declared = true;
      continue;
    }
    auto toks = detail::split_ws(s);
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    double w = 0.0;
    if (toks.size() != 3 || !detail::parse_int(toks[0], a) || !detail::parse_int(toks[1], b) ||
        !detail::parse_real(toks[2], w)) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected 'i j w'");
    }
    if (a == b) throw FormatError(path + ":" + std::to_string(lineno) + ": self-edge");
    if (!(w >= 0.0)) throw FormatError(path + ":" + std::to_string(lineno) + ": negative or NaN weight");
    if (a > b) std::swap(a, b);
    max_id_plus_one = std::max<std::size_t>(max_id_plus_one, static_cast<std::size_t>(b) + 1);
    g.edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b), w});
  }
  g.n_nodes = has_declared ? declared : max_id_plus_one;
  if (max_id_plus_one > g.n_nodes) throw FormatError(path + ": edge references a node beyond the declared count");
  std::sort(g.edges.begin(), g.edges.end(), [](const WeightedEdge& x, const WeightedEdge& y) {
    return x.i != y.i ? x.i < y.i : x.j < y.j;
  });
  for (std::size_t k = 1; k < g.edges.size(); ++k) {
    if (g.edges[k].i == g.edges[k - 1].i && g.edges[k].j == g.edges[k - 1].j) {
      throw FormatError(path + ": duplicate edge " + std::to_string(g.edges[k].i) + " " + std::to_string(g.edges[k].j));
    }
  }
  return g;
}

}  // namespace echo

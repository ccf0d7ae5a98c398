#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "echo/error.hpp"

namespace echo {

using NodeId = std::uint32_t;

struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable undirected simple graph in compressed adjacency form.
///
/// Every undirected edge {u, v} appears once in edges() with u < v and twice
/// in the adjacency arrays (v in neighbors(u), u in neighbors(v)). Neighbor
/// lists are sorted ascending. Position p in targets() doubles as the id of
/// the directed edge targets()[p] -> owner, which is how attention and
/// message-passing index edges.
class Graph {
 public:
  Graph() = default;

  /// Canonicalizes `edges` (orientation, dedup, self-loop removal) and
  /// builds the adjacency. Throws ConfigError when an endpoint is >= n.
  static Graph from_edges(std::size_t n, std::vector<Edge> edges,
                          std::size_t* self_loops_dropped = nullptr) {
    std::size_t loops = 0;
    std::size_t kept = 0;
    for (auto e : edges) {
      if (e.u >= n || e.v >= n) {
        throw ConfigError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                          ") references a node >= " + std::to_string(n));
      }
      if (e.u == e.v) {
        ++loops;
        continue;
      }
      if (e.u > e.v) std::swap(e.u, e.v);
      edges[kept++] = e;
    }
    edges.resize(kept);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    if (self_loops_dropped) *self_loops_dropped = loops;

    Graph g;
    g.n_ = n;
    g.edges_ = std::move(edges);
    g.offsets_.assign(n + 1, 0);
    for (const auto& e : g.edges_) {
      ++g.offsets_[e.u + 1];
      ++g.offsets_[e.v + 1];
    }
    for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] += g.offsets_[i];
    g.targets_.resize(2 * g.edges_.size());
    std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    // Edges are sorted by (u, v): smaller neighbors first (each arrives in
    // ascending u), then larger ones (ascending v), so every list is sorted.
    for (const auto& e : g.edges_) g.targets_[cursor[e.v]++] = e.u;
    for (const auto& e : g.edges_) g.targets_[cursor[e.u]++] = e.v;
    return g;
  }

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t num_directed_edges() const noexcept { return targets_.size(); }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::span<const NodeId> targets() const noexcept { return targets_; }

  std::span<const NodeId> neighbors(NodeId u) const noexcept {
    return {targets_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  std::size_t degree(NodeId u) const noexcept { return offsets_[u + 1] - offsets_[u]; }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> d(n_);
    for (std::size_t i = 0; i < n_; ++i) d[i] = offsets_[i + 1] - offsets_[i];
    return d;
  }

  bool has_edge(NodeId u, NodeId v) const noexcept {
    if (u >= n_ || v >= n_) return false;
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  /// Source node of every directed edge, aligned with targets() order.
  /// Directed edge p runs targets()[p] -> owner(p); this returns owner(p).
  std::vector<NodeId> directed_owner() const {
    std::vector<NodeId> owner(targets_.size());
    for (std::size_t v = 0; v < n_; ++v) {
      for (std::size_t p = offsets_[v]; p < offsets_[v + 1]; ++p) owner[p] = static_cast<NodeId>(v);
    }
    return owner;
  }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> targets_;
};

/// 2|E| / N.
inline double mean_degree(const Graph& g) {
  if (g.num_nodes() == 0) return 0.0;
  return 2.0 * static_cast<double>(g.num_edges()) / static_cast<double>(g.num_nodes());
}

/// Dense row-major node attribute matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw ConfigError("feature data size does not match shape");
    for (float x : data_) {
      if (!std::isfinite(x)) throw FormatError("feature matrix contains a non-finite value");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Trained node embeddings share the feature container's layout.
using EmbeddingMatrix = FeatureMatrix;

inline void check_consistent(const Graph& g, const FeatureMatrix& x) {
  if (x.rows() != g.num_nodes()) {
    throw ConfigError("feature matrix has " + std::to_string(x.rows()) + " rows but graph has " +
                      std::to_string(g.num_nodes()) + " nodes");
  }
}

/// Node -> community assignment. Equality compares canonical forms, so two
/// partitions that differ only by a relabeling of ids are equal.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<std::uint32_t> labels) : labels_(std::move(labels)) {}

  std::size_t size() const noexcept { return labels_.size(); }
  std::uint32_t operator[](std::size_t i) const noexcept { return labels_[i]; }
  std::span<const std::uint32_t> labels() const noexcept { return labels_; }

  /// Relabels ids 0, 1, 2, ... in order of first appearance.
  Partition canonical() const {
    std::unordered_map<std::uint32_t, std::uint32_t> remap;
    std::vector<std::uint32_t> out(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      auto [it, inserted] = remap.try_emplace(labels_[i], static_cast<std::uint32_t>(remap.size()));
      out[i] = it->second;
    }
    return Partition(std::move(out));
  }

  std::size_t num_communities() const {
    std::vector<std::uint32_t> sorted(labels_);
    std::sort(sorted.begin(), sorted.end());
    return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.canonical().labels_ == b.canonical().labels_;
  }

 private:
  std::vector<std::uint32_t> labels_;
};

}  // namespace echo

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>
#include <span>
#include <vector>

#include "echo/error.hpp"
#include "echo/graph.hpp"
#include "echo/parallel.hpp"
#include "echo/weighted_graph.hpp"

namespace echo {

struct ExtractConfig {
  std::size_t k_min = 5;
  std::size_t k_max = 30;
  double delta = 0.15;
  std::size_t chunk_rows = 4096;
  /// Keep a pair when either endpoint selected the other, instead of
  /// requiring mutual selection.
  bool one_sided = false;

  void validate() const {
    if (k_min < 1 || k_min > k_max) throw ConfigError("extraction needs 1 <= k_min <= k_max");
    if (!(delta >= -1.0 && delta <= 1.0)) throw ConfigError("extraction threshold delta must lie in [-1, 1]");
    if (chunk_rows < 1) throw ConfigError("extraction chunk size must be >= 1");
  }
};

/// Neighborhood size for a node of the given degree in the input graph.
inline std::size_t adaptive_k(std::size_t degree, const ExtractConfig& cfg) {
  return std::clamp(degree, cfg.k_min, cfg.k_max);
}

/// A candidate neighbor. Ordering: higher similarity first, smaller id on ties.
struct Neighbor {
  double sim = 0.0;
  NodeId id = 0;
};

inline bool better(const Neighbor& a, const Neighbor& b) noexcept {
  return a.sim > b.sim || (a.sim == b.sim && a.id < b.id);
}

/// Rows scaled to unit length. The norm is accumulated in double, the unit
/// row rounded to float and widened back, so every similarity is a sum of
/// exact products. Zero rows stay zero and are flagged invalid.
struct UnitRows {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> rows;  // n x d
  std::vector<char> valid;

  double dot(std::size_t a, std::size_t b) const noexcept {
    const double* x = rows.data() + a * d;
    const double* y = rows.data() + b * d;
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) acc += x[k] * y[k];
    return acc;
  }
};

inline UnitRows unit_rows(const EmbeddingMatrix& s) {
  UnitRows u{s.rows(), s.cols(), std::vector<double>(s.rows() * s.cols(), 0.0), std::vector<char>(s.rows(), 0)};
  for (std::size_t i = 0; i < u.n; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < u.d; ++k) sq += static_cast<double>(s(i, k)) * static_cast<double>(s(i, k));
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0)) continue;
    u.valid[i] = 1;
    for (std::size_t k = 0; k < u.d; ++k) {
      u.rows[i * u.d + k] = static_cast<double>(static_cast<float>(static_cast<double>(s(i, k)) / norm));
    }
  }
  return u;
}

/// Per-node top-k lists, each sorted by node id.
struct TopKLists {
  std::size_t width = 0;
  std::vector<Neighbor> slots;        // n x width
  std::vector<std::uint32_t> counts;  // entries used per row

  std::span<const Neighbor> row(std::size_t i) const { return {slots.data() + i * width, counts[i]}; }

  const Neighbor* find(std::size_t i, NodeId j) const {
    auto r = row(i);
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const Neighbor& nb, NodeId id) { return nb.id < id; });
    return (it != r.end() && it->id == j) ? &*it : nullptr;
  }
};

namespace detail {

/// Min-heap on `better`: heap.front() is the weakest kept candidate.
struct WorstFirst {
  bool operator()(const Neighbor& a, const Neighbor& b) const noexcept { return better(a, b); }
};

inline void offer(std::vector<Neighbor>& heap, std::size_t k, Neighbor cand) {
  if (heap.size() < k) {
    heap.push_back(cand);
    std::push_heap(heap.begin(), heap.end(), WorstFirst{});
  } else if (better(cand, heap.front())) {
    std::pop_heap(heap.begin(), heap.end(), WorstFirst{});
    heap.back() = cand;
    std::push_heap(heap.begin(), heap.end(), WorstFirst{});
  }
}

inline constexpr std::size_t kGroup = 4;
inline constexpr std::size_t kLanes = 16;

using Float8 = float __attribute__((vector_size(32)));
using Double8 = double __attribute__((vector_size(64)));

inline Double8 load_widened(const float* p) {
  Float8 f;
  std::memcpy(&f, p, sizeof f);
  return __builtin_convertvector(f, Double8);
}

/// Candidates packed in panels of kLanes: candidate j, coordinate t lives at
/// (j / kLanes) * d * kLanes + t * kLanes + j % kLanes. Missing candidates
/// past n are zero.
inline std::vector<float> pack_panels(const UnitRows& u) {
  const std::size_t panels = (u.n + kLanes - 1) / kLanes;
  std::vector<float> out(panels * u.d * kLanes, 0.0f);
  for (std::size_t j = 0; j < u.n; ++j) {
    float* base = out.data() + (j / kLanes) * u.d * kLanes + j % kLanes;
    for (std::size_t t = 0; t < u.d; ++t) base[t * kLanes] = static_cast<float>(u.rows[j * u.d + t]);
  }
  return out;
}

/// out[q * stride + b] = sum_t a[q][t] * x_t(b) for kGroup rows and `count`
/// consecutive panels, summed over t in index order. The accumulators of a
/// kGroup x kLanes tile stay in registers across t.
inline void dot_block(const double* const* a, const float* panel, std::size_t d, std::size_t count, double* out,
                      std::size_t stride) {
  static_assert(kGroup == 4 && kLanes == 16);
  for (std::size_t p = 0; p < count; ++p, panel += d * kLanes, out += kLanes) {
    Double8 s00{}, s01{}, s10{}, s11{}, s20{}, s21{}, s30{}, s31{};
    for (std::size_t t = 0; t < d; ++t) {
      const Double8 lo = load_widened(panel + t * kLanes);
      const Double8 hi = load_widened(panel + t * kLanes + 8);
      s00 += a[0][t] * lo;
      s01 += a[0][t] * hi;
      s10 += a[1][t] * lo;
      s11 += a[1][t] * hi;
      s20 += a[2][t] * lo;
      s21 += a[2][t] * hi;
      s30 += a[3][t] * lo;
      s31 += a[3][t] * hi;
    }
    std::memcpy(out, &s00, sizeof s00);
    std::memcpy(out + 8, &s01, sizeof s01);
    std::memcpy(out + stride, &s10, sizeof s10);
    std::memcpy(out + stride + 8, &s11, sizeof s11);
    std::memcpy(out + 2 * stride, &s20, sizeof s20);
    std::memcpy(out + 2 * stride + 8, &s21, sizeof s21);
    std::memcpy(out + 3 * stride, &s30, sizeof s30);
    std::memcpy(out + 3 * stride + 8, &s31, sizeof s31);
  }
}

/// Scans rows [lo, hi) against every embedding, keeping only each row's k
/// best candidates. Rows go in tiles of kTile against column blocks of kBlock
/// candidates so that a block is read from memory once per tile. Each
/// similarity is still summed over t in index order. Auxiliary memory per
/// worker is kTile blocks of similarities plus kTile heaps.
inline void scan_rows(const UnitRows& u, const std::vector<float>& panels, std::span<const std::size_t> k_of,
                      std::size_t lo, std::size_t hi, TopKLists& out) {
  constexpr std::size_t kBlock = 256;
  constexpr std::size_t kTile = 16;
  static_assert(kTile % kGroup == 0 && kBlock % kLanes == 0);
  const std::size_t n = u.n;
  const std::size_t d = u.d;
  std::vector<double> acc(kTile * kBlock);
  std::vector<std::vector<Neighbor>> heaps(kTile);
  std::vector<std::size_t> rows;
  for (std::size_t r0 = lo; r0 < hi; r0 += kTile) {
    rows.clear();
    for (std::size_t i = r0; i < std::min(hi, r0 + kTile); ++i) {
      out.counts[i] = 0;
      if (u.valid[i]) rows.push_back(i);
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      heaps[r].clear();
      heaps[r].reserve(k_of[rows[r]]);
    }
    for (std::size_t j0 = 0; j0 < n && !rows.empty(); j0 += kBlock) {
      const std::size_t bw = std::min(kBlock, n - j0);
      for (std::size_t r = 0; r < rows.size(); r += kGroup) {
        const std::size_t g = std::min(kGroup, rows.size() - r);
        const double* a[kGroup];
        for (std::size_t q = 0; q < kGroup; ++q) a[q] = u.rows.data() + rows[r + std::min(q, g - 1)] * d;
        dot_block(a, panels.data() + j0 * d, d, (bw + kLanes - 1) / kLanes, acc.data() + r * kBlock, kBlock);
      }
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        const std::size_t k = k_of[i];
        auto& heap = heaps[r];
        const double* ac = acc.data() + r * kBlock;
        // Once the heap is full only strictly larger similarities can enter:
        // a tie loses to the kept candidate, which has the smaller id.
        double floor = heap.size() == k ? heap.front().sim : -std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < bw; ++b) {
          if (ac[b] < floor || (heap.size() == k && ac[b] == floor)) continue;
          const std::size_t j = j0 + b;
          if (j == i || !u.valid[j]) continue;
          offer(heap, k, {ac[b], static_cast<NodeId>(j)});
          if (heap.size() == k) floor = heap.front().sim;
        }
      }
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto& heap = heaps[r];
      const std::size_t i = rows[r];
      std::sort(heap.begin(), heap.end(), [](const Neighbor& x, const Neighbor& y) { return x.id < y.id; });
      std::copy(heap.begin(), heap.end(), out.slots.begin() + static_cast<std::ptrdiff_t>(i * out.width));
      out.counts[i] = static_cast<std::uint32_t>(heap.size());
    }
  }
}

}  // namespace detail

/// Top-k_i candidate lists for every node, computed chunk by chunk. The
/// result does not depend on chunk size or thread count.
inline TopKLists topk_lists(const UnitRows& u, std::span<const std::size_t> k_of, std::size_t chunk_rows) {
  const std::size_t n = u.n;
  const std::size_t width = n == 0 ? 0 : *std::max_element(k_of.begin(), k_of.end());
  TopKLists lists{width, std::vector<Neighbor>(n * width), std::vector<std::uint32_t>(n, 0)};
  // Unit rows hold float values, so the float panels are exact.
  const std::vector<float> panels = detail::pack_panels(u);
  for (std::size_t lo = 0; lo < n; lo += chunk_rows) {
    const std::size_t hi = std::min(n, lo + chunk_rows);
    parallel_for(lo, hi, [&](std::size_t a, std::size_t b) { detail::scan_rows(u, panels, k_of, a, b, lists); }, 16);
  }
  return lists;
}

/// Degree-adaptive similarity graph. Node i keeps its top-k_i most similar
/// embeddings (cosine, self excluded, ties to the smaller id) with
/// k_i = clamp(deg(i), k_min, k_max). A pair (i, j) becomes an edge when both
/// nodes selected each other (or either did, with one_sided) and the
/// similarity is at least delta; its weight is max(sim(i,j), sim(j,i)).
inline SimilarityGraph extract_similarity_graph(const EmbeddingMatrix& s, std::span<const std::size_t> degrees,
                                                const ExtractConfig& cfg) {
  cfg.validate();
  const std::size_t n = s.rows();
  if (n == 0) throw ConfigError("extract_similarity_graph: no embeddings");
  if (degrees.size() != n) throw ConfigError("extract_similarity_graph: one degree per embedding row required");
  std::vector<std::size_t> k_of(n);
  for (std::size_t i = 0; i < n; ++i) k_of[i] = adaptive_k(degrees[i], cfg);

  const UnitRows u = unit_rows(s);
  const TopKLists lists = topk_lists(u, k_of, cfg.chunk_rows);

  SimilarityGraph out;
  out.n_nodes = n;
  if (!cfg.one_sided) {
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& nb : lists.row(i)) {
        if (nb.id <= i) continue;
        const Neighbor* back = lists.find(nb.id, static_cast<NodeId>(i));
        if (!back) continue;
        const double w = std::max(nb.sim, back->sim);
        if (w >= cfg.delta) out.edges.push_back({static_cast<NodeId>(i), nb.id, w});
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& nb : lists.row(i)) {
      const NodeId lo = std::min<NodeId>(static_cast<NodeId>(i), nb.id);
      const NodeId hi = std::max<NodeId>(static_cast<NodeId>(i), nb.id);
      // A pair listed by both sides is emitted from the smaller endpoint only.
      if (nb.id < i && lists.find(nb.id, static_cast<NodeId>(i))) continue;
      const Neighbor* back = lists.find(nb.id, static_cast<NodeId>(i));
      const double w = back ? std::max(nb.sim, back->sim) : nb.sim;
      if (w >= cfg.delta) out.edges.push_back({lo, hi, w});
    }
  }
  std::sort(out.edges.begin(), out.edges.end(), [](const WeightedEdge& x, const WeightedEdge& y) {
    return x.i != y.i ? x.i < y.i : x.j < y.j;
  });
  return out;
}

inline SimilarityGraph extract_similarity_graph(const EmbeddingMatrix& s, const Graph& g, const ExtractConfig& cfg) {
  if (s.rows() != g.num_nodes()) throw ConfigError("extract_similarity_graph: embedding rows differ from graph nodes");
  const auto deg = g.degrees();
  return extract_similarity_graph(s, deg, cfg);
}

}  // namespace echo

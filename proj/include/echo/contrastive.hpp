#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "echo/autograd.hpp"
#include "echo/diffusion.hpp"
#include "echo/error.hpp"
#include "echo/rng.hpp"

namespace echo {

inline constexpr std::size_t kDefaultShardElemThreshold = 200'000'000;

struct LossConfig {
  double temperature = 0.1;
  std::size_t neg_per_node = 256;
  double epsilon = 1e-8;
  double sparsity = 1e-4;
  std::size_t shard_elem_threshold = kDefaultShardElemThreshold;

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (neg_per_node == 0) throw ConfigError("negatives per node must be >= 1");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if (!(sparsity >= 0.0)) throw ConfigError("sparsity weight must be >= 0");
    if (shard_elem_threshold == 0) throw ConfigError("shard threshold must be >= 1");
  }
};

struct LossBreakdown {
  double contrastive = 0.0;
  double sparsity = 0.0;
  double total = 0.0;
  bool sharded = false;
  std::size_t chunks_used = 0;
};

/// N x P node indices drawn uniformly from [0, N). A node may draw itself or
/// one of its neighbors.
struct NegativePool {
  std::size_t n_nodes = 0;
  std::size_t per_node = 0;
  std::vector<NodeId> index;

  std::span<const NodeId> row(std::size_t v) const { return {index.data() + v * per_node, per_node}; }
};

inline NegativePool sample_negatives(std::size_t n_nodes, std::size_t per_node, Rng& rng) {
  if (n_nodes < 2) throw ConfigError("sample_negatives: need at least 2 nodes");
  if (per_node == 0) throw ConfigError("sample_negatives: negatives per node must be >= 1");
  NegativePool pool{n_nodes, per_node, std::vector<NodeId>(n_nodes * per_node)};
  for (auto& j : pool.index) j = static_cast<NodeId>(rng.below(n_nodes));
  return pool;
}

struct ShardPlan {
  bool sharded = false;
  std::size_t chunk_size = 0;
};

/// Sharding engages when the N x P x d negative tensor exceeds `threshold`
/// elements; chunks then hold floor(threshold / (P d)) nodes.
inline ShardPlan shard_decision(std::size_t n, std::size_t per_node, std::size_t dim, std::size_t threshold) {
  if (n == 0 || per_node == 0 || dim == 0 || threshold == 0) {
    throw ConfigError("shard_decision: all arguments must be > 0");
  }
  const long double elems = static_cast<long double>(n) * per_node * dim;
  if (elems <= static_cast<long double>(threshold)) return {false, n};
  const std::size_t per_row = per_node * dim;
  const std::size_t chunk = threshold / per_row;
  if (chunk == 0) {
    throw ConfigError("threshold too small: " + std::to_string(threshold) + " < P*d = " + std::to_string(per_row));
  }
  return {true, std::min(chunk, n)};
}

template <class T>
struct LossResult {
  LossBreakdown breakdown;
  ad::Tensor<T>* loss = nullptr;  // 1 x 1, differentiable
};

namespace detail {

template <class T>
double scaled_dot(const ad::Tensor<T>& s, std::size_t a, std::size_t b, double inv_tau) {
  const T* x = s.value.data() + a * s.cols;
  const T* y = s.value.data() + b * s.cols;
  double acc = 0.0;
  for (std::size_t j = 0; j < s.cols; ++j) acc += static_cast<double>(x[j]) * static_cast<double>(y[j]);
  return acc * inv_tau;
}

template <class T>
void axpy_row(std::vector<double>& grad, std::size_t row, double c, const ad::Tensor<T>& s, std::size_t src) {
  double* g = grad.data() + row * s.cols;
  const T* x = s.value.data() + src * s.cols;
  for (std::size_t j = 0; j < s.cols; ++j) g[j] += c * static_cast<double>(x[j]);
}

/// Scaled similarities of nodes [lo, hi) against their pooled negatives.
template <class T>
void negative_block(const ad::Tensor<T>& shat, const NegativePool& pool, std::size_t lo, std::size_t hi,
                    double inv_tau, std::vector<double>& block) {
  const std::size_t P = pool.per_node;
  block.resize((hi - lo) * P);
  parallel_for(lo, hi, [&](std::size_t a, std::size_t b) {
    for (std::size_t v = a; v < b; ++v) {
      auto row = pool.row(v);
      double* out = block.data() + (v - lo) * P;
      for (std::size_t k = 0; k < P; ++k) out[k] = scaled_dot(shat, v, row[k], inv_tau);
    }
  }, 64);
}

}  // namespace detail

/// InfoNCE over attention-weighted neighbors with an L1 term on attention:
///
///   P_v = sum_{u in N(v)} (alpha_uv + eps) exp(sim(u, v))
///   N_v = sum_{j in pool(v)} exp(sim(v, j))
///   total = -(1/|V+|) sum_{v in V+} log(P_v / (P_v + N_v)) + lambda * mean(alpha)
///
/// sim is the cosine of the L2-normalized rows divided by tau. V+ holds the
/// nodes with at least one neighbor; an isolated node has an empty positive
/// sum and is left out of the mean. mean(alpha) runs over directed edges.
///
/// Negatives are evaluated in node chunks sized by shard_decision; without
/// sharding a single chunk covers every node and its N x P similarity block is
/// kept for the backward pass, otherwise each chunk's block is rebuilt there.
/// Per-node arithmetic is identical on both paths. `edges` and `pool` must
/// outlive the tape's backward pass.
template <class T>
LossResult<T> compute_loss(ad::Tensor<T>& s, ad::Tensor<T>& alpha, const DirectedEdges& edges,
                           const NegativePool& pool, const LossConfig& cfg, ad::Tape<T>& tape) {
  cfg.validate();
  const std::size_t n = s.rows;
  if (edges.n_nodes != n || pool.n_nodes != n) throw ConfigError("compute_loss: node counts disagree");
  if (alpha.rows != edges.size() || alpha.cols != 1) throw ConfigError("compute_loss: alpha must be E x 1");
  if (pool.per_node != cfg.neg_per_node) throw ConfigError("compute_loss: pool width differs from P");

  auto& shat = ad::l2_normalize_rows(tape, s);
  const ShardPlan plan = shard_decision(n, pool.per_node, s.cols, cfg.shard_elem_threshold);
  const std::size_t chunk = plan.chunk_size;
  const std::size_t P = pool.per_node;
  const double inv_tau = 1.0 / cfg.temperature;
  const double eps = cfg.epsilon;

  // Destination-grouped edge ranges (edges arrive grouped by dst).
  std::vector<std::size_t> first(n + 1, 0);
  for (NodeId v : edges.dst) ++first[v + 1];
  for (std::size_t v = 0; v < n; ++v) first[v + 1] += first[v];
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (e < first[edges.dst[e]] || e >= first[edges.dst[e] + 1]) {
      throw ConfigError("compute_loss: directed edges must be grouped by destination");
    }
  }

  std::vector<double> pos_sim(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) pos_sim[e] = detail::scaled_dot(shat, edges.src[e], edges.dst[e], inv_tau);

  // Per-node shift and shifted sums, kept for backward.
  std::vector<double> shift(n, 0.0);
  std::vector<double> psum(n, 0.0);
  std::vector<double> nsum(n, 0.0);
  std::vector<double> neg_block;  // chunk x P
  std::vector<double> kept_block;
  std::size_t valid = 0;
  double loss_sum = 0.0;
  std::size_t chunks = 0;

  for (std::size_t lo = 0; lo < n; lo += chunk) {
    const std::size_t hi = std::min(n, lo + chunk);
    ++chunks;
    detail::negative_block(shat, pool, lo, hi, inv_tau, neg_block);
    for (std::size_t v = lo; v < hi; ++v) {
      if (first[v] == first[v + 1]) continue;
      const double* neg = neg_block.data() + (v - lo) * P;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t e = first[v]; e < first[v + 1]; ++e) m = std::max(m, pos_sim[e]);
      for (std::size_t k = 0; k < P; ++k) m = std::max(m, neg[k]);
      double ps = 0.0;
      for (std::size_t e = first[v]; e < first[v + 1]; ++e) {
        ps += (static_cast<double>(alpha.value[e]) + eps) * std::exp(pos_sim[e] - m);
      }
      double ns = 0.0;
      for (std::size_t k = 0; k < P; ++k) ns += std::exp(neg[k] - m);
      shift[v] = m;
      psum[v] = ps;
      nsum[v] = ns;
      loss_sum += std::log(ps + ns) - std::log(ps);
      ++valid;
    }
    if (!plan.sharded) kept_block = std::move(neg_block);
  }

  double alpha_sum = 0.0;
  for (T a : alpha.value) alpha_sum += static_cast<double>(a);

  LossResult<T> result;
  auto& b = result.breakdown;
  b.contrastive = valid ? loss_sum / static_cast<double>(valid) : 0.0;
  b.sparsity = edges.size() ? alpha_sum / static_cast<double>(edges.size()) : 0.0;
  b.total = b.contrastive + cfg.sparsity * b.sparsity;
  b.sharded = plan.sharded;
  b.chunks_used = chunks;
  if (!std::isfinite(b.total)) {
    throw NumericError("contrastive loss is not finite (temperature too small or parameters diverged)");
  }

  auto& loss = tape.make(1, 1, shat.requires_grad || alpha.requires_grad);
  loss.value[0] = static_cast<T>(b.total);
  result.loss = &loss;
  if (!loss.requires_grad) return result;

  tape.record([&shat, &alpha, &loss, &edges, &pool, first = std::move(first), pos_sim = std::move(pos_sim),
               shift = std::move(shift), psum = std::move(psum), nsum = std::move(nsum),
               kept_block = std::move(kept_block), plan, chunk, P, inv_tau, eps, valid,
               lambda = cfg.sparsity]() mutable {
    const double g = loss.grad[0];
    const std::size_t n_nodes = shat.rows;
    if (alpha.requires_grad && !edges.src.empty()) {
      const double c = g * lambda / static_cast<double>(edges.size());
      for (auto& ga : alpha.grad) ga += c;
    }
    if (valid == 0) return;
    const double scale = g / static_cast<double>(valid);
    std::vector<double> block;
    for (std::size_t lo = 0; lo < n_nodes; lo += chunk) {
      const std::size_t hi = std::min(n_nodes, lo + chunk);
      const double* neg_all = nullptr;
      if (plan.sharded) {
        detail::negative_block(shat, pool, lo, hi, inv_tau, block);
        neg_all = block.data();
      } else {
        neg_all = kept_block.data();
      }
      for (std::size_t v = lo; v < hi; ++v) {
        if (first[v] == first[v + 1]) continue;
        const double m = shift[v];
        const double ps = psum[v];
        const double ns = nsum[v];
        // d loss_v / d P' = -N' / (P' (P' + N')), d loss_v / d N' = 1 / (P' + N').
        const double dp = -ns / (ps * (ps + ns));
        const double dn = 1.0 / (ps + ns);
        for (std::size_t e = first[v]; e < first[v + 1]; ++e) {
          const double ex = std::exp(pos_sim[e] - m);
          if (alpha.requires_grad) alpha.grad[e] += scale * dp * ex;
          if (shat.requires_grad) {
            const double dsim = scale * dp * (static_cast<double>(alpha.value[e]) + eps) * ex * inv_tau;
            detail::axpy_row(shat.grad, v, dsim, shat, edges.src[e]);
            detail::axpy_row(shat.grad, edges.src[e], dsim, shat, v);
          }
        }
        if (shat.requires_grad) {
          const double* neg = neg_all + (v - lo) * P;
          auto row = pool.row(v);
          for (std::size_t k = 0; k < P; ++k) {
            const double dsim = scale * dn * std::exp(neg[k] - m) * inv_tau;
            detail::axpy_row(shat.grad, v, dsim, shat, row[k]);
            detail::axpy_row(shat.grad, row[k], dsim, shat, v);
          }
        }
      }
    }
  });
  return result;
}

}  // namespace echo

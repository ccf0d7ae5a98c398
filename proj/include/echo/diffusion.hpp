#pragma once

#include <cstddef>
#include <iomanip>
#include <limits>
#include <string>
#include <vector>

#include "echo/autograd.hpp"
#include "echo/encoders.hpp"
#include "echo/graph.hpp"
#include "echo/io.hpp"
#include "echo/rng.hpp"

namespace echo {

/// Both directions of every undirected edge. Directed edge e carries a
/// message src[e] -> dst[e]; entries are grouped by destination in node order.
struct DirectedEdges {
  std::vector<NodeId> src;
  std::vector<NodeId> dst;
  std::size_t n_nodes = 0;

  std::size_t size() const noexcept { return src.size(); }

  static DirectedEdges from_graph(const Graph& g) {
    DirectedEdges e;
    e.n_nodes = g.num_nodes();
    e.src.assign(g.targets().begin(), g.targets().end());
    e.dst = g.directed_owner();
    return e;
  }
};

/// Attention scorer and message transform shared by all diffusion steps.
///
/// The scorer is a 2-layer MLP on [z_src || z_dst]:
///   score = w2^T tanh([z_src || z_dst] W1 + b1) + b2
/// with W1 (2h x h) stored as its two row blocks, W1 = [w1_src; w1_dst], so
/// the first layer can be evaluated per node (z W1_src, z W1_dst) and then
/// gathered per edge instead of multiplying a 2h-wide edge matrix.
template <class T>
struct DiffusionParams {
  ad::Tensor<T> w1_src;  // h x h
  ad::Tensor<T> w1_dst;  // h x h
  ad::Tensor<T> b1;      // 1 x h
  ad::Tensor<T> w2;      // h x 1
  ad::Tensor<T> b2;      // 1 x 1
  ad::Tensor<T> w_node;  // h x h
  std::size_t steps = 0;

  std::size_t dim() const { return w_node.rows; }

  std::vector<ad::Tensor<T>*> parameters() { return {&w1_src, &w1_dst, &b1, &w2, &b2, &w_node}; }
};

template <class T>
DiffusionParams<T> init_diffusion(std::size_t dim, std::size_t steps, Rng& rng) {
  if (dim == 0) throw ConfigError("init_diffusion: dimension must be >= 1");
  DiffusionParams<T> p;
  // W1 is one 2h x h matrix for the Glorot bound.
  auto w1 = glorot_parameter<T>(2 * dim, dim, rng);
  p.w1_src = ad::Tensor<T>::parameter(dim, dim);
  p.w1_dst = ad::Tensor<T>::parameter(dim, dim);
  std::copy_n(w1.value.begin(), dim * dim, p.w1_src.value.begin());
  std::copy_n(w1.value.begin() + static_cast<std::ptrdiff_t>(dim * dim), dim * dim, p.w1_dst.value.begin());
  p.b1 = ad::Tensor<T>::parameter(1, dim);
  p.w2 = glorot_parameter<T>(dim, 1, rng);
  p.b2 = ad::Tensor<T>::parameter(1, 1);
  p.w_node = glorot_parameter<T>(dim, dim, rng);
  p.steps = steps;
  return p;
}

/// Raw per-edge scores (E x 1) from the scorer.
template <class T>
ad::Tensor<T>& attention_scores(ad::Tensor<T>& z, const DirectedEdges& edges, DiffusionParams<T>& p,
                                ad::Tape<T>& tape) {
  auto& a = ad::matmul(tape, z, p.w1_src);
  auto& b = ad::matmul(tape, z, p.w1_dst);
  auto& hidden = ad::add(tape, ad::gather_rows(tape, a, edges.src), ad::gather_rows(tape, b, edges.dst));
  auto& act = ad::tanh(tape, ad::add_bias(tape, hidden, p.b1));
  return ad::add_bias(tape, ad::matmul(tape, act, p.w2), p.b2);
}

/// alpha (E x 1): scorer output softmax-normalized over the incoming edges of
/// each destination node.
template <class T>
ad::Tensor<T>& attention_pass(ad::Tensor<T>& z, const DirectedEdges& edges, DiffusionParams<T>& p,
                              ad::Tape<T>& tape) {
  if (z.rows != edges.n_nodes) throw ConfigError("attention_pass: state rows must equal node count");
  auto& scores = attention_scores(z, edges, p, tape);
  return ad::segment_softmax(tape, scores, edges.dst, edges.n_nodes);
}

struct DiffuseOptions {
  /// Drops the message term (alpha treated as 0); only used to probe the
  /// residual-only limit in tests.
  bool mask_messages = false;
};

template <class T>
struct DiffusionOutput {
  ad::Tensor<T>* s = nullptr;      // Z^(K)
  ad::Tensor<T>* alpha = nullptr;  // attention of the last pass
};

/// K residual steps z_v <- tanh(z_v + sum_{u in N(v)} alpha_uv W_node z_u),
/// attention recomputed at every step. With K = 0 the state is returned
/// unchanged and one attention pass over Z^(0) still runs so that the loss
/// has attention weights.
template <class T>
DiffusionOutput<T> diffuse(ad::Tensor<T>& z0, const DirectedEdges& edges, DiffusionParams<T>& p,
                           ad::Tape<T>& tape, DiffuseOptions opts = {}) {
  DiffusionOutput<T> out;
  ad::Tensor<T>* z = &z0;
  if (p.steps == 0) {
    out.s = z;
    out.alpha = &attention_pass(*z, edges, p, tape);
    return out;
  }
  for (std::size_t t = 0; t < p.steps; ++t) {
    auto& alpha = attention_pass(*z, edges, p, tape);
    out.alpha = &alpha;
    if (opts.mask_messages) {
      z = &ad::tanh(tape, *z);
      continue;
    }
    auto& transformed = ad::matmul(tape, *z, p.w_node);
    auto& messages = ad::scale_rows(tape, ad::gather_rows(tape, transformed, edges.src), alpha);
    auto& aggregated = ad::scatter_add_rows(tape, messages, edges.dst, edges.n_nodes);
    z = &ad::tanh(tape, ad::add(tape, *z, aggregated));
  }
  out.s = z;
  return out;
}

/// Materialized attention weights, one entry per directed edge.
struct EdgeAttention {
  std::vector<NodeId> src;
  std::vector<NodeId> dst;
  std::vector<double> alpha;

  std::size_t size() const noexcept { return alpha.size(); }
};

template <class T>
EdgeAttention to_edge_attention(const DirectedEdges& edges, const ad::Tensor<T>& alpha) {
  EdgeAttention a{edges.src, edges.dst, std::vector<double>(alpha.value.begin(), alpha.value.end())};
  return a;
}

/// "u v alpha" per line, u the message source and v the destination.
inline void save_attention(const std::string& path, const EdgeAttention& a) {
  auto out = detail::open_out(path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t e = 0; e < a.size(); ++e) out << a.src[e] << ' ' << a.dst[e] << ' ' << a.alpha[e] << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace echo

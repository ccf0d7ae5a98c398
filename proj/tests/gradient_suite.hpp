#pragma once

// Finite-difference checks for every differentiable op and for the complete
// encoder -> diffusion -> loss pipeline, all in double precision. Shared by
// the unit tests and the acceptance runner.

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "echo/autograd.hpp"
#include "echo/contrastive.hpp"
#include "echo/diffusion.hpp"
#include "echo/encoders.hpp"
#include "echo/rng.hpp"
#include "echo/trainer.hpp"
#include "oracles.hpp"

namespace gradsuite {

using echo::ad::Tape;
using echo::ad::Tensor;
using T = double;

struct CheckResult {
  std::string name;
  double max_rel_error = 0.0;
};

inline Tensor<T> random_tensor(std::size_t r, std::size_t c, echo::Rng& rng, bool param, double scale = 1.0) {
  Tensor<T> t = param ? Tensor<T>::parameter(r, c) : Tensor<T>(r, c);
  for (auto& v : t.value) v = rng.normal(0.0, scale);
  return t;
}

/// Fixed random projection of a tensor to a scalar:
/// sum_ij w_i x_ij r_j, so every entry gets a distinct upstream gradient.
struct Probe {
  Tensor<T> w;
  Tensor<T> r;

  Probe(std::size_t rows, std::size_t cols, echo::Rng& rng)
      : w(random_tensor(rows, 1, rng, false)), r(random_tensor(cols, 1, rng, false)) {}

  Tensor<T>& operator()(Tape<T>& tape, Tensor<T>& x) {
    return echo::ad::sum(tape, echo::ad::matmul(tape, echo::ad::scale_rows(tape, x, w), r));
  }
};

using Build = std::function<Tensor<T>&(Tape<T>&)>;

/// Backward once for the analytic gradient, then compare each parameter
/// against finite differences of a fresh forward pass.
inline double check(const std::vector<Tensor<T>*>& params, const Build& build) {
  for (auto* p : params) p->zero_grad();
  Tape<T> tape;
  tape.check_finite = true;
  tape.backward(build(tape));
  std::vector<std::vector<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  auto eval = [&] {
    Tape<T> t;
    return static_cast<double>(build(t).value[0]);
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) worst = std::max(worst, oracle::fd_check(*params[k], analytic[k], eval));
  return worst;
}

inline std::vector<CheckResult> op_checks() {
  namespace ad = echo::ad;
  echo::Rng rng(2024);
  std::vector<CheckResult> out;

  {
    auto a = random_tensor(3, 4, rng, true);
    auto b = random_tensor(4, 2, rng, true);
    Probe probe(3, 2, rng);
    out.push_back({"matmul", check({&a, &b}, [&](Tape<T>& t) -> Tensor<T>& { return probe(t, ad::matmul(t, a, b)); })});
  }
  {
    auto a = random_tensor(3, 4, rng, true);
    auto b = random_tensor(3, 4, rng, true);
    Probe probe(3, 4, rng);
    out.push_back({"add", check({&a, &b}, [&](Tape<T>& t) -> Tensor<T>& { return probe(t, ad::add(t, a, b)); })});
  }
  {
    auto a = random_tensor(3, 4, rng, true);
    auto bias = random_tensor(1, 4, rng, true);
    Probe probe(3, 4, rng);
    out.push_back(
        {"add_bias", check({&a, &bias}, [&](Tape<T>& t) -> Tensor<T>& { return probe(t, ad::add_bias(t, a, bias)); })});
  }
  {
    auto a = random_tensor(3, 4, rng, true);
    Probe probe(3, 4, rng);
    out.push_back({"tanh", check({&a}, [&](Tape<T>& t) -> Tensor<T>& { return probe(t, ad::tanh(t, a)); })});
  }
  {
    auto a = random_tensor(3, 2, rng, true);
    auto b = random_tensor(3, 3, rng, true);
    Probe probe(3, 5, rng);
    out.push_back(
        {"concat_rows", check({&a, &b}, [&](Tape<T>& t) -> Tensor<T>& { return probe(t, ad::concat_rows(t, a, b)); })});
  }
  static const std::vector<echo::NodeId> index = {2, 0, 2, 1, 3, 2};
  {
    auto a = random_tensor(4, 3, rng, true);
    Probe probe(index.size(), 3, rng);
    out.push_back(
        {"gather_rows", check({&a}, [&](Tape<T>& t) -> Tensor<T>& { return probe(t, ad::gather_rows(t, a, index)); })});
  }
  {
    auto a = random_tensor(index.size(), 3, rng, true);
    Probe probe(5, 3, rng);
    out.push_back({"scatter_add_rows", check({&a}, [&](Tape<T>& t) -> Tensor<T>& {
                     return probe(t, ad::scatter_add_rows(t, a, index, 5));
                   })});
  }
  {
    auto a = random_tensor(4, 3, rng, true);
    auto w = random_tensor(4, 1, rng, true);
    Probe probe(4, 3, rng);
    out.push_back(
        {"scale_rows", check({&a, &w}, [&](Tape<T>& t) -> Tensor<T>& { return probe(t, ad::scale_rows(t, a, w)); })});
  }
  {
    static const std::vector<echo::NodeId> seg = {0, 0, 1, 2, 2, 2, 3};
    auto s = random_tensor(seg.size(), 1, rng, true);
    Probe probe(seg.size(), 1, rng);
    out.push_back({"segment_softmax", check({&s}, [&](Tape<T>& t) -> Tensor<T>& {
                     return probe(t, ad::segment_softmax(t, s, seg, 4));
                   })});
  }
  {
    auto a = random_tensor(4, 3, rng, true);
    std::fill_n(a.value.begin() + 3, 3, 0.0);  // row 1 is zero
    Probe probe(4, 3, rng);
    // Finite differences at a zero row probe the kink, so only the nonzero
    // rows are perturbed.
    auto rows = random_tensor(3, 3, rng, true);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t j = 0; j < 3; ++j) rows.value[k * 3 + j] = a.value[(k == 0 ? 0 : k + 1) * 3 + j];
    }
    out.push_back({"l2_normalize_rows", check({&rows}, [&](Tape<T>& t) -> Tensor<T>& {
                     auto& full = t.make(4, 3, true);
                     for (std::size_t k = 0; k < 3; ++k) {
                       for (std::size_t j = 0; j < 3; ++j) full.value[(k == 0 ? 0 : k + 1) * 3 + j] = rows.value[k * 3 + j];
                     }
                     t.record([&rows, &full] {
                       for (std::size_t k = 0; k < 3; ++k) {
                         for (std::size_t j = 0; j < 3; ++j) rows.grad[k * 3 + j] += full.grad[(k == 0 ? 0 : k + 1) * 3 + j];
                       }
                     });
                     return probe(t, ad::l2_normalize_rows(t, full));
                   })});
  }
  {
    auto a = random_tensor(3, 2, rng, true);
    out.push_back({"sum", check({&a}, [&](Tape<T>& t) -> Tensor<T>& { return ad::sum(t, ad::tanh(t, a)); })});
  }
  return out;
}

/// A small graph with an isolated node (degree 0) and a leaf.
inline echo::Graph pipeline_graph() {
  return echo::Graph::from_edges(9, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {4, 6}, {6, 7}});
}

inline echo::FeatureMatrix pipeline_features(std::size_t n, std::size_t d, echo::Rng& rng) {
  std::vector<float> x(n * d);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  return echo::FeatureMatrix(n, d, std::move(x));
}

/// encode -> diffuse -> loss for one pathway and step count; `sharded`
/// forces the chunked negative evaluation.
inline double pipeline_check(echo::Pathway pathway, std::size_t steps, bool sharded) {
  echo::Rng rng(77 + steps + (pathway == echo::Pathway::Densifying ? 10 : 0));
  const auto g = pipeline_graph();
  const auto x = pipeline_features(g.num_nodes(), 3, rng);
  echo::TrainConfig cfg;
  cfg.embed_dim = 4;
  cfg.steps = steps;
  cfg.seed = 5;
  cfg.loss.neg_per_node = 3;
  cfg.loss.temperature = 0.5;
  cfg.loss.sparsity = 1e-2;
  if (sharded) cfg.loss.shard_elem_threshold = 3 * 4 * 2;  // two nodes per chunk
  auto model = echo::init_model<T>(pathway, x.cols(), cfg);
  // Spread the attention scores so the softmax is far from uniform.
  for (auto& v : model.diffusion.w2.value) v *= 3.0;
  auto inputs = echo::prepare_encoder_inputs<T>(g, x);
  const auto edges = echo::DirectedEdges::from_graph(g);
  echo::Rng neg_rng(9);
  const auto pool = echo::sample_negatives(g.num_nodes(), cfg.loss.neg_per_node, neg_rng);
  auto params = model.parameters();
  return check(params, [&](Tape<T>& t) -> Tensor<T>& {
    auto out = echo::forward(model, inputs, edges, t);
    return *echo::compute_loss(*out.s, *out.alpha, edges, pool, cfg.loss, t).loss;
  });
}

inline std::vector<CheckResult> pipeline_checks() {
  std::vector<CheckResult> out;
  for (auto pathway : {echo::Pathway::Isolating, echo::Pathway::Densifying}) {
    for (std::size_t k = 0; k <= 2; ++k) {
      for (bool sharded : {false, true}) {
        out.push_back({std::string("pipeline ") + echo::to_string(pathway) + " K=" + std::to_string(k) +
                           (sharded ? " sharded" : ""),
                       pipeline_check(pathway, k, sharded)});
      }
    }
  }
  return out;
}

}  // namespace gradsuite

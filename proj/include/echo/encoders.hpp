#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "echo/autograd.hpp"
#include "echo/graph.hpp"
#include "echo/rng.hpp"
#include "echo/router.hpp"

namespace echo {

inline constexpr std::size_t kDefaultEmbedDim = 128;

template <class T>
struct DenseLayer {
  ad::Tensor<T> weight;  // in x out
  ad::Tensor<T> bias;    // 1 x out
};

/// Glorot-uniform fill: U(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
template <class T>
ad::Tensor<T> glorot_parameter(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  auto t = ad::Tensor<T>::parameter(fan_in, fan_out);
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.value) v = static_cast<T>(rng.uniform(-s, s));
  return t;
}

template <class T>
struct EncoderParams {
  Pathway pathway = Pathway::Isolating;
  std::vector<DenseLayer<T>> mlp;  // Isolating
  ad::Tensor<T> w_self;            // Densifying, d x h
  ad::Tensor<T> w_neigh;           // Densifying, d x h

  std::size_t in_dim() const { return pathway == Pathway::Isolating ? mlp.front().weight.rows : w_self.rows; }
  std::size_t out_dim() const { return pathway == Pathway::Isolating ? mlp.back().weight.cols : w_self.cols; }

  /// Trainable tensors of the active pathway only.
  std::vector<ad::Tensor<T>*> parameters() {
    std::vector<ad::Tensor<T>*> out;
    if (pathway == Pathway::Isolating) {
      for (auto& l : mlp) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
      }
    } else {
      out.push_back(&w_self);
      out.push_back(&w_neigh);
    }
    return out;
  }
};

/// Isolating: `mlp_depth` dense layers in -> h -> ... -> h with zero biases.
/// Densifying: W_self and W_neigh, both in x h.
template <class T>
EncoderParams<T> init_encoder(Pathway pathway, std::size_t in_dim, std::size_t embed_dim, Rng& rng,
                              std::size_t mlp_depth = 2) {
  if (in_dim == 0 || embed_dim == 0) throw ConfigError("init_encoder: dimensions must be >= 1");
  if (mlp_depth == 0) throw ConfigError("init_encoder: mlp depth must be >= 1");
  EncoderParams<T> p;
  p.pathway = pathway;
  if (pathway == Pathway::Isolating) {
    std::size_t fan_in = in_dim;
    for (std::size_t l = 0; l < mlp_depth; ++l) {
      DenseLayer<T> layer{glorot_parameter<T>(fan_in, embed_dim, rng), ad::Tensor<T>::parameter(1, embed_dim)};
      p.mlp.push_back(std::move(layer));
      fan_in = embed_dim;
    }
  } else {
    p.w_self = glorot_parameter<T>(in_dim, embed_dim, rng);
    p.w_neigh = glorot_parameter<T>(in_dim, embed_dim, rng);
  }
  return p;
}

/// Constant encoder inputs: raw features and their 1-hop neighbor means.
template <class T>
struct EncoderInputs {
  ad::Tensor<T> features;
  ad::Tensor<T> neighbor_mean;
};

/// The mean over an empty neighborhood is the zero vector.
template <class T>
EncoderInputs<T> prepare_encoder_inputs(const Graph& g, const FeatureMatrix& x) {
  check_consistent(g, x);
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  EncoderInputs<T> in{ad::Tensor<T>(n, d), ad::Tensor<T>(n, d)};
  for (std::size_t i = 0; i < n * d; ++i) in.features.value[i] = static_cast<T>(x.data()[i]);
  std::vector<double> acc(d);
  for (std::size_t u = 0; u < n; ++u) {
    auto nb = g.neighbors(static_cast<NodeId>(u));
    if (nb.empty()) continue;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (NodeId v : nb) {
      for (std::size_t j = 0; j < d; ++j) acc[j] += static_cast<double>(x(v, j));
    }
    for (std::size_t j = 0; j < d; ++j) in.neighbor_mean(u, j) = static_cast<T>(acc[j] / static_cast<double>(nb.size()));
  }
  return in;
}

/// Z0 = tanh(MLP(x)) for Isolating, tanh(W_self x + W_neigh mean(x_N(u)))
/// for Densifying. `in` must outlive the tape's backward pass.
template <class T>
ad::Tensor<T>& encode(EncoderInputs<T>& in, EncoderParams<T>& p, ad::Tape<T>& tape) {
  if (in.features.cols != p.in_dim()) throw ConfigError("encode: feature dimension does not match encoder");
  if (p.pathway == Pathway::Isolating) {
    ad::Tensor<T>* h = &in.features;
    for (std::size_t l = 0; l < p.mlp.size(); ++l) {
      h = &ad::add_bias(tape, ad::matmul(tape, *h, p.mlp[l].weight), p.mlp[l].bias);
      if (l + 1 < p.mlp.size()) h = &ad::tanh(tape, *h);
    }
    return ad::tanh(tape, *h);
  }
  auto& self = ad::matmul(tape, in.features, p.w_self);
  auto& neigh = ad::matmul(tape, in.neighbor_mean, p.w_neigh);
  return ad::tanh(tape, ad::add(tape, self, neigh));
}

}  // namespace echo

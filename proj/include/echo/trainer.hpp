#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "echo/autograd.hpp"
#include "echo/contrastive.hpp"
#include "echo/diffusion.hpp"
#include "echo/encoders.hpp"
#include "echo/graph.hpp"
#include "echo/rng.hpp"
#include "echo/router.hpp"

namespace echo {

struct AdamConfig {
  double learning_rate = 5e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments per parameter tensor, created zeroed on first use.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam step with decoupled weight decay:
///   w <- w - lr * wd * w, then w <- w - lr * m_hat / (sqrt(v_hat) + eps).
template <class T>
void adam_step(std::span<ad::Tensor<T>* const> params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ConfigError("adam_step: parameter list changed between steps");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      double w = static_cast<double>(p.value[i]);
      w -= cfg.learning_rate * cfg.weight_decay * w;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
      p.value[i] = static_cast<T>(w);
    }
  }
}

struct TrainConfig {
  std::size_t epochs = 200;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t embed_dim = kDefaultEmbedDim;
  std::size_t mlp_depth = 2;
  std::size_t steps = 1;
  LossConfig loss;

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (!(adam.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
    if (!(adam.weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
    if (embed_dim == 0) throw ConfigError("embedding dimension must be >= 1");
    loss.validate();
  }
};

struct TrainReport {
  std::vector<LossBreakdown> history;
  double seconds_sampling = 0.0;
  double seconds_forward = 0.0;
  double seconds_backward = 0.0;
  double seconds_update = 0.0;
  double seconds_total = 0.0;
  /// FNV-1a over the final parameter bytes.
  std::uint64_t params_digest = 0;
};

template <class T>
struct TrainResult {
  EncoderParams<T> encoder;
  DiffusionParams<T> diffusion;
  EmbeddingMatrix embeddings;
  EdgeAttention attention;
  TrainReport report;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class T>
std::uint64_t digest(std::span<ad::Tensor<T>* const> params) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (auto* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

}  // namespace detail

/// Model state plus the constant inputs of one training run.
template <class T>
struct Model {
  EncoderParams<T> encoder;
  DiffusionParams<T> diffusion;

  std::vector<ad::Tensor<T>*> parameters() {
    auto ps = encoder.parameters();
    for (auto* p : diffusion.parameters()) ps.push_back(p);
    return ps;
  }
};

template <class T>
Model<T> init_model(Pathway pathway, std::size_t in_dim, const TrainConfig& cfg) {
  Rng init_rng = Rng(cfg.seed).fork(1);
  Model<T> m;
  m.encoder = init_encoder<T>(pathway, in_dim, cfg.embed_dim, init_rng, cfg.mlp_depth);
  m.diffusion = init_diffusion<T>(cfg.embed_dim, cfg.steps, init_rng);
  return m;
}

/// Encoder followed by diffusion on a fresh tape.
template <class T>
DiffusionOutput<T> forward(Model<T>& m, EncoderInputs<T>& inputs, const DirectedEdges& edges, ad::Tape<T>& tape) {
  auto& z0 = encode(inputs, m.encoder, tape);
  return diffuse(z0, edges, m.diffusion, tape);
}

using EpochCallback = std::function<void(std::size_t epoch, const LossBreakdown&)>;

/// Full-batch training: every epoch draws a fresh negative pool, runs the
/// complete forward pass, the loss, backward, and one Adam step over all
/// parameters. A final forward pass without update yields the embeddings
/// and attention that are returned.
template <class T = float>
TrainResult<T> train(const Graph& g, const FeatureMatrix& x, const RouterReport& route, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {}) {
  cfg.validate();
  check_consistent(g, x);
  if (g.num_nodes() < 2) throw ConfigError("train: need at least 2 nodes");
  const auto t_start = std::chrono::steady_clock::now();

  auto inputs = prepare_encoder_inputs<T>(g, x);
  const auto edges = DirectedEdges::from_graph(g);
  Model<T> model = init_model<T>(route.decision, x.cols(), cfg);
  auto params = model.parameters();
  Rng neg_rng = Rng(cfg.seed).fork(2);
  AdamState adam;
  TrainReport report;
  report.history.reserve(cfg.epochs);
  ad::Tape<T> tape;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    const auto pool = sample_negatives(g.num_nodes(), cfg.loss.neg_per_node, neg_rng);
    report.seconds_sampling += detail::seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    tape.reset();
    for (auto* p : params) p->zero_grad();
    LossResult<T> loss;
    try {
      auto out = forward(model, inputs, edges, tape);
      loss = compute_loss(*out.s, *out.alpha, edges, pool, cfg.loss, tape);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch + 1) + ": " + e.what());
    }
    report.seconds_forward += detail::seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    tape.backward(*loss.loss);
    report.seconds_backward += detail::seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    adam_step<T>(params, adam, cfg.adam);
    report.seconds_update += detail::seconds_since(t0);

    report.history.push_back(loss.breakdown);
    if (on_epoch) on_epoch(epoch + 1, loss.breakdown);
  }

  tape.reset();
  auto out = forward(model, inputs, edges, tape);
  TrainResult<T> result;
  const auto& s = *out.s;
  std::vector<float> emb(s.value.size());
  for (std::size_t i = 0; i < emb.size(); ++i) emb[i] = static_cast<float>(s.value[i]);
  result.embeddings = EmbeddingMatrix(s.rows, s.cols, std::move(emb));
  result.attention = to_edge_attention(edges, *out.alpha);
  tape.release();
  report.params_digest = detail::digest<T>(params);
  report.seconds_total = detail::seconds_since(t_start);
  result.encoder = std::move(model.encoder);
  result.diffusion = std::move(model.diffusion);
  result.report = std::move(report);
  return result;
}

}  // namespace echo

#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include "echo/clustering.hpp"
#include "echo/config.hpp"
#include "echo/extraction.hpp"
#include "echo/graph.hpp"
#include "echo/metrics.hpp"
#include "echo/parallel.hpp"
#include "echo/rng.hpp"
#include "echo/router.hpp"
#include "echo/trainer.hpp"

namespace echo {

/// Independent random streams derived from the master seed. Training uses
/// forks 1 and 2 of the same seed internally.
inline constexpr std::uint64_t kRouteStream = 10;
inline constexpr std::uint64_t kClusterStream = 11;
inline constexpr std::uint64_t kLpaStream = 12;

inline RouterReport run_route(const Graph& g, const FeatureMatrix& x, const PipelineConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork(kRouteStream);
  return route(g, x, cfg.router, rng);
}

inline TrainResult<float> run_train(const Graph& g, const FeatureMatrix& x, const RouterReport& r,
                                    const PipelineConfig& cfg, const EpochCallback& on_epoch = {}) {
  return train<float>(g, x, r, cfg.resolved().train, on_epoch);
}

inline SimilarityGraph run_extract(const EmbeddingMatrix& s, const Graph& g, const PipelineConfig& cfg) {
  return extract_similarity_graph(s, g, cfg.extract);
}

inline LouvainResult run_cluster(const SimilarityGraph& sg, const PipelineConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork(kClusterStream);
  return louvain_detailed(sg, cfg.resolved().louvain, rng);
}

inline Partition run_lpa(const Graph& g, const PipelineConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork(kLpaStream);
  return lpa(g, cfg.lpa_max_iters, rng);
}

struct DetectResult {
  RouterReport route;
  TrainResult<float> training;
  SimilarityGraph similarity;
  LouvainResult clustering;
  PhaseTimings timings;
};

/// route -> train -> extract -> cluster. Phase 1 is routing, phase 2
/// training, phase 3 extraction plus clustering.
inline DetectResult detect(const Graph& g, const FeatureMatrix& x, const PipelineConfig& cfg,
                           const EpochCallback& on_epoch = {}) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  auto secs = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
  DetectResult out;
  const auto t0 = clock::now();
  try {
    out.route = run_route(g, x, cfg);
  } catch (const Error& e) {
    throw PhaseError("route", e);
  }
  const auto t1 = clock::now();
  try {
    out.training = run_train(g, x, out.route, cfg, on_epoch);
  } catch (const Error& e) {
    throw PhaseError("train", e);
  }
  const auto t2 = clock::now();
  try {
    out.similarity = run_extract(out.training.embeddings, g, cfg);
  } catch (const Error& e) {
    throw PhaseError("extract", e);
  }
  try {
    out.clustering = run_cluster(out.similarity, cfg);
  } catch (const Error& e) {
    throw PhaseError("cluster", e);
  }
  const auto t3 = clock::now();
  out.timings = {secs(t0, t1), secs(t1, t2), secs(t2, t3), secs(t0, t3)};
  return out;
}

}  // namespace echo

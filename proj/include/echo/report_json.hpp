#pragma once

// JSON forms of the pipeline reports. Needs nlohmann/json on the include path.

#include <json.hpp>

#include "echo/config.hpp"
#include "echo/metrics.hpp"
#include "echo/router.hpp"

namespace echo {

inline void to_json(nlohmann::json& j, const PhaseTimings& t) {
  j = {{"phase1_s", t.phase1_s}, {"phase2_s", t.phase2_s}, {"phase3_s", t.phase3_s}, {"total_s", t.total_s}};
}

inline void from_json(const nlohmann::json& j, PhaseTimings& t) {
  j.at("phase1_s").get_to(t.phase1_s);
  j.at("phase2_s").get_to(t.phase2_s);
  j.at("phase3_s").get_to(t.phase3_s);
  j.at("total_s").get_to(t.total_s);
}

/// Schema: {n_nodes: int, nmi: number, n_communities_pred: int,
/// n_communities_true: int, modularity_pred: number or null, timings: {phase1_s,
/// phase2_s, phase3_s, total_s}, nodes_per_s: number}.
inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"n_nodes", r.n_nodes},
       {"nmi", r.nmi},
       {"n_communities_pred", r.n_communities_pred},
       {"n_communities_true", r.n_communities_true},
       {"modularity_pred", nullptr},
       {"timings", r.timings},
       {"nodes_per_s", r.throughput_nodes_per_second}};
  if (r.modularity_pred) j["modularity_pred"] = *r.modularity_pred;
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
  j.at("n_nodes").get_to(r.n_nodes);
  j.at("nmi").get_to(r.nmi);
  j.at("n_communities_pred").get_to(r.n_communities_pred);
  j.at("n_communities_true").get_to(r.n_communities_true);
  const auto& q = j.at("modularity_pred");
  if (q.is_null()) {
    r.modularity_pred.reset();
  } else {
    r.modularity_pred = q.get<double>();
  }
  j.at("timings").get_to(r.timings);
  j.at("nodes_per_s").get_to(r.throughput_nodes_per_second);
}

inline void to_json(nlohmann::json& j, const RouterReport& r) {
  j = {{"feature_sparsity", r.feature_sparsity},
       {"mean_degree", r.mean_degree},
       {"assortativity_ratio", r.assortativity_ratio},
       {"decision", to_string(r.decision)},
       {"sample_pairs_used", r.sample_pairs_used},
       {"exact_baseline", r.exact_baseline},
       {"forced", r.forced}};
}

inline void from_json(const nlohmann::json& j, RouterReport& r) {
  j.at("feature_sparsity").get_to(r.feature_sparsity);
  j.at("mean_degree").get_to(r.mean_degree);
  j.at("assortativity_ratio").get_to(r.assortativity_ratio);
  r.decision = parse_pathway(j.at("decision").get<std::string>());
  j.at("sample_pairs_used").get_to(r.sample_pairs_used);
  j.at("exact_baseline").get_to(r.exact_baseline);
  j.at("forced").get_to(r.forced);
}

/// Resolved configuration as a flat object of strings, one member per key.
inline nlohmann::json config_json(const PipelineConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : detail::config_keys()) j[k.name] = k.get(cfg);
  return j;
}

}  // namespace echo

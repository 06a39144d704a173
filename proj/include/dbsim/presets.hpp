#pragma once

#include <cstdint>
#include <vector>

#include "dbsim/learner.hpp"
#include "dbsim/scenario.hpp"

namespace dbsim {

// Stock 6-cluster / 100-user scenario. Three resource blocks per visit force
// long multi-visit episodes, so the discount choice has real bite on the
// learning dynamics; requests arrive through the first 240 s of the horizon.
inline ScenarioSpec default_scenario_spec() {
  ScenarioSpec spec;
  spec.geometry.cluster_positions = {
      {130.0, 180.0}, {870.0, 140.0}, {520.0, 320.0},
      {150.0, 760.0}, {620.0, 820.0}, {880.0, 560.0},
  };
  spec.geometry.origin = {500.0, 500.0};
  spec.geometry.altitude_m = 100.0;
  spec.geometry.service_radius_m = 20.0;
  spec.geometry.speed_mps = 30.0;
  spec.geometry.horizon_s = 400.0;
  spec.channel = ChannelParams{20.0, -104.0, 2.0, 3.0, 20e6, 3};
  spec.num_users = 100;
  spec.request_time = {ValueDist::Kind::uniform, 0.0, 240.0, 0.0};
  spec.request_bits = {ValueDist::Kind::uniform, 1e8, 2e9, 0.0};
  return spec;
}

// Two clusters, every request live from the start, budget enough for both
// visits in either order. The optimum serves everyone, which keeps the exact
// enumerator cheap and the target unambiguous.
inline ScenarioSpec two_cluster_toy_spec() {
  ScenarioSpec spec;
  spec.geometry.cluster_positions = {{150.0, 300.0}, {450.0, 300.0}};
  spec.geometry.origin = {300.0, 300.0};
  spec.geometry.altitude_m = 100.0;
  spec.geometry.service_radius_m = 20.0;
  spec.geometry.speed_mps = 30.0;
  spec.geometry.horizon_s = 60.0;
  spec.channel = ChannelParams{20.0, -104.0, 2.0, 3.0, 20e6, 1024};
  spec.num_users = 20;
  spec.request_time = {ValueDist::Kind::constant, 0.0, 0.0, 0.0};
  spec.request_bits = {ValueDist::Kind::constant, 0.0, 0.0, 2e9};
  return spec;
}

inline LearnerConfig toy_learner_config() {
  LearnerConfig cfg;
  cfg.policy_step = 0.05;
  cfg.meta_step = 0.02;
  cfg.eta_init = 0.5;
  cfg.meta_ascent = true;
  cfg.episodes = 2000;
  cfg.hidden_width = 32;
  return cfg;
}

// Both arms start from the same deliberately plain discount; only the meta
// update separates them.
inline LearnerConfig default_mgpg_config() {
  LearnerConfig cfg;
  cfg.policy_step = 0.05;
  cfg.meta_step = 2.0;
  cfg.eta_init = 0.1;
  cfg.meta_ascent = true;
  cfg.episodes = 1500;
  return cfg;
}

inline LearnerConfig default_pg_config() {
  LearnerConfig cfg = default_mgpg_config();
  cfg.meta_step = 0.0;
  return cfg;
}

}  // namespace dbsim

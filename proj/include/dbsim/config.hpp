#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbsim/learner.hpp"
#include "dbsim/presets.hpp"
#include "dbsim/scenario.hpp"

namespace dbsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cfg {

// Cursor over a JSON tree that remembers its key path, so schema errors name
// the offending key.
struct Node {
  const nlohmann::json* j;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config error at " + (path.empty() ? "<root>" : path) + ": " + what);
  }

  bool has(const std::string& key) const { return j->is_object() && j->contains(key); }

  Node at(const std::string& key) const {
    if (!j->is_object()) fail("expected an object");
    if (!j->contains(key)) fail("missing required key '" + key + "'");
    return Node{&(*j)[key], path.empty() ? key : path + "." + key};
  }

  std::optional<Node> maybe(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return at(key);
  }

  double as_double() const {
    if (!j->is_number()) fail("expected a number");
    return j->get<double>();
  }
  int as_int() const {
    if (!j->is_number_integer()) fail("expected an integer");
    return j->get<int>();
  }
  std::uint64_t as_u64() const {
    if (!j->is_number_integer() || j->get<std::int64_t>() < 0) fail("expected a nonnegative integer");
    return j->get<std::uint64_t>();
  }
  bool as_bool() const {
    if (!j->is_boolean()) fail("expected a boolean");
    return j->get<bool>();
  }
  std::string as_string() const {
    if (!j->is_string()) fail("expected a string");
    return j->get<std::string>();
  }
  std::size_t array_size() const {
    if (!j->is_array()) fail("expected an array");
    return j->size();
  }
  Node item(std::size_t i) const {
    return Node{&(*j)[i], path + "[" + std::to_string(i) + "]"};
  }
};

inline Point2 parse_point(const Node& n) {
  if (n.array_size() != 2) n.fail("expected [x, y]");
  return Point2{n.item(0).as_double(), n.item(1).as_double()};
}

inline ValueDist parse_dist(const Node& n) {
  ValueDist d;
  const std::string kind = n.at("kind").as_string();
  if (kind == "uniform") {
    d.kind = ValueDist::Kind::uniform;
    d.lo = n.at("lo").as_double();
    d.hi = n.at("hi").as_double();
  } else if (kind == "constant") {
    d.kind = ValueDist::Kind::constant;
    d.value = n.at("value").as_double();
  } else {
    n.at("kind").fail("unknown distribution kind '" + kind + "' (uniform|constant)");
  }
  return d;
}

}  // namespace cfg

inline ScenarioSpec scenario_from_json(const nlohmann::json& j, const std::string& root_path = "") {
  cfg::Node root{&j, root_path};
  ScenarioSpec spec = default_scenario_spec();

  if (auto g = root.maybe("geometry")) {
    if (auto v = g->maybe("origin")) spec.geometry.origin = cfg::parse_point(*v);
    if (auto v = g->maybe("altitude_m")) spec.geometry.altitude_m = v->as_double();
    if (auto v = g->maybe("service_radius_m")) spec.geometry.service_radius_m = v->as_double();
    if (auto v = g->maybe("speed_mps")) spec.geometry.speed_mps = v->as_double();
    if (auto v = g->maybe("horizon_s")) spec.geometry.horizon_s = v->as_double();
    if (auto v = g->maybe("clusters")) {
      spec.geometry.cluster_positions.clear();
      for (std::size_t i = 0; i < v->array_size(); ++i)
        spec.geometry.cluster_positions.push_back(cfg::parse_point(v->item(i)));
    }
    if (auto v = g->maybe("num_clusters")) {
      spec.num_clusters = v->as_int();
      if (!g->has("clusters")) spec.geometry.cluster_positions.clear();
    }
    if (auto v = g->maybe("area")) {
      if (v->array_size() != 2) v->fail("expected [width, height]");
      spec.area = {v->item(0).as_double(), v->item(1).as_double()};
    }
    if (auto v = g->maybe("layout_seed")) spec.layout_seed = v->as_u64();
  }
  if (auto c = root.maybe("channel")) {
    if (auto v = c->maybe("tx_power_dbm")) spec.channel.tx_power_dbm = v->as_double();
    if (auto v = c->maybe("noise_dbm")) spec.channel.noise_dbm = v->as_double();
    if (auto v = c->maybe("path_loss_exp")) spec.channel.path_loss_exp = v->as_double();
    if (auto v = c->maybe("nakagami_m")) spec.channel.nakagami_m = v->as_double();
    if (auto v = c->maybe("rb_bandwidth_hz")) spec.channel.rb_bandwidth_hz = v->as_double();
    if (auto v = c->maybe("num_rbs")) spec.channel.num_rbs = v->as_int();
  }
  if (auto u = root.maybe("users")) {
    if (auto v = u->maybe("count")) spec.num_users = v->as_int();
    if (auto v = u->maybe("cluster_weights")) {
      spec.cluster_weights.clear();
      for (std::size_t i = 0; i < v->array_size(); ++i)
        spec.cluster_weights.push_back(v->item(i).as_double());
    }
    if (auto v = u->maybe("request_time")) spec.request_time = cfg::parse_dist(*v);
    if (auto v = u->maybe("request_bits")) spec.request_bits = cfg::parse_dist(*v);
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    root.fail(e.what());
  }
  return spec;
}

inline LearnerConfig learner_from_json(const cfg::Node& n, const LearnerConfig& base) {
  LearnerConfig cfg = base;
  if (auto v = n.maybe("policy_step")) cfg.policy_step = v->as_double();
  if (auto v = n.maybe("meta_step")) cfg.meta_step = v->as_double();
  if (auto v = n.maybe("eta_init")) cfg.eta_init = v->as_double();
  if (auto v = n.maybe("eta_tilde")) cfg.eta_tilde = v->as_double();
  if (auto v = n.maybe("meta_decay")) cfg.meta_decay = v->as_double();
  if (auto v = n.maybe("episodes")) cfg.episodes = v->as_int();
  if (auto v = n.maybe("eta_bounds")) {
    if (v->array_size() != 2) v->fail("expected [lo, hi]");
    cfg.eta_bounds = {v->item(0).as_double(), v->item(1).as_double()};
  }
  if (auto v = n.maybe("meta_ascent")) cfg.meta_ascent = v->as_bool();
  if (auto v = n.maybe("eval_rollout")) cfg.eval_rollout = v->as_bool();
  if (auto v = n.maybe("reuse_eval_experience")) cfg.reuse_eval_experience = v->as_bool();
  if (auto v = n.maybe("hidden_width")) cfg.hidden_width = v->as_int();
  if (auto v = n.maybe("init_scale")) cfg.init_scale = v->as_double();
  if (auto v = n.maybe("max_steps")) cfg.max_steps = v->as_int();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    n.fail(e.what());
  }
  return cfg;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config error in " + path + ": " + e.what());
  }
  return j;
}

inline ScenarioSpec load_scenario_file(const std::string& path) {
  return scenario_from_json(load_json_file(path));
}

}  // namespace dbsim

#pragma once

#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "dbsim/learner.hpp"
#include "dbsim/mdp.hpp"
#include "dbsim/policy.hpp"
#include "dbsim/scenario.hpp"

namespace dbsim {

// Line-delimited JSON exports for inspection and replay. One record per line;
// the first line describes the container.

inline void write_realization_records(std::ostream& out, const Realization& real) {
  nlohmann::json head{
      {"record", "realization"},
      {"seed", real.seed},
      {"num_users", real.users.size()},
      {"horizon_s", real.geometry.horizon_s},
      {"clusters", nlohmann::json::array()},
  };
  for (const auto& p : real.geometry.cluster_positions) head["clusters"].push_back({p.x, p.y});
  out << head.dump() << '\n';
  for (const auto& u : real.users) {
    nlohmann::json rec{
        {"record", "user"},
        {"id", u.user_id},
        {"cluster", u.cluster_id},
        {"offset", {u.ground_offset.x, u.ground_offset.y}},
        {"bits", u.bits},
        {"request_time_s", u.request_time_s},
        {"fading_gain", u.fading_gain},
    };
    out << rec.dump() << '\n';
  }
}

inline void write_experience_records(std::ostream& out, const Experience& exp) {
  nlohmann::json head{
      {"record", "experience"},
      {"steps", exp.steps.size()},
      {"total_utility", exp.total_utility},
      {"t0_s", exp.reconstructed_time()},
  };
  out << head.dump() << '\n';
  for (const auto& s : exp.steps) {
    nlohmann::json rec{
        {"record", "step"},
        {"location", s.state.location},
        {"remaining_s", s.state.remaining_s},
        {"action", s.action.target},
        {"reward", s.reward},
        {"log_prob", s.log_prob},
    };
    out << rec.dump() << '\n';
  }
}

// Ordered cluster visits with timestamps, plain text.
inline void write_trajectory_listing(std::ostream& out, const Realization& real,
                                     const TrajectoryEval& eval) {
  out << "# trajectory on realization seed=" << real.seed << '\n';
  out << "# cluster arrival_s hover_s departure_s served\n";
  for (const auto& v : eval.visits)
    out << v.cluster_id << ' ' << v.arrival_s << ' ' << v.hover_s << ' ' << v.departure_s << ' '
        << v.served_users.size() << '\n';
  out << "# total_time_s " << eval.total_time_s << "  success_rate " << eval.success_rate << '\n';
}

inline void write_episode_record(std::ostream& out, const EpisodeRecord& rec) {
  nlohmann::json j{
      {"episode", rec.episode},  {"utility_e", rec.utility_e},
      {"utility_e_prime", rec.utility_e_prime}, {"eta", rec.eta},
      {"grad_norm", rec.grad_norm},
  };
  out << j.dump() << '\n';
}

// Training checkpoint: episode and eta, then the policy payload.
inline void save_checkpoint(const std::string& path, const PolicyParams& params, double eta,
                            int episode) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << "dbsim-checkpoint v1\n";
  out << episode << ' ' << std::hexfloat << eta << std::defaultfloat << '\n';
  write_policy(out, params);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

struct Checkpoint {
  PolicyParams params;
  double eta = 0.0;
  int episode = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "dbsim-checkpoint v1")
    throw std::runtime_error("load_checkpoint: unsupported format header '" + line + "'");
  Checkpoint ck;
  std::string eta_tok;
  in >> ck.episode >> eta_tok;
  if (!in) throw std::runtime_error("load_checkpoint: bad header line");
  ck.eta = std::strtod(eta_tok.c_str(), nullptr);
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  ck.params = read_policy(in);
  return ck;
}

}  // namespace dbsim

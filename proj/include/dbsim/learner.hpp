#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dbsim/mdp.hpp"
#include "dbsim/metrics.hpp"
#include "dbsim/policy.hpp"
#include "dbsim/random.hpp"

namespace dbsim {

struct LearnerConfig {
  double policy_step = 0.01;   // alpha
  double meta_step = 0.001;    // beta; 0 disables the meta update
  double eta_init = 0.5;
  double eta_tilde = 1.0;      // discount of the measurement objective
  double meta_decay = 0.0;     // decay of the carried update trace; 0 = single-update effect
  int episodes = 1000;
  std::array<double, 2> eta_bounds{0.01, 0.999};
  // Hyper-parameter step direction. false follows the write-up's descending
  // update eta - beta*grad; true ascends the measurement objective instead.
  bool meta_ascent = false;
  // Draw the evaluation rollout e' even when no meta update consumes it, so a
  // plain-PG run stays bitwise comparable to a meta run with meta_step = 0.
  bool eval_rollout = false;
  // Feed e' forward as the next episode's training experience.
  bool reuse_eval_experience = false;
  int hidden_width = 32;
  double init_scale = 0.05;
  int max_steps = 4096;

  void validate() const {
    if (!(policy_step > 0.0)) throw std::invalid_argument("learner: policy_step must be positive");
    if (meta_step < 0.0) throw std::invalid_argument("learner: meta_step must be nonnegative");
    if (!(eta_bounds[0] >= 0.0 && eta_bounds[1] <= 1.0 && eta_bounds[0] <= eta_bounds[1]))
      throw std::invalid_argument("learner: eta_bounds must be within [0, 1]");
    if (eta_init < eta_bounds[0] || eta_init > eta_bounds[1])
      throw std::invalid_argument("learner: eta_init outside eta_bounds");
    if (meta_decay < 0.0 || meta_decay > 1.0)
      throw std::invalid_argument("learner: meta_decay must be in [0, 1]");
    if (episodes < 0) throw std::invalid_argument("learner: episodes must be nonnegative");
  }
};

// Discounted suffix returns G_k = r_k + eta * G_{k+1}.
inline std::vector<double> returns(std::span<const double> rewards, double eta) {
  std::vector<double> g(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + eta * acc;
    g[i] = acc;
  }
  return g;
}

// dG_k/deta via the same recursion: B_k = G_{k+1} + eta * B_{k+1}. Safe at
// eta = 0 where the power form would hit 0^-1.
inline std::vector<double> returns_eta_derivative(std::span<const double> rewards, double eta) {
  std::vector<double> b(rewards.size(), 0.0);
  double g = 0.0;  // G_{k+1}
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = g + eta * acc;
    b[i] = acc;
    g = rewards[i] + eta * g;
  }
  return b;
}

// Weighted score sum: sum_k w_k * grad log pi(a_k | s_k) on one experience.
inline GradientVec weighted_score_sum(const Experience& exp, const PolicyParams& params,
                                      std::span<const double> weights) {
  GradientVec total(params.theta.size(), 0.0);
  const PolicyContext ctx{exp.num_clusters, exp.horizon_s};
  for (std::size_t k = 0; k < exp.steps.size(); ++k) {
    if (weights[k] == 0.0) continue;
    const Step& step = exp.steps[k];
    const GradientVec glp = grad_log_prob(params, ctx, step.state, step.mask, step.action);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += weights[k] * glp[i];
  }
  return total;
}

// Policy-gradient direction on one experience:
//   sum_k G_k(eta) * grad log pi(a_k | s_k).
inline GradientVec policy_objective_grad(const Experience& exp, const PolicyParams& params,
                                         double eta) {
  const std::vector<double> g = returns(exp.rewards(), eta);
  return weighted_score_sum(exp, params, g);
}

struct MetaGradParts {
  GradientVec measurement;  // sum_k' A_k' x_k' on e' under the updated params
  GradientVec sensitivity;  // sum_k  B_k  y_k  on e  under the old params
};

inline MetaGradParts meta_grad_parts(const Experience& e, const PolicyParams& params_old,
                                     double eta, const Experience& e_prime,
                                     const PolicyParams& params_new, double eta_tilde = 1.0) {
  if (params_old.theta.size() != params_new.theta.size())
    throw std::invalid_argument("meta_grad: parameter shapes differ");
  MetaGradParts parts;
  const std::vector<double> a = returns(e_prime.rewards(), eta_tilde);
  parts.measurement = weighted_score_sum(e_prime, params_new, a);
  const std::vector<double> b = returns_eta_derivative(e.rewards(), eta);
  parts.sensitivity = weighted_score_sum(e, params_old, b);
  return parts;
}

// Hyper-parameter tuning direction through one policy update:
//   d/deta Jt(eta_tilde, theta + alpha * grad J(eta, theta))
//     = alpha * (sum_k' A_k' x_k') . (sum_k B_k y_k)
// with A from the measurement experience e' under the updated parameters and
// B the eta-derivative of the returns on the training experience e.
inline double meta_grad(const Experience& e, const PolicyParams& params_old, double eta,
                        const Experience& e_prime, const PolicyParams& params_new,
                        double policy_step, double eta_tilde = 1.0) {
  const MetaGradParts parts = meta_grad_parts(e, params_old, eta, e_prime, params_new, eta_tilde);
  double dot = 0.0;
  for (std::size_t i = 0; i < parts.measurement.size(); ++i)
    dot += parts.measurement[i] * parts.sensitivity[i];
  return policy_step * dot;
}

// Episode-indexed source of realizations. Holds its instances by value; one
// entry means training on a fixed environment.
class RealizationStream {
 public:
  static RealizationStream fixed(Realization real) {
    RealizationStream s;
    s.items_.push_back(std::move(real));
    return s;
  }
  static RealizationStream cycle(std::vector<Realization> reals) {
    if (reals.empty()) throw std::invalid_argument("RealizationStream: need at least one realization");
    RealizationStream s;
    s.items_ = std::move(reals);
    return s;
  }

  const Realization& at(int episode) const {
    return items_[static_cast<std::size_t>(episode) % items_.size()];
  }
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<Realization> items_;
};

struct EpisodeRecord {
  int episode = 0;
  double utility_e = 0.0;
  double utility_e_prime = 0.0;
  double eta = 0.0;
  double grad_norm = 0.0;
};

using EpisodeSink = std::function<void(const EpisodeRecord&)>;
using CheckpointSink = std::function<void(const PolicyParams&, double eta, int episode)>;

// Streaming observers for a training run. checkpoint_every counts episodes;
// zero disables checkpointing.
struct TrainObserver {
  EpisodeSink on_episode;
  CheckpointSink on_checkpoint;
  int checkpoint_every = 0;
};

struct TrainResult {
  PolicyParams params;
  double eta = 0.0;
  RunMetrics metrics;
};

namespace detail {

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline void check_finite(const GradientVec& g, int episode) {
  for (double x : g)
    if (!std::isfinite(x))
      throw std::runtime_error("training aborted: nonfinite gradient at episode " +
                               std::to_string(episode));
}

enum class TrainKind { vanilla, mgpg };

inline TrainResult train_loop(const RealizationStream& stream, const LearnerConfig& cfg,
                              std::uint64_t seed, TrainKind kind, const TrainObserver& observer) {
  cfg.validate();
  if (cfg.reuse_eval_experience && stream.size() > 1)
    throw std::invalid_argument("train: reuse_eval_experience needs a fixed realization stream");
  const Realization& first = stream.at(0);
  const int L = first.num_clusters();
  const PolicyContext ctx{L, first.geometry.horizon_s};

  PolicyParams params = init_policy(default_arch(L, cfg.hidden_width), seed, cfg.init_scale);
  double eta = cfg.eta_init;
  Rng rng(mix_seed(seed, 0xAC7));
  const Environment::Options env_opt{cfg.max_steps};

  RunMetrics metrics;
  metrics.utility.reserve(static_cast<std::size_t>(cfg.episodes));

  GradientVec update_trace;  // carried d theta / d eta when meta_decay > 0
  bool have_carry = false;
  Experience carry;
  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const Realization& real = stream.at(episode);
    if (real.num_clusters() != L || real.geometry.horizon_s != ctx.horizon_s)
      throw std::invalid_argument("train: stream realizations must share cluster count and horizon");

    Experience e = have_carry ? std::move(carry)
                              : rollout(real, SoftmaxPolicy{&params, ctx}, rng, env_opt);
    have_carry = false;

    GradientVec direction = policy_objective_grad(e, params, eta);
    check_finite(direction, episode);
    PolicyParams updated = axpy_update(params, direction, cfg.policy_step);
    check_finite(updated.theta, episode);

    EpisodeRecord rec;
    rec.episode = episode;
    rec.utility_e = e.total_utility;
    rec.grad_norm = l2_norm(direction);

    const bool want_eval = kind == TrainKind::mgpg || cfg.eval_rollout;
    if (want_eval) {
      Experience e_prime = rollout(real, SoftmaxPolicy{&updated, ctx}, rng, env_opt);
      rec.utility_e_prime = e_prime.total_utility;
      if (kind == TrainKind::mgpg && cfg.meta_step > 0.0) {
        double mg;
        if (cfg.meta_decay == 0.0) {
          mg = meta_grad(e, params, eta, e_prime, updated, cfg.policy_step, cfg.eta_tilde);
        } else {
          const MetaGradParts parts =
              meta_grad_parts(e, params, eta, e_prime, updated, cfg.eta_tilde);
          if (update_trace.empty()) update_trace.assign(params.theta.size(), 0.0);
          for (std::size_t i = 0; i < update_trace.size(); ++i)
            update_trace[i] = cfg.meta_decay * update_trace[i] +
                              cfg.policy_step * parts.sensitivity[i];
          mg = 0.0;
          for (std::size_t i = 0; i < update_trace.size(); ++i)
            mg += parts.measurement[i] * update_trace[i];
        }
        if (!std::isfinite(mg))
          throw std::runtime_error("training aborted: nonfinite meta-gradient at episode " +
                                   std::to_string(episode));
        const double signed_step = cfg.meta_ascent ? cfg.meta_step : -cfg.meta_step;
        eta = std::clamp(eta + signed_step * mg, cfg.eta_bounds[0], cfg.eta_bounds[1]);
      }
      if (cfg.reuse_eval_experience) {
        carry = std::move(e_prime);
        have_carry = true;
      }
      metrics.utility_eval.push_back(rec.utility_e_prime);
    }

    params = std::move(updated);
    rec.eta = eta;
    metrics.utility.push_back(rec.utility_e);
    metrics.eta.push_back(eta);
    metrics.grad_norm.push_back(rec.grad_norm);
    if (observer.on_episode) observer.on_episode(rec);
    if (observer.on_checkpoint && observer.checkpoint_every > 0 &&
        (episode + 1) % observer.checkpoint_every == 0)
      observer.on_checkpoint(params, eta, episode + 1);
  }

  metrics.finalize();
  return TrainResult{std::move(params), eta, std::move(metrics)};
}

}  // namespace detail

// Meta-gradient policy gradient: per episode, one policy update from e, one
// measurement rollout e' under the updated parameters, then an eta step.
inline TrainResult mgpg_train(const RealizationStream& stream, const LearnerConfig& cfg,
                              std::uint64_t seed, const TrainObserver& observer = {}) {
  return detail::train_loop(stream, cfg, seed, detail::TrainKind::mgpg, observer);
}

// Fixed-discount baseline: same update rule, eta never moves.
inline TrainResult vanilla_pg_train(const RealizationStream& stream, const LearnerConfig& cfg,
                                    std::uint64_t seed, const TrainObserver& observer = {}) {
  return detail::train_loop(stream, cfg, seed, detail::TrainKind::vanilla, observer);
}

}  // namespace dbsim

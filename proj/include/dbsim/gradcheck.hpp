#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dbsim/learner.hpp"
#include "dbsim/mdp.hpp"
#include "dbsim/policy.hpp"
#include "dbsim/random.hpp"
#include "dbsim/scenario.hpp"

namespace dbsim {

// Reinterpreted training objective on a frozen experience:
//   J(eta, theta) = sum_k G_k(eta) * log pi_theta(a_k | s_k).
// Evaluated through action_probs only, so finite differences of it are an
// oracle independent of the analytic gradient path.
inline double surrogate_objective(const Experience& exp, const PolicyParams& params, double eta) {
  const PolicyContext ctx{exp.num_clusters, exp.horizon_s};
  const std::vector<double> g = returns(exp.rewards(), eta);
  double j = 0.0;
  for (std::size_t k = 0; k < exp.steps.size(); ++k) {
    const Step& s = exp.steps[k];
    const std::vector<double> probs = action_probs(params, ctx, s.state, s.mask);
    j += g[k] * std::log(probs[static_cast<std::size_t>(action_index(s.action, ctx.num_clusters))]);
  }
  return j;
}

// One random check instance: a small world, random parameters, an on-policy
// experience, and a discount.
struct CheckInstance {
  Realization real;
  PolicyParams params;
  Experience exp;
  double eta = 0.5;
};

inline ScenarioSpec gradcheck_scenario() {
  ScenarioSpec spec;
  spec.geometry.cluster_positions = {{150.0, 100.0}, {420.0, 300.0}, {200.0, 450.0}};
  spec.geometry.origin = {300.0, 250.0};
  spec.geometry.altitude_m = 100.0;
  spec.geometry.service_radius_m = 20.0;
  spec.geometry.speed_mps = 30.0;
  spec.geometry.horizon_s = 180.0;
  spec.channel.num_rbs = 64;
  spec.num_users = 12;
  spec.request_time = {ValueDist::Kind::uniform, 0.0, 120.0, 0.0};
  spec.request_bits = {ValueDist::Kind::uniform, 5e8, 2e10, 0.0};
  return spec;
}

inline CheckInstance make_check_instance(std::uint64_t seed) {
  CheckInstance inst;
  inst.real = generate_realization(gradcheck_scenario(), seed);
  const int L = inst.real.num_clusters();
  inst.params = init_policy(default_arch(L), mix_seed(seed, 0x11), 0.3);
  Rng rng(mix_seed(seed, 0x22));
  inst.exp = rollout(inst.real, SoftmaxPolicy{&inst.params, {L, inst.real.geometry.horizon_s}}, rng);
  inst.eta = 0.05 + 0.9 * uniform01(rng);
  return inst;
}

// Central finite difference of J over sampled coordinates against the
// analytic gradient. Error is measured relative to the gradient magnitude
// (max norm), which is the scale a step along the gradient actually moves J.
inline double policy_grad_fd_error(const CheckInstance& inst, int coords = 64,
                                   double fd_step = 1e-6, std::uint64_t coord_seed = 0) {
  const GradientVec analytic = policy_objective_grad(inst.exp, inst.params, inst.eta);
  double scale = 0.0;
  for (double v : analytic) scale = std::max(scale, std::abs(v));

  Rng rng(mix_seed(coord_seed, 0x33));
  const std::size_t n = inst.params.theta.size();
  double worst = 0.0;
  for (int c = 0; c < coords; ++c) {
    const std::size_t i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
    PolicyParams plus = inst.params;
    PolicyParams minus = inst.params;
    plus.theta[i] += fd_step;
    minus.theta[i] -= fd_step;
    const double fd =
        (surrogate_objective(inst.exp, plus, inst.eta) - surrogate_objective(inst.exp, minus, inst.eta)) /
        (2.0 * fd_step);
    const double denom = std::max({scale, std::abs(fd), 1e-12});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

// Finite difference of the measurement objective through the policy update:
//   d/deta Jt(eta_tilde, theta + alpha * grad J(eta, theta))
// on frozen (e, e'), against meta_grad.
inline double meta_grad_fd_error(const CheckInstance& inst, const Experience& e_prime,
                                 double policy_step, double eta_tilde = 1.0,
                                 double fd_step = 1e-5) {
  const auto updated_at = [&](double eta) {
    return axpy_update(inst.params, policy_objective_grad(inst.exp, inst.params, eta), policy_step);
  };
  const PolicyParams params_new = updated_at(inst.eta);
  const double analytic =
      meta_grad(inst.exp, inst.params, inst.eta, e_prime, params_new, policy_step, eta_tilde);

  const PolicyParams plus = updated_at(inst.eta + fd_step);
  const PolicyParams minus = updated_at(inst.eta - fd_step);
  const double fd = (surrogate_objective(e_prime, plus, eta_tilde) -
                     surrogate_objective(e_prime, minus, eta_tilde)) /
                    (2.0 * fd_step);
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-9});
}

struct GradCheckReport {
  double policy_max_rel_err = 0.0;
  double meta_max_rel_err = 0.0;
  int policy_configs = 0;
  int meta_configs = 0;
};

inline GradCheckReport run_gradcheck(std::uint64_t base_seed, int policy_configs = 100,
                                     int meta_configs = 50) {
  GradCheckReport report;
  report.policy_configs = policy_configs;
  report.meta_configs = meta_configs;
  for (int i = 0; i < policy_configs; ++i) {
    const CheckInstance inst = make_check_instance(mix_seed(base_seed, 0x100 + static_cast<std::uint64_t>(i)));
    report.policy_max_rel_err =
        std::max(report.policy_max_rel_err, policy_grad_fd_error(inst, 64, 1e-6, base_seed + i));
  }
  for (int i = 0; i < meta_configs; ++i) {
    const CheckInstance inst = make_check_instance(mix_seed(base_seed, 0x900 + static_cast<std::uint64_t>(i)));
    const double alpha = 0.01;
    const PolicyParams updated =
        axpy_update(inst.params, policy_objective_grad(inst.exp, inst.params, inst.eta), alpha);
    const int L = inst.real.num_clusters();
    Rng rng(mix_seed(base_seed, 0xE0 + static_cast<std::uint64_t>(i)));
    const Experience e_prime =
        rollout(inst.real, SoftmaxPolicy{&updated, {L, inst.real.geometry.horizon_s}}, rng);
    report.meta_max_rel_err =
        std::max(report.meta_max_rel_err, meta_grad_fd_error(inst, e_prime, alpha));
  }
  return report;
}

}  // namespace dbsim

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dbsim/random.hpp"
#include "dbsim/scenario.hpp"

namespace dbsim {

// What the policy observes: current location and remaining time budget.
struct State {
  int location = kOrigin;
  double remaining_s = 0.0;
};

// Target cluster, or kOrigin to end the episode and fly home.
struct Action {
  int target = kOrigin;
  bool is_return() const { return target == kOrigin; }
};

// Mask/probability vectors index clusters 0..L-1 and keep RETURN last.
inline int action_index(const Action& a, int num_clusters) {
  return a.is_return() ? num_clusters : a.target;
}
inline Action action_from_index(int index, int num_clusters) {
  return index == num_clusters ? Action{kOrigin} : Action{index};
}

struct Step {
  State state;
  Action action;
  double reward = 0.0;
  double log_prob = 0.0;
  std::vector<std::uint8_t> mask;  // feasible actions at `state`, size L+1
};

struct Experience {
  std::vector<Step> steps;
  double total_utility = 0.0;     // == success rate of the induced trajectory
  int num_clusters = 0;
  double horizon_s = 0.0;
  double final_remaining_s = 0.0; // budget left after the final return leg

  double reconstructed_time() const { return horizon_s - final_remaining_s; }

  std::vector<int> trajectory() const {
    std::vector<int> t;
    for (const auto& s : steps)
      if (!s.action.is_return()) t.push_back(s.action.target);
    return t;
  }
  std::vector<double> rewards() const {
    std::vector<double> r;
    r.reserve(steps.size());
    for (const auto& s : steps) r.push_back(s.reward);
    return r;
  }
};

struct StepOutcome {
  State next;
  double reward = 0.0;
  std::vector<int> served_users;
  bool terminal = false;
  double travel_s = 0.0;
  double hover_s = 0.0;
};

// Episode simulator over one realization. The environment knows the full
// world (who has been served); the policy observation stays (location, tau).
class Environment {
 public:
  struct Options {
    int max_steps = 4096;  // safety cap; once reached only RETURN stays feasible
  };

  explicit Environment(const Realization& real) : Environment(real, Options()) {}
  Environment(const Realization& real, Options opt)
      : real_(&real),
        opt_(opt),
        delays_(user_delays(real)),
        served_(real.users.size(), 0),
        requesting_(real.requesting_count()) {
    state_ = State{kOrigin, real.geometry.horizon_s};
  }

  const Realization& realization() const { return *real_; }
  const State& state() const { return state_; }
  bool done() const { return done_; }
  int steps_taken() const { return steps_; }
  int served_count() const { return served_count_; }
  int requesting_count() const { return requesting_; }
  std::span<const std::uint8_t> served() const { return served_; }

  // Feasible actions at the current environment state. A cluster stays in iff
  // the leg there, the hover, and the leg home all fit into the remaining
  // budget. A do-nothing transition (zero travel, zero hover, nobody served)
  // is excluded so every step makes progress. RETURN is always feasible.
  std::vector<std::uint8_t> feasible_mask() const {
    const int L = real_->num_clusters();
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(L) + 1, 0);
    mask[static_cast<std::size_t>(L)] = 1;  // RETURN
    if (done_) return mask;
    if (steps_ >= opt_.max_steps) return mask;
    std::vector<int> chosen;
    for (int c = 0; c < L; ++c) {
      const double leg = travel_time_s(real_->geometry, state_.location, c);
      const double arrival = (real_->geometry.horizon_s - state_.remaining_s) + leg;
      detail::select_active_users(*real_, c, arrival, served_, chosen);
      const double hover = detail::hover_for_users(*real_, delays_, chosen);
      const double home = travel_time_s(real_->geometry, c, kOrigin);
      if (leg + hover + home > state_.remaining_s) continue;
      if (leg == 0.0 && hover == 0.0 && chosen.empty()) continue;
      mask[static_cast<std::size_t>(c)] = 1;
    }
    return mask;
  }

  StepOutcome apply(const Action& action) {
    if (done_) throw std::logic_error("Environment::apply: episode already ended");
    const auto mask = feasible_mask();
    if (!mask[static_cast<std::size_t>(action_index(action, real_->num_clusters()))])
      throw std::logic_error("Environment::apply: infeasible action (caller bug)");

    StepOutcome out;
    if (action.is_return()) {
      out.travel_s = travel_time_s(real_->geometry, state_.location, kOrigin);
      out.next = State{kOrigin, state_.remaining_s - out.travel_s};
      out.reward = 0.0;
      out.terminal = true;
      done_ = true;
    } else {
      const int c = action.target;
      out.travel_s = travel_time_s(real_->geometry, state_.location, c);
      const double arrival = (real_->geometry.horizon_s - state_.remaining_s) + out.travel_s;
      std::vector<int> chosen;
      detail::select_active_users(*real_, c, arrival, served_, chosen);
      out.hover_s = detail::hover_for_users(*real_, delays_, chosen);
      for (int id : chosen) served_[static_cast<std::size_t>(id)] = 1;
      served_count_ += static_cast<int>(chosen.size());
      out.reward = requesting_ > 0 ? static_cast<double>(chosen.size()) / requesting_ : 0.0;
      out.served_users = std::move(chosen);
      out.next = State{c, state_.remaining_s - out.travel_s - out.hover_s};
    }
    state_ = out.next;
    ++steps_;
    return out;
  }

 private:
  const Realization* real_;
  Options opt_;
  std::vector<double> delays_;
  std::vector<std::uint8_t> served_;
  State state_;
  int steps_ = 0;
  int served_count_ = 0;
  bool done_ = false;
  int requesting_ = 0;
};

// Standalone feasibility query for an arbitrary state; `served` defaults to
// nobody served. Mirrors Environment::feasible_mask without the step cap.
inline std::vector<Action> feasible_actions(const Realization& real, const State& state,
                                            std::span<const std::uint8_t> served = {}) {
  const Geometry& g = real.geometry;
  const std::vector<double> delays = user_delays(real);
  std::vector<Action> actions;
  std::vector<int> chosen;
  for (int c = 0; c < g.num_clusters(); ++c) {
    const double leg = travel_time_s(g, state.location, c);
    const double arrival = (g.horizon_s - state.remaining_s) + leg;
    detail::select_active_users(real, c, arrival, served, chosen);
    const double hover = detail::hover_for_users(real, delays, chosen);
    const double home = travel_time_s(g, c, kOrigin);
    if (leg + hover + home > state.remaining_s) continue;
    if (leg == 0.0 && hover == 0.0 && chosen.empty()) continue;
    actions.push_back(Action{c});
  }
  actions.push_back(Action{kOrigin});
  return actions;
}

template <typename P>
concept ActionPolicy = requires(const P& p, const State& s, std::span<const std::uint8_t> mask) {
  { p.action_probs(s, mask) } -> std::convertible_to<std::vector<double>>;
};

// Samples one episode. Actions are drawn from the policy's masked
// distribution until RETURN is chosen or forced by the mask.
template <ActionPolicy P>
Experience rollout(const Realization& real, const P& policy, Rng& rng,
                   Environment::Options opt = {}) {
  Environment env(real, opt);
  const int L = real.num_clusters();

  Experience exp;
  exp.num_clusters = L;
  exp.horizon_s = real.geometry.horizon_s;

  while (!env.done()) {
    Step step;
    step.state = env.state();
    step.mask = env.feasible_mask();
    const std::vector<double> probs = policy.action_probs(step.state, step.mask);

    const double u = uniform01(rng);
    double cum = 0.0;
    int picked = L;  // fall back to RETURN on accumulated rounding
    for (int i = 0; i <= L; ++i) {
      if (!step.mask[static_cast<std::size_t>(i)]) continue;
      cum += probs[static_cast<std::size_t>(i)];
      if (u < cum) {
        picked = i;
        break;
      }
    }
    step.action = action_from_index(picked, L);
    step.log_prob = std::log(probs[static_cast<std::size_t>(picked)]);

    const StepOutcome out = env.apply(step.action);
    step.reward = out.reward;
    exp.total_utility += out.reward;
    exp.steps.push_back(std::move(step));
    if (out.terminal) exp.final_remaining_s = out.next.remaining_s;
  }
  return exp;
}

}  // namespace dbsim

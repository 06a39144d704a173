#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dbsim/enumerate.hpp"
#include "dbsim/mdp.hpp"
#include "dbsim/policy.hpp"
#include "dbsim/scenario.hpp"

using namespace dbsim;

namespace {

double oracle_rate_bps(double dist_m, double fading = 1.0) {
  const double p_w = std::pow(10.0, (20.0 - 30.0) / 10.0);
  const double n_w = std::pow(10.0, (-104.0 - 30.0) / 10.0);
  const double snr = p_w * fading * std::pow(dist_m, -2.0) / n_w;
  return 20e6 * std::log2(1.0 + snr);
}

ChannelParams table_channel() { return ChannelParams{20.0, -104.0, 2.0, 3.0, 20e6, 1024}; }

Geometry geom(std::vector<Point2> clusters, double horizon, Point2 origin = {0.0, 0.0}) {
  Geometry g;
  g.cluster_positions = std::move(clusters);
  g.origin = origin;
  g.altitude_m = 100.0;
  g.service_radius_m = 20.0;
  g.speed_mps = 30.0;
  g.horizon_s = horizon;
  return g;
}

UserRequest make_user(int id, int cluster, double bits, double t) {
  return UserRequest{id, cluster, {0.0, 0.0}, bits, t, 1.0};
}

Realization make_manual(Geometry g, ChannelParams c, std::vector<UserRequest> users) {
  Realization r;
  r.geometry = std::move(g);
  r.channel = c;
  r.users = std::move(users);
  return r;
}

// all requests live at t=0, bits sized for a given transmission delay
Realization uniform_toy(std::vector<Point2> clusters, double horizon, int users_per_cluster,
                        double delay_s) {
  const double rate = oracle_rate_bps(100.0);
  std::vector<UserRequest> users;
  int id = 0;
  for (std::size_t cidx = 0; cidx < clusters.size(); ++cidx)
    for (int i = 0; i < users_per_cluster; ++i)
      users.push_back(make_user(id++, static_cast<int>(cidx), delay_s * rate, 0.0));
  return make_manual(geom(std::move(clusters), horizon), table_channel(), std::move(users));
}

struct AlwaysReturnPolicy {
  std::vector<double> action_probs(const State&, std::span<const std::uint8_t> mask) const {
    std::vector<double> p(mask.size(), 0.0);
    p.back() = 1.0;
    return p;
  }
};

struct UniformPolicy {
  std::vector<double> action_probs(const State&, std::span<const std::uint8_t> mask) const {
    int feasible = 0;
    for (auto m : mask) feasible += m != 0;
    std::vector<double> p(mask.size(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) p[i] = 1.0 / feasible;
    return p;
  }
};

// visits a fixed cluster list then returns
struct ScriptedPolicy {
  std::vector<int> script;
  std::vector<double> action_probs(const State&, std::span<const std::uint8_t> mask) const {
    std::vector<double> p(mask.size(), 0.0);
    if (step < script.size()) {
      p[static_cast<std::size_t>(script[step])] = 1.0;
    } else {
      p.back() = 1.0;
    }
    ++step;
    return p;
  }
  mutable std::size_t step = 0;
};

}  // namespace

TEST_CASE("feasible_actions: exhausted budget leaves only RETURN") {
  const Realization r = uniform_toy({{300.0, 0.0}}, 100.0, 2, 5.0);
  const auto actions = feasible_actions(r, State{kOrigin, 0.0});
  REQUIRE(actions.size() == 1);
  REQUIRE(actions[0].is_return());
}

TEST_CASE("feasible_actions: boundary budget is inclusive") {
  // cluster with no users: hover is exactly zero, cost is exactly 20 s
  const Realization r = make_manual(geom({{300.0, 0.0}}, 100.0), table_channel(), {});
  const double cost = 300.0 / 30.0 + 300.0 / 30.0;
  {
    const auto actions = feasible_actions(r, State{kOrigin, cost});
    REQUIRE(actions.size() == 2);
    REQUIRE(actions[0].target == 0);
  }
  {
    const auto actions = feasible_actions(r, State{kOrigin, std::nextafter(cost, 0.0)});
    REQUIRE(actions.size() == 1);
    REQUIRE(actions[0].is_return());
  }
}

TEST_CASE("feasible_actions: generous budget admits every cluster") {
  const Realization r = uniform_toy({{300.0, 0.0}, {0.0, 300.0}, {-200.0, 100.0}}, 1000.0, 2, 2.0);
  const auto actions = feasible_actions(r, State{kOrigin, 1000.0});
  REQUIRE(actions.size() == 4);  // three clusters plus RETURN
}

TEST_CASE("environment step: reward counting, revisits, terminal RETURN") {
  // 50 requesting users; cluster 0 holds 5 of them
  const double rate = oracle_rate_bps(100.0);
  std::vector<UserRequest> users;
  for (int i = 0; i < 5; ++i) users.push_back(make_user(i, 0, 0.1 * rate, 0.0));
  for (int i = 5; i < 50; ++i) users.push_back(make_user(i, 1, 0.1 * rate, 0.0));
  const Realization r =
      make_manual(geom({{300.0, 0.0}, {0.0, 300.0}}, 400.0), table_channel(), users);

  Environment env(r);
  const StepOutcome first = env.apply(Action{0});
  REQUIRE(first.reward == Catch::Approx(0.1).epsilon(1e-12));
  REQUIRE(first.served_users.size() == 5);
  REQUIRE_FALSE(first.terminal);

  // revisit: nothing left to serve there, but the legs still cost time
  const double before = env.state().remaining_s;
  const StepOutcome second = env.apply(Action{1});
  REQUIRE(second.reward == Catch::Approx(0.9).epsilon(1e-12));
  const StepOutcome revisit = env.apply(Action{0});
  REQUIRE(revisit.reward == 0.0);
  REQUIRE(env.state().remaining_s < before);

  const StepOutcome ret = env.apply(Action{kOrigin});
  REQUIRE(ret.reward == 0.0);
  REQUIRE(ret.terminal);
  REQUIRE(env.done());
  REQUIRE(ret.next.remaining_s >= 0.0);
}

TEST_CASE("environment step: infeasible action is a caller bug") {
  const Realization r = uniform_toy({{3000.0, 0.0}}, 100.0, 1, 5.0);  // unreachable cluster
  Environment env(r);
  REQUIRE_THROWS_AS(env.apply(Action{0}), std::logic_error);
}

TEST_CASE("rollout: always-RETURN policy yields a one-step empty experience") {
  const Realization r = uniform_toy({{300.0, 0.0}}, 100.0, 2, 5.0);
  Rng rng(1);
  const Experience exp = rollout(r, AlwaysReturnPolicy{}, rng);
  REQUIRE(exp.steps.size() == 1);
  REQUIRE(exp.steps.back().action.is_return());
  REQUIRE(exp.total_utility == 0.0);
}

TEST_CASE("rollout: utility equals the scenario success rate of the trajectory") {
  const Realization r = uniform_toy({{300.0, 0.0}, {100.0, 250.0}}, 120.0, 3, 4.0);
  Rng rng(2);
  const ScriptedPolicy policy{{1, 0}};
  const Experience exp = rollout(r, policy, rng);
  const std::vector<int> traj = exp.trajectory();
  REQUIRE(traj == std::vector<int>{1, 0});
  REQUIRE(exp.total_utility == Catch::Approx(success_rate(r, traj)).margin(1e-12));

  double sum = 0.0;
  for (const auto& s : exp.steps) sum += s.reward;
  REQUIRE(sum == Catch::Approx(exp.total_utility).margin(1e-12));
}

TEST_CASE("rollout: every episode satisfies the time budget, any seed") {
  ScenarioSpec spec;
  spec.geometry = geom({}, 300.0, {400.0, 400.0});
  spec.geometry.cluster_positions.clear();
  spec.num_clusters = 4;
  spec.area = {800.0, 800.0};
  spec.channel = table_channel();
  spec.num_users = 40;
  spec.request_time = {ValueDist::Kind::uniform, 0.0, 250.0, 0.0};
  spec.request_bits = {ValueDist::Kind::uniform, 5e8, 1.5e10, 0.0};

  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const Realization real = generate_realization(spec, seed);
    Rng rng(seed * 31 + 7);
    for (int episode = 0; episode < 40; ++episode) {
      const Experience exp = rollout(real, UniformPolicy{}, rng);
      REQUIRE(exp.reconstructed_time() <= real.geometry.horizon_s);
      REQUIRE(exp.final_remaining_s >= 0.0);
      REQUIRE(!exp.steps.empty());
      REQUIRE(exp.steps.back().action.is_return());
      // telescoping against the scenario module
      REQUIRE(exp.total_utility ==
              Catch::Approx(success_rate(real, exp.trajectory())).margin(1e-12));
      // trajectory time reconstruction matches the walk
      REQUIRE(exp.reconstructed_time() ==
              Catch::Approx(trajectory_time(real, exp.trajectory())).margin(1e-9));
    }
  }
}

TEST_CASE("rollout mean utility matches exact policy expectation") {
  const Realization r = uniform_toy({{240.0, 0.0}, {0.0, 240.0}}, 45.0, 2, 3.0);
  const UniformPolicy policy;
  const double exact = policy_expected_utility(r, policy);

  Rng rng(99);
  const int n = 10000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rollout(r, policy, rng).total_utility;
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = (sumsq - n * mean * mean) / (n - 1);
  const double se = std::sqrt(var / n);
  REQUIRE(std::abs(mean - exact) <= 3.0 * std::max(se, 1e-9));
}

TEST_CASE("enumerate_optimal: single reachable cluster") {
  const Realization r = uniform_toy({{300.0, 0.0}}, 60.0, 3, 4.0);
  const EnumerateResult best = enumerate_optimal(r);
  REQUIRE(best.trajectory == std::vector<int>{0});
  REQUIRE(best.utility == 1.0);
}

TEST_CASE("enumerate_optimal: budget admits only the bigger cluster") {
  // both clusters 10 s away; budget fits one visit; cluster 1 holds more users
  const double rate = oracle_rate_bps(100.0);
  std::vector<UserRequest> users;
  users.push_back(make_user(0, 0, 2.0 * rate, 0.0));
  for (int i = 1; i < 4; ++i) users.push_back(make_user(i, 1, 2.0 * rate, 0.0));
  const Realization r =
      make_manual(geom({{300.0, 0.0}, {-300.0, 0.0}}, 22.0), table_channel(), users);

  const EnumerateResult best = enumerate_optimal(r);
  REQUIRE(best.trajectory == std::vector<int>{1});
  REQUIRE(best.utility == Catch::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("enumerate_optimal: request timing forces one visiting order") {
  // equidistant clusters; B's user requests late, so A-then-B is the only
  // order that serves both within the horizon
  const double rate = oracle_rate_bps(100.0);
  Geometry g = geom({{300.0, 0.0}, {0.0, 300.0}}, 45.0);
  g.service_radius_m = 15.0;  // straight traverse is exactly 1 s
  std::vector<UserRequest> users;
  users.push_back(make_user(0, 0, 9.0 * rate, 0.0));   // hover 8 s at A
  users.push_back(make_user(1, 1, 3.0 * rate, 15.0));  // hover 2 s at B, live from t=15
  const Realization r = make_manual(g, table_channel(), users);

  const EnumerateResult best = enumerate_optimal(r);
  REQUIRE(best.utility == 1.0);
  REQUIRE(best.trajectory == std::vector<int>{0, 1});
}

TEST_CASE("enumerate_optimal dominates sampled rollouts") {
  const Realization r = uniform_toy({{240.0, 0.0}, {60.0, 180.0}, {-120.0, -90.0}}, 70.0, 2, 3.0);
  const EnumerateResult best = enumerate_optimal(r);
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const Experience exp = rollout(r, UniformPolicy{}, rng);
    REQUIRE(exp.total_utility <= best.utility + 1e-12);
  }
}

TEST_CASE("enumerate_optimal: node budget guard reports the bound") {
  const Realization r = uniform_toy({{240.0, 0.0}, {0.0, 240.0}, {-240.0, 0.0}}, 500.0, 2, 3.0);
  EnumerateOptions opt;
  opt.max_nodes = 10;
  REQUIRE_THROWS_WITH(enumerate_optimal(r, opt),
                      Catch::Matchers::ContainsSubstring("max_nodes=10"));
}

TEST_CASE("feasible mask never empties: RETURN survives everywhere") {
  const Realization r = uniform_toy({{150.0, 0.0}, {0.0, 150.0}}, 80.0, 2, 2.0);
  Rng rng(17);
  for (int episode = 0; episode < 30; ++episode) {
    Environment env(r);
    while (!env.done()) {
      const auto mask = env.feasible_mask();
      REQUIRE(mask.back() == 1);
      // walk a uniform choice forward
      const auto probs = UniformPolicy{}.action_probs(env.state(), mask);
      double u = uniform01(rng), cum = 0.0;
      int pick = static_cast<int>(mask.size()) - 1;
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        cum += probs[i];
        if (u < cum) { pick = static_cast<int>(i); break; }
      }
      env.apply(action_from_index(pick, r.num_clusters()));
    }
  }
}

TEST_CASE("environment max_steps forces RETURN eventually") {
  const Realization r = uniform_toy({{60.0, 0.0}, {0.0, 60.0}}, 4000.0, 1, 0.5);
  Environment::Options opt;
  opt.max_steps = 5;
  Rng rng(3);
  const Experience exp = rollout(r, UniformPolicy{}, rng, opt);
  REQUIRE(exp.steps.size() <= 6);  // five capped steps plus the forced RETURN
  REQUIRE(exp.steps.back().action.is_return());
}

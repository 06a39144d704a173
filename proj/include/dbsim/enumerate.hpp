#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbsim/mdp.hpp"
#include "dbsim/scenario.hpp"

namespace dbsim {

struct EnumerationLimit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnumerateOptions {
  long long max_nodes = 10'000'000;
  // Skip a visit when the cluster has no unserved user requesting within the
  // horizon, so nothing can ever be gained there.
  bool prune_gainless = true;
};

struct EnumerateResult {
  std::vector<int> trajectory;
  double utility = 0.0;
  long long nodes = 0;
};

namespace detail {

struct EnumWalker {
  const Realization* real;
  EnumerateOptions opt;
  std::vector<double> delays;
  std::vector<std::uint8_t> served;
  std::vector<int> unserved_requesting_per_cluster;
  std::vector<int> path;
  int requesting = 0;
  int served_count = 0;
  long long nodes = 0;
  EnumerateResult best;

  explicit EnumWalker(const Realization& r, EnumerateOptions o)
      : real(&r), opt(o), delays(user_delays(r)), served(r.users.size(), 0),
        unserved_requesting_per_cluster(static_cast<std::size_t>(r.num_clusters()), 0),
        requesting(r.requesting_count()) {
    for (const auto& u : r.users)
      if (u.request_time_s >= 0.0 && u.request_time_s <= r.geometry.horizon_s)
        ++unserved_requesting_per_cluster[static_cast<std::size_t>(u.cluster_id)];
  }

  void dfs(int location, double budget) {
    if (++nodes > opt.max_nodes)
      throw EnumerationLimit("enumerate_optimal: node budget exceeded (max_nodes=" +
                             std::to_string(opt.max_nodes) + "); instance too large");
    const double utility =
        requesting > 0 ? static_cast<double>(served_count) / requesting : 0.0;
    if (utility > best.utility) {  // first-found optimum wins ties: deterministic
      best.utility = utility;
      best.trajectory = path;
    }

    const Geometry& g = real->geometry;
    std::vector<int> chosen;
    for (int c = 0; c < g.num_clusters(); ++c) {
      if (opt.prune_gainless && unserved_requesting_per_cluster[static_cast<std::size_t>(c)] == 0)
        continue;
      const double leg = travel_time_s(g, location, c);
      const double arrival = (g.horizon_s - budget) + leg;
      dbsim::detail::select_active_users(*real, c, arrival, served, chosen);
      const double hover = dbsim::detail::hover_for_users(*real, delays, chosen);
      const double home = travel_time_s(g, c, kOrigin);
      if (leg + hover + home > budget) continue;
      if (leg == 0.0 && hover == 0.0 && chosen.empty()) continue;

      for (int id : chosen) {
        served[static_cast<std::size_t>(id)] = 1;
        --unserved_requesting_per_cluster[static_cast<std::size_t>(c)];
      }
      served_count += static_cast<int>(chosen.size());
      path.push_back(c);

      dfs(c, budget - leg - hover);

      path.pop_back();
      served_count -= static_cast<int>(chosen.size());
      for (int id : chosen) {
        served[static_cast<std::size_t>(id)] = 0;
        ++unserved_requesting_per_cluster[static_cast<std::size_t>(c)];
      }
    }
  }
};

}  // namespace detail

// Exact search over feasible cluster sequences; the argmax of the service
// success rate on this realization. Meant for desk-size instances; refuses to
// run past max_nodes.
inline EnumerateResult enumerate_optimal(const Realization& real, EnumerateOptions opt = {}) {
  detail::EnumWalker walker(real, opt);
  walker.best.utility = -1.0;  // root node installs the empty trajectory
  walker.dfs(kOrigin, real.geometry.horizon_s);
  walker.best.nodes = walker.nodes;
  return walker.best;
}

// Expected utility of a policy by full expansion of the episode tree with its
// action probabilities. Tiny instances only; shares the environment rules
// with rollout so both sides describe the same distribution.
template <ActionPolicy P>
double policy_expected_utility(const Realization& real, const P& policy,
                               Environment::Options env_opt = {},
                               long long max_nodes = 10'000'000) {
  struct Expander {
    const P* policy;
    long long nodes = 0;
    long long cap;
    double total = 0.0;

    explicit Expander(const P& p, long long mn) : policy(&p), cap(mn) {}

    void expand(const Environment& env, double prob) {
      if (++nodes > cap)
        throw EnumerationLimit("policy_expected_utility: node budget exceeded");
      const auto mask = env.feasible_mask();
      const std::vector<double> probs = policy->action_probs(env.state(), mask);
      const int L = env.realization().num_clusters();
      for (int i = 0; i <= L; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const double p = probs[static_cast<std::size_t>(i)];
        if (p <= 0.0) continue;
        Environment next = env;  // copy-on-branch; fine at desk scale
        next.apply(action_from_index(i, L));
        if (i == L) {
          const double utility =
              next.requesting_count() > 0
                  ? static_cast<double>(next.served_count()) / next.requesting_count()
                  : 0.0;
          total += prob * p * utility;
        } else {
          expand(next, prob * p);
        }
      }
    }
  };

  Expander ex(policy, max_nodes);
  Environment root(real, env_opt);
  ex.expand(root, 1.0);
  return ex.total;
}

}  // namespace dbsim

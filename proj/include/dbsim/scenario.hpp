#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbsim/channel.hpp"
#include "dbsim/geometry.hpp"
#include "dbsim/random.hpp"

namespace dbsim {

struct UserRequest {
  int user_id = 0;
  int cluster_id = 0;
  Point2 ground_offset;       // relative to the cluster center, |offset| <= d_r
  double bits = 0.0;          // payload of the access request
  double request_time_s = 0.0;
  double fading_gain = 1.0;   // unit-mean Gamma draw, fixed for the realization
};

// One sampled environment instance: the static world plus one draw of the
// users' request times, sizes and fading gains.
struct Realization {
  Geometry geometry;
  ChannelParams channel;
  std::vector<UserRequest> users;
  std::uint64_t seed = 0;

  int num_clusters() const { return geometry.num_clusters(); }

  int requesting_count() const {
    int n = 0;
    for (const auto& u : users)
      if (u.request_time_s >= 0.0 && u.request_time_s <= geometry.horizon_s) ++n;
    return n;
  }
};

struct ValueDist {
  enum class Kind { uniform, constant };
  Kind kind = Kind::uniform;
  double lo = 0.0;
  double hi = 0.0;    // uniform support [lo, hi]
  double value = 0.0; // constant

  double sample(Rng& rng) const {
    if (kind == Kind::constant) return value;
    return lo + (hi - lo) * uniform01(rng);
  }
  double min_value() const { return kind == Kind::constant ? value : lo; }
  double max_value() const { return kind == Kind::constant ? value : hi; }
};

// Declarative scenario description. Cluster positions are part of the spec
// (fixed across realizations): either listed explicitly or laid out once from
// layout_seed inside the area rectangle.
struct ScenarioSpec {
  Geometry geometry;                    // cluster_positions may be empty
  ChannelParams channel;
  int num_users = 100;
  int num_clusters = 6;                 // used when positions are not listed
  std::array<double, 2> area{1000.0, 1000.0};
  std::uint64_t layout_seed = 42;
  std::vector<double> cluster_weights;  // empty = uniform across clusters
  ValueDist request_time{ValueDist::Kind::uniform, 0.0, 400.0, 0.0};
  ValueDist request_bits{ValueDist::Kind::uniform, 1e7, 1e9, 0.0};

  void validate() const {
    channel.validate();
    if (num_users < 1) throw std::invalid_argument("scenario: num_users must be >= 1");
    const bool explicit_clusters = !geometry.cluster_positions.empty();
    const int cluster_count = explicit_clusters ? geometry.num_clusters() : num_clusters;
    if (cluster_count < 1) throw std::invalid_argument("scenario: need at least one cluster");
    if (!explicit_clusters && (!(area[0] > 0.0) || !(area[1] > 0.0)))
      throw std::invalid_argument("scenario: area must be positive");
    if (!cluster_weights.empty()) {
      if (static_cast<int>(cluster_weights.size()) != cluster_count)
        throw std::invalid_argument("scenario: cluster_weights size must match cluster count");
      double total = 0.0;
      for (double w : cluster_weights) {
        if (w < 0.0) throw std::invalid_argument("scenario: cluster_weights must be nonnegative");
        total += w;
      }
      if (!(total > 0.0)) throw std::invalid_argument("scenario: cluster_weights must not all be zero");
    }
    if (request_time.min_value() < 0.0 || request_time.max_value() > geometry.horizon_s ||
        request_time.min_value() > request_time.max_value())
      throw std::invalid_argument("scenario: request_time support must lie in [0, horizon]");
    if (!(request_bits.min_value() > 0.0) || request_bits.min_value() > request_bits.max_value())
      throw std::invalid_argument("scenario: request_bits support must be positive");
  }

  // Geometry with cluster positions resolved (drawn from layout_seed when not
  // explicit). Deterministic: realizations of one spec share this layout.
  Geometry resolved_geometry() const {
    Geometry g = geometry;
    if (g.cluster_positions.empty()) {
      Rng rng(mix_seed(layout_seed, 0xC1));
      g.cluster_positions.resize(static_cast<std::size_t>(num_clusters));
      for (auto& p : g.cluster_positions) {
        p.x = area[0] * uniform01(rng);
        p.y = area[1] * uniform01(rng);
      }
    }
    g.validate();
    return g;
  }
};

inline Realization generate_realization(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  Realization real;
  real.geometry = spec.resolved_geometry();
  real.channel = spec.channel;
  real.seed = seed;

  const int cluster_count = real.geometry.num_clusters();
  Rng rng(mix_seed(seed, 0x5EED));

  std::vector<double> cdf(static_cast<std::size_t>(cluster_count));
  {
    double total = 0.0;
    for (int l = 0; l < cluster_count; ++l) {
      total += spec.cluster_weights.empty() ? 1.0 : spec.cluster_weights[static_cast<std::size_t>(l)];
      cdf[static_cast<std::size_t>(l)] = total;
    }
    for (auto& c : cdf) c /= total;
  }

  std::gamma_distribution<double> fading(spec.channel.nakagami_m, 1.0 / spec.channel.nakagami_m);

  real.users.reserve(static_cast<std::size_t>(spec.num_users));
  for (int u = 0; u < spec.num_users; ++u) {
    UserRequest req;
    req.user_id = u;
    const double pick = uniform01(rng);
    req.cluster_id = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin());
    req.cluster_id = std::min(req.cluster_id, cluster_count - 1);
    // uniform in the service disk
    const double radius = real.geometry.service_radius_m * std::sqrt(uniform01(rng));
    const double angle = 2.0 * M_PI * uniform01(rng);
    req.ground_offset = {radius * std::cos(angle), radius * std::sin(angle)};
    req.bits = spec.request_bits.sample(rng);
    req.request_time_s = spec.request_time.sample(rng);
    req.fading_gain = fading(rng);
    real.users.push_back(req);
  }
  return real;
}

// ---- per-user link quantities ----

inline double user_link_distance_m(const Geometry& g, const UserRequest& u) {
  const double off = std::hypot(u.ground_offset.x, u.ground_offset.y);
  return std::hypot(g.altitude_m, off);
}

inline double user_rate(const ChannelParams& c, const Geometry& g, const UserRequest& u) {
  return link_rate_bps(c, user_link_distance_m(g, u), u.fading_gain);
}

inline double user_delay_s(const ChannelParams& c, const Geometry& g, const UserRequest& u) {
  return u.bits / user_rate(c, g, u);
}

inline std::vector<double> user_delays(const Realization& real) {
  std::vector<double> d;
  d.reserve(real.users.size());
  for (const auto& u : real.users) d.push_back(user_delay_s(real.channel, real.geometry, u));
  return d;
}

// ---- service walk ----
//
// A visit serves the active users of the cluster: unserved, already requested
// at the arrival epoch, capped at num_rbs (earliest requesters first). The
// hover time is set by the slowest user actually allocated a resource block.

namespace detail {

inline void select_active_users(const Realization& real, int cluster_id, double arrival_time_s,
                                std::span<const std::uint8_t> served, std::vector<int>& out) {
  out.clear();
  for (const auto& u : real.users) {
    if (u.cluster_id != cluster_id) continue;
    if (u.request_time_s > arrival_time_s) continue;
    if (!served.empty() && served[static_cast<std::size_t>(u.user_id)]) continue;
    out.push_back(u.user_id);
  }
  const std::size_t cap = static_cast<std::size_t>(real.channel.num_rbs);
  if (out.size() > cap) {
    std::sort(out.begin(), out.end(), [&](int a, int b) {
      const auto& ua = real.users[static_cast<std::size_t>(a)];
      const auto& ub = real.users[static_cast<std::size_t>(b)];
      if (ua.request_time_s != ub.request_time_s) return ua.request_time_s < ub.request_time_s;
      return a < b;
    });
    out.resize(cap);
  }
}

inline double hover_for_users(const Realization& real, std::span<const double> delays,
                              std::span<const int> chosen) {
  if (chosen.empty()) return 0.0;
  double slowest = 0.0;
  for (int id : chosen) slowest = std::max(slowest, delays[static_cast<std::size_t>(id)]);
  const double slf = 2.0 * real.geometry.service_radius_m / real.geometry.speed_mps;
  return std::max(0.0, slowest - slf);  // hovering cannot take negative time
}

}  // namespace detail

// Hover time at a cluster for a given arrival epoch. `served` marks users to
// exclude from the active set; empty means nobody has been served yet.
inline double hover_time(const Realization& real, int cluster_id, double arrival_time_s,
                         std::span<const std::uint8_t> served = {}) {
  if (cluster_id < 0 || cluster_id >= real.num_clusters())
    throw std::invalid_argument("hover_time: invalid cluster_id " + std::to_string(cluster_id));
  const std::vector<double> delays = user_delays(real);
  std::vector<int> chosen;
  detail::select_active_users(real, cluster_id, arrival_time_s, served, chosen);
  return detail::hover_for_users(real, delays, chosen);
}

struct Visit {
  int cluster_id = 0;
  double arrival_s = 0.0;
  double hover_s = 0.0;
  double departure_s = 0.0;
  double budget_after_s = 0.0;  // tau_k: remaining time after serving this cluster
  std::vector<int> served_users;
};

struct TrajectoryEval {
  std::vector<Visit> visits;
  double total_time_s = 0.0;    // t_0: includes the final leg back to origin
  int served_count = 0;
  int requesting_count = 0;
  double success_rate = 0.0;
};

// Walks a cluster sequence from the origin and back, serving users along the
// way. Budget bookkeeping uses the tau recursion: tau_k = tau_{k-1} - leg - hover.
inline TrajectoryEval evaluate_trajectory(const Realization& real, std::span<const int> trajectory) {
  const Geometry& g = real.geometry;
  const std::vector<double> delays = user_delays(real);
  std::vector<std::uint8_t> served(real.users.size(), 0);

  TrajectoryEval eval;
  eval.requesting_count = real.requesting_count();

  int location = kOrigin;
  double budget = g.horizon_s;
  std::vector<int> chosen;
  for (int cluster : trajectory) {
    if (cluster < 0 || cluster >= g.num_clusters())
      throw std::invalid_argument("evaluate_trajectory: invalid cluster id " + std::to_string(cluster));
    const double leg = travel_time_s(g, location, cluster);
    const double arrival = (g.horizon_s - budget) + leg;
    detail::select_active_users(real, cluster, arrival, served, chosen);
    const double hover = detail::hover_for_users(real, delays, chosen);

    Visit visit;
    visit.cluster_id = cluster;
    visit.arrival_s = arrival;
    visit.hover_s = hover;
    visit.departure_s = arrival + hover;
    visit.served_users = chosen;
    for (int id : chosen) served[static_cast<std::size_t>(id)] = 1;
    eval.served_count += static_cast<int>(chosen.size());

    budget = budget - leg - hover;
    visit.budget_after_s = budget;
    eval.visits.push_back(std::move(visit));
    location = cluster;
  }
  const double return_leg = travel_time_s(g, location, kOrigin);
  eval.total_time_s = (g.horizon_s - budget) + return_leg;
  eval.success_rate =
      eval.requesting_count > 0 ? static_cast<double>(eval.served_count) / eval.requesting_count : 0.0;
  return eval;
}

// t_0 via the tau recursion; per-step budgets are exposed on the visits.
inline double trajectory_time(const Realization& real, std::span<const int> trajectory) {
  return evaluate_trajectory(real, trajectory).total_time_s;
}

// Independent closed form: sum of all leg times plus all hover times. Kept as
// a second code path; must agree with the recursion to float accuracy.
inline double trajectory_time_direct(const Realization& real, std::span<const int> trajectory) {
  const Geometry& g = real.geometry;
  const std::vector<double> delays = user_delays(real);
  std::vector<std::uint8_t> served(real.users.size(), 0);

  double legs = 0.0;
  double hovers = 0.0;
  double elapsed = 0.0;
  int location = kOrigin;
  std::vector<int> chosen;
  for (int cluster : trajectory) {
    const double leg = travel_time_s(g, location, cluster);
    detail::select_active_users(real, cluster, elapsed + leg, served, chosen);
    const double hover = detail::hover_for_users(real, delays, chosen);
    for (int id : chosen) served[static_cast<std::size_t>(id)] = 1;
    legs += leg;
    hovers += hover;
    elapsed += leg + hover;
    location = cluster;
  }
  legs += travel_time_s(g, location, kOrigin);
  return legs + hovers;
}

// Fraction of requesting users served along the trajectory; 0 when nobody
// requests within the horizon.
inline double success_rate(const Realization& real, std::span<const int> trajectory) {
  return evaluate_trajectory(real, trajectory).success_rate;
}

}  // namespace dbsim

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dbsim/scenario.hpp"

using namespace dbsim;

namespace {

// Independent link-budget arithmetic: straight transcription of the SNR and
// rate definitions, used as the oracle for the channel module.
double oracle_rate_bps(double p_dbm, double noise_dbm, double alpha, double bw_hz,
                       double dist_m, double fading) {
  const double p_w = std::pow(10.0, (p_dbm - 30.0) / 10.0);
  const double n_w = std::pow(10.0, (noise_dbm - 30.0) / 10.0);
  const double snr = p_w * fading * std::pow(dist_m, -alpha) / n_w;
  return bw_hz * std::log2(1.0 + snr);
}

ChannelParams table_channel() { return ChannelParams{20.0, -104.0, 2.0, 3.0, 20e6, 1024}; }

Geometry simple_geometry(std::vector<Point2> clusters, double horizon = 400.0) {
  Geometry g;
  g.cluster_positions = std::move(clusters);
  g.origin = {0.0, 0.0};
  g.altitude_m = 100.0;
  g.service_radius_m = 20.0;
  g.speed_mps = 30.0;
  g.horizon_s = horizon;
  return g;
}

UserRequest make_user(int id, int cluster, double bits, double t, double fading = 1.0,
                      Point2 offset = {0.0, 0.0}) {
  return UserRequest{id, cluster, offset, bits, t, fading};
}

Realization make_manual(Geometry g, ChannelParams c, std::vector<UserRequest> users) {
  Realization r;
  r.geometry = std::move(g);
  r.channel = c;
  r.users = std::move(users);
  return r;
}

ScenarioSpec small_spec(int users, int clusters, double horizon = 400.0) {
  ScenarioSpec spec;
  spec.geometry = simple_geometry({}, horizon);
  spec.geometry.cluster_positions.clear();
  spec.num_clusters = clusters;
  spec.area = {800.0, 800.0};
  spec.channel = table_channel();
  spec.num_users = users;
  spec.request_time = {ValueDist::Kind::uniform, 0.0, horizon, 0.0};
  spec.request_bits = {ValueDist::Kind::uniform, 1e7, 1e9, 0.0};
  return spec;
}

}  // namespace

TEST_CASE("generate_realization: size, support, determinism") {
  const ScenarioSpec spec = small_spec(100, 6);
  const Realization a = generate_realization(spec, 7);
  REQUIRE(a.users.size() == 100);
  for (const auto& u : a.users) {
    REQUIRE(u.request_time_s >= 0.0);
    REQUIRE(u.request_time_s <= spec.geometry.horizon_s);
    REQUIRE(u.bits > 0.0);
    REQUIRE(u.fading_gain > 0.0);
    REQUIRE(u.cluster_id >= 0);
    REQUIRE(u.cluster_id < 6);
    REQUIRE(std::hypot(u.ground_offset.x, u.ground_offset.y) <=
            spec.geometry.service_radius_m + 1e-12);
  }

  const Realization b = generate_realization(spec, 7);
  REQUIRE(a.users.size() == b.users.size());
  for (std::size_t i = 0; i < a.users.size(); ++i) {
    REQUIRE(a.users[i].bits == b.users[i].bits);
    REQUIRE(a.users[i].request_time_s == b.users[i].request_time_s);
    REQUIRE(a.users[i].fading_gain == b.users[i].fading_gain);
    REQUIRE(a.users[i].cluster_id == b.users[i].cluster_id);
    REQUIRE(a.users[i].ground_offset.x == b.users[i].ground_offset.x);
    REQUIRE(a.users[i].ground_offset.y == b.users[i].ground_offset.y);
  }

  const Realization c = generate_realization(spec, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.users.size(); ++i)
    any_diff = any_diff || a.users[i].bits != c.users[i].bits;
  REQUIRE(any_diff);
}

TEST_CASE("generate_realization: minimal instance and rejection") {
  ScenarioSpec spec = small_spec(1, 1);
  const Realization r = generate_realization(spec, 0);
  REQUIRE(r.users.size() == 1);
  REQUIRE(r.users[0].cluster_id == 0);

  spec.num_users = 0;
  REQUIRE_THROWS_AS(generate_realization(spec, 0), std::invalid_argument);
  spec = small_spec(10, 0);
  REQUIRE_THROWS_AS(generate_realization(spec, 0), std::invalid_argument);
  spec = small_spec(10, 2);
  spec.request_bits = {ValueDist::Kind::uniform, -5.0, 10.0, 0.0};
  REQUIRE_THROWS_AS(generate_realization(spec, 0), std::invalid_argument);
  spec = small_spec(10, 2);
  spec.request_time = {ValueDist::Kind::uniform, 0.0, 1e9, 0.0};  // beyond horizon
  REQUIRE_THROWS_AS(generate_realization(spec, 0), std::invalid_argument);
}

TEST_CASE("generate_realization: cluster weights partition the users") {
  ScenarioSpec spec = small_spec(200, 2);
  spec.cluster_weights = {1.0, 0.0};
  const Realization r = generate_realization(spec, 3);
  for (const auto& u : r.users) REQUIRE(u.cluster_id == 0);

  spec.cluster_weights = {3.0, 1.0};
  const Realization s = generate_realization(spec, 3);
  int in0 = 0;
  for (const auto& u : s.users) in0 += u.cluster_id == 0;
  REQUIRE(in0 > 100);  // 3:1 weighting, 200 draws
  REQUIRE(in0 < 200);
}

TEST_CASE("fading gains have unit mean") {
  ScenarioSpec spec = small_spec(100000, 1);
  const Realization r = generate_realization(spec, 11);
  double sum = 0.0;
  for (const auto& u : r.users) sum += u.fading_gain;
  const double mean = sum / static_cast<double>(r.users.size());
  REQUIRE(mean == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("user_rate matches the direct link-budget arithmetic") {
  const ChannelParams c = table_channel();
  const Geometry g = simple_geometry({{0.0, 0.0}});
  const UserRequest u = make_user(0, 0, 1e8, 0.0, 1.0);

  const double expected = oracle_rate_bps(20.0, -104.0, 2.0, 20e6, 100.0, 1.0);
  const double got = user_rate(c, g, u);
  REQUIRE(got == Catch::Approx(expected).epsilon(1e-12));
  // overhead view of the same numbers: snr = 10^8.4, rate about 5.58e8 bps
  REQUIRE(link_snr(c, 100.0, 1.0) == Catch::Approx(std::pow(10.0, 8.4)).epsilon(1e-9));
  REQUIRE(got == Catch::Approx(5.58e8).epsilon(2e-3));
  REQUIRE(got > 0.0);
}

TEST_CASE("user_rate: 4x fading adds two bandwidths of rate at high SNR") {
  const ChannelParams c = table_channel();
  const Geometry g = simple_geometry({{0.0, 0.0}});
  const UserRequest base = make_user(0, 0, 1e8, 0.0, 1.0);
  const UserRequest boosted = make_user(0, 0, 1e8, 0.0, 4.0);
  const double delta = user_rate(c, g, boosted) - user_rate(c, g, base);
  REQUIRE(delta == Catch::Approx(2.0 * c.rb_bandwidth_hz).epsilon(1e-3));
}

TEST_CASE("user_rate decreases with ground offset") {
  const ChannelParams c = table_channel();
  const Geometry g = simple_geometry({{0.0, 0.0}});
  double prev = user_rate(c, g, make_user(0, 0, 1e8, 0.0, 1.0, {0.0, 0.0}));
  for (double off = 2.0; off <= 20.0; off += 2.0) {
    const double rate = user_rate(c, g, make_user(0, 0, 1e8, 0.0, 1.0, {off, 0.0}));
    REQUIRE(rate < prev);
    prev = rate;
  }
}

TEST_CASE("hover_time: empty set, single user, max rule, bad cluster") {
  const ChannelParams c = table_channel();
  const Geometry g = simple_geometry({{300.0, 0.0}});
  const double rate = oracle_rate_bps(20.0, -104.0, 2.0, 20e6, 100.0, 1.0);

  // nobody has requested yet
  const Realization none = make_manual(g, c, {make_user(0, 0, 10.0 * rate, 50.0)});
  REQUIRE(hover_time(none, 0, 10.0) == 0.0);

  // one user with a 10 s transmission: 10 - 2*20/30
  const Realization one = make_manual(g, c, {make_user(0, 0, 10.0 * rate, 0.0)});
  REQUIRE(hover_time(one, 0, 10.0) == Catch::Approx(10.0 - 40.0 / 30.0).epsilon(1e-9));

  // two users, 3 s and 9 s: the slowest one sets the hover
  const Realization two =
      make_manual(g, c, {make_user(0, 0, 3.0 * rate, 0.0), make_user(1, 0, 9.0 * rate, 0.0)});
  REQUIRE(hover_time(two, 0, 10.0) == Catch::Approx(9.0 - 40.0 / 30.0).epsilon(1e-9));

  REQUIRE_THROWS_AS(hover_time(one, 3, 10.0), std::invalid_argument);
  REQUIRE_THROWS_AS(hover_time(one, -1, 10.0), std::invalid_argument);
}

TEST_CASE("hover_time clamps at zero and is nondecreasing in the arrival epoch") {
  const ChannelParams c = table_channel();
  const Geometry g = simple_geometry({{300.0, 0.0}});
  const double rate = oracle_rate_bps(20.0, -104.0, 2.0, 20e6, 100.0, 1.0);

  // transmission shorter than the straight traverse of the service area
  const Realization fast = make_manual(g, c, {make_user(0, 0, 0.5 * rate, 0.0)});
  REQUIRE(hover_time(fast, 0, 10.0) == 0.0);

  ScenarioSpec spec = small_spec(40, 1);
  const Realization r = generate_realization(spec, 19);
  double prev = 0.0;
  for (double arrival = 0.0; arrival <= 400.0; arrival += 13.0) {
    const double h = hover_time(r, 0, arrival);
    REQUIRE(h >= prev - 1e-12);
    prev = h;
  }
}

TEST_CASE("trajectory_time: empty, single-cluster oracle, two code paths") {
  const ChannelParams c = table_channel();
  const Geometry g = simple_geometry({{300.0, 0.0}});
  const double rate = oracle_rate_bps(20.0, -104.0, 2.0, 20e6, 100.0, 1.0);
  const Realization r = make_manual(g, c, {make_user(0, 0, 10.0 * rate, 0.0)});

  const std::vector<int> empty;
  REQUIRE(trajectory_time(r, empty) == 0.0);

  // 10 s out, 10 - 4/3 s hovering, 10 s home
  const std::vector<int> one{0};
  const double expected = 10.0 + (10.0 - 40.0 / 30.0) + 10.0;
  REQUIRE(trajectory_time(r, one) == Catch::Approx(expected).epsilon(1e-9));

  // stepwise recursion vs closed-form sum across random instances
  const ScenarioSpec spec = small_spec(50, 4);
  Rng rng(123);
  for (int trial = 0; trial < 25; ++trial) {
    const Realization real = generate_realization(spec, 100 + trial);
    std::vector<int> traj;
    const int len = static_cast<int>(uniform01(rng) * 6);
    for (int i = 0; i < len; ++i)
      traj.push_back(static_cast<int>(uniform01(rng) * 4) % 4);
    const double stepwise = trajectory_time(real, traj);
    const double direct = trajectory_time_direct(real, traj);
    REQUIRE(stepwise == Catch::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("evaluate_trajectory exposes per-step budgets consistent with t0") {
  const ScenarioSpec spec = small_spec(30, 3);
  const Realization real = generate_realization(spec, 5);
  const std::vector<int> traj{0, 2, 1};
  const TrajectoryEval eval = evaluate_trajectory(real, traj);
  REQUIRE(eval.visits.size() == 3);
  // budgets decrease and the reconstruction from the last budget matches t0
  REQUIRE(eval.visits[0].budget_after_s >= eval.visits[1].budget_after_s);
  REQUIRE(eval.visits[1].budget_after_s >= eval.visits[2].budget_after_s);
  const double t0 = (spec.geometry.horizon_s - eval.visits[2].budget_after_s) +
                    distance(real.geometry.cluster_positions[1], real.geometry.origin) /
                        real.geometry.speed_mps;
  REQUIRE(eval.total_time_s == Catch::Approx(t0).epsilon(1e-12));
}

TEST_CASE("success_rate: trivial cases and the 68-percent construction") {
  const ChannelParams c = table_channel();
  Geometry g = simple_geometry({{300.0, 0.0}, {0.0, 300.0}});
  const double rate = oracle_rate_bps(20.0, -104.0, 2.0, 20e6, 100.0, 1.0);

  std::vector<UserRequest> users;
  for (int i = 0; i < 68; ++i) users.push_back(make_user(i, 0, 0.1 * rate, 0.0));
  for (int i = 68; i < 100; ++i) users.push_back(make_user(i, 1, 0.1 * rate, 399.0));
  const Realization r = make_manual(g, c, users);

  const std::vector<int> visit_first{0};
  REQUIRE(success_rate(r, visit_first) == Catch::Approx(0.68).epsilon(1e-12));

  const std::vector<int> empty;
  REQUIRE(success_rate(r, empty) == 0.0);

  // serving everyone
  std::vector<UserRequest> early;
  for (int i = 0; i < 10; ++i) early.push_back(make_user(i, 0, 0.1 * rate, 0.0));
  const Realization all = make_manual(g, c, early);
  REQUIRE(success_rate(all, visit_first) == 1.0);

  // nobody requests inside the horizon
  const Realization nobody = make_manual(g, c, {});
  REQUIRE(success_rate(nobody, visit_first) == 0.0);
}

TEST_CASE("success_rate: bounded and monotone under appended visits") {
  const ScenarioSpec spec = small_spec(60, 4);
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Realization real = generate_realization(spec, 200 + trial);
    std::vector<int> traj;
    double prev = success_rate(real, traj);
    REQUIRE(prev == 0.0);
    for (int i = 0; i < 6; ++i) {
      traj.push_back(static_cast<int>(uniform01(rng) * 4) % 4);
      const double sr = success_rate(real, traj);
      REQUIRE(sr >= prev);
      REQUIRE(sr >= 0.0);
      REQUIRE(sr <= 1.0);
      prev = sr;
    }
  }
}

TEST_CASE("transmission delays are positive and finite") {
  const ScenarioSpec spec = small_spec(80, 3);
  const Realization real = generate_realization(spec, 21);
  for (double d : user_delays(real)) {
    REQUIRE(d > 0.0);
    REQUIRE(std::isfinite(d));
  }
}

TEST_CASE("RB cap limits a visit to the earliest requesters") {
  ChannelParams c = table_channel();
  c.num_rbs = 2;
  const Geometry g = simple_geometry({{300.0, 0.0}});
  const double rate = oracle_rate_bps(20.0, -104.0, 2.0, 20e6, 100.0, 1.0);
  const Realization r = make_manual(
      g, c,
      {make_user(0, 0, rate, 3.0), make_user(1, 0, rate, 1.0), make_user(2, 0, rate, 2.0)});
  const TrajectoryEval eval = evaluate_trajectory(r, std::vector<int>{0});
  REQUIRE(eval.visits[0].served_users == std::vector<int>{1, 2});
  REQUIRE(eval.success_rate == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
}

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dbsim {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Flight geometry: cluster centers on the ground plane, the charging origin,
// and the kinematic constants of the drone.
struct Geometry {
  std::vector<Point2> cluster_positions;
  Point2 origin;
  double altitude_m = 100.0;
  double service_radius_m = 20.0;
  double speed_mps = 30.0;
  double horizon_s = 400.0;

  int num_clusters() const { return static_cast<int>(cluster_positions.size()); }

  void validate() const {
    if (cluster_positions.empty()) throw std::invalid_argument("geometry: need at least one cluster");
    if (!(altitude_m > service_radius_m))
      throw std::invalid_argument("geometry: altitude_m must exceed service_radius_m");
    if (!(speed_mps > 0.0)) throw std::invalid_argument("geometry: speed_mps must be positive");
    if (!(horizon_s > 0.0)) throw std::invalid_argument("geometry: horizon_s must be positive");
    for (const auto& p : cluster_positions)
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw std::invalid_argument("geometry: cluster position not finite");
  }
};

// Location sentinel: cluster ids are 0..L-1, the origin is -1.
inline constexpr int kOrigin = -1;

inline const Point2& location_point(const Geometry& g, int location) {
  if (location == kOrigin) return g.origin;
  return g.cluster_positions.at(static_cast<std::size_t>(location));
}

inline double travel_time_s(const Geometry& g, int from, int to) {
  return distance(location_point(g, from), location_point(g, to)) / g.speed_mps;
}

}  // namespace dbsim

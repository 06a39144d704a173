#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace dbsim {

// Convergence episode: first episode whose trailing-window mean reaches 95%
// of the final-window mean. Reported as the episode budget when the run never
// gets there (converged flag false). Window shrinks to the series length on
// short runs.
struct ConvergencePoint {
  int episode = 0;
  bool converged = false;
};

inline ConvergencePoint episodes_to_converge(std::span<const double> utility, int window = 50,
                                             double fraction = 0.95) {
  const int n = static_cast<int>(utility.size());
  ConvergencePoint out{n, false};
  if (n == 0) return out;
  const int w = std::min(window, n);
  double final_mean = 0.0;
  for (int i = n - w; i < n; ++i) final_mean += utility[static_cast<std::size_t>(i)];
  final_mean /= w;

  double trailing = 0.0;
  for (int i = 0; i < w; ++i) trailing += utility[static_cast<std::size_t>(i)];
  for (int end = w; end <= n; ++end) {
    if (trailing / w >= fraction * final_mean) {
      out.episode = end;
      out.converged = true;
      return out;
    }
    if (end < n)
      trailing += utility[static_cast<std::size_t>(end)] - utility[static_cast<std::size_t>(end - w)];
  }
  return out;
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double stderr_of(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

// Per-run training record.
struct RunMetrics {
  std::vector<double> utility;       // training rollout e, per episode
  std::vector<double> utility_eval;  // second rollout e' (empty for plain PG)
  std::vector<double> eta;
  std::vector<double> grad_norm;
  double final_utility = 0.0;        // final-window mean of the training series
  int episodes_to_converge = 0;
  bool converged = false;

  void finalize(int window = 50) {
    const auto cp = dbsim::episodes_to_converge(utility, window);
    episodes_to_converge = cp.episode;
    converged = cp.converged;
    const int n = static_cast<int>(utility.size());
    const int w = std::min(window, n);
    final_utility = n == 0 ? 0.0 : mean_of(std::span<const double>(utility).subspan(static_cast<std::size_t>(n - w)));
  }
};

}  // namespace dbsim

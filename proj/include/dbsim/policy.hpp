#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbsim/mdp.hpp"
#include "dbsim/random.hpp"

namespace dbsim {

// One hidden layer, tanh activation, masked softmax head. tanh keeps the
// logits bounded by the parameter magnitude, so probabilities stay sane for
// any finite theta.
struct PolicyArch {
  int inputs = 0;
  int hidden = 32;
  int outputs = 0;

  int param_count() const { return (inputs + 1) * hidden + (hidden + 1) * outputs; }

  bool operator==(const PolicyArch&) const = default;
};

inline PolicyArch default_arch(int num_clusters, int hidden = 32) {
  // input: one-hot location over clusters+origin, plus normalized budget
  return PolicyArch{num_clusters + 2, hidden, num_clusters + 1};
}

// Flat parameter vector. Layout: W1 (hidden x inputs, row major), b1, then
// W2 (outputs x hidden, row major), b2.
struct PolicyParams {
  PolicyArch arch;
  std::vector<double> theta;
};

using GradientVec = std::vector<double>;

inline PolicyParams init_policy(PolicyArch arch, std::uint64_t seed, double weight_scale = 0.05) {
  PolicyParams p;
  p.arch = arch;
  p.theta.assign(static_cast<std::size_t>(arch.param_count()), 0.0);
  Rng rng(mix_seed(seed, 0x70));
  const int w1 = arch.hidden * arch.inputs;
  const int w2 = arch.outputs * arch.hidden;
  // weights uniform in [-scale, scale], biases zero
  for (int i = 0; i < w1; ++i)
    p.theta[static_cast<std::size_t>(i)] = weight_scale * (2.0 * uniform01(rng) - 1.0);
  const int w2_off = w1 + arch.hidden;
  for (int i = 0; i < w2; ++i)
    p.theta[static_cast<std::size_t>(w2_off + i)] = weight_scale * (2.0 * uniform01(rng) - 1.0);
  return p;
}

// Observation context: how states map onto network inputs.
struct PolicyContext {
  int num_clusters = 0;
  double horizon_s = 0.0;
};

// One-hot location (clusters first, origin slot last) followed by tau/T.
inline std::vector<double> encode_state(const State& s, const PolicyContext& ctx) {
  std::vector<double> x(static_cast<std::size_t>(ctx.num_clusters) + 2, 0.0);
  const int slot = s.location == kOrigin ? ctx.num_clusters : s.location;
  x[static_cast<std::size_t>(slot)] = 1.0;
  x.back() = s.remaining_s / ctx.horizon_s;
  return x;
}

namespace detail {

struct PolicyForward {
  std::vector<double> input;
  std::vector<double> hidden;  // post-tanh
  std::vector<double> logits;
  std::vector<double> probs;   // masked softmax, zero on infeasible entries
};

inline PolicyForward policy_forward(const PolicyParams& p, const PolicyContext& ctx,
                                    const State& s, std::span<const std::uint8_t> mask) {
  const PolicyArch& a = p.arch;
  if (static_cast<int>(mask.size()) != a.outputs)
    throw std::invalid_argument("policy: mask size does not match action count");

  PolicyForward f;
  f.input = encode_state(s, ctx);
  if (static_cast<int>(f.input.size()) != a.inputs)
    throw std::invalid_argument("policy: state encoding does not match network input width");

  const double* w1 = p.theta.data();
  const double* b1 = w1 + a.hidden * a.inputs;
  const double* w2 = b1 + a.hidden;
  const double* b2 = w2 + a.outputs * a.hidden;

  f.hidden.resize(static_cast<std::size_t>(a.hidden));
  for (int h = 0; h < a.hidden; ++h) {
    double z = b1[h];
    const double* row = w1 + h * a.inputs;
    for (int i = 0; i < a.inputs; ++i) z += row[i] * f.input[static_cast<std::size_t>(i)];
    f.hidden[static_cast<std::size_t>(h)] = std::tanh(z);
  }

  f.logits.resize(static_cast<std::size_t>(a.outputs));
  for (int o = 0; o < a.outputs; ++o) {
    double z = b2[o];
    const double* row = w2 + o * a.hidden;
    for (int h = 0; h < a.hidden; ++h) z += row[h] * f.hidden[static_cast<std::size_t>(h)];
    f.logits[static_cast<std::size_t>(o)] = z;
  }

  // softmax restricted to feasible entries
  double max_logit = -std::numeric_limits<double>::infinity();
  for (int o = 0; o < a.outputs; ++o)
    if (mask[static_cast<std::size_t>(o)]) max_logit = std::max(max_logit, f.logits[static_cast<std::size_t>(o)]);
  if (max_logit == -std::numeric_limits<double>::infinity())
    throw std::invalid_argument("policy: no feasible action in mask");

  f.probs.assign(static_cast<std::size_t>(a.outputs), 0.0);
  double norm = 0.0;
  for (int o = 0; o < a.outputs; ++o) {
    if (!mask[static_cast<std::size_t>(o)]) continue;
    const double e = std::exp(f.logits[static_cast<std::size_t>(o)] - max_logit);
    f.probs[static_cast<std::size_t>(o)] = e;
    norm += e;
  }
  for (auto& v : f.probs) v /= norm;
  return f;
}

}  // namespace detail

inline std::vector<double> action_probs(const PolicyParams& p, const PolicyContext& ctx,
                                        const State& s, std::span<const std::uint8_t> mask) {
  return detail::policy_forward(p, ctx, s, mask).probs;
}

// Exact gradient of log pi(action | state) w.r.t. theta, straight through the
// masked softmax: dlogp/dz_j = [j == a] - p_j on feasible entries, 0 elsewhere.
inline GradientVec grad_log_prob(const PolicyParams& p, const PolicyContext& ctx, const State& s,
                                 std::span<const std::uint8_t> mask, const Action& action) {
  const PolicyArch& a = p.arch;
  const auto f = detail::policy_forward(p, ctx, s, mask);
  const int act = action_index(action, ctx.num_clusters);
  if (!mask[static_cast<std::size_t>(act)])
    throw std::invalid_argument("grad_log_prob: action is masked out");

  GradientVec grad(p.theta.size(), 0.0);
  const double* w2 = p.theta.data() + a.hidden * a.inputs + a.hidden;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + a.hidden * a.inputs;
  double* g_w2 = g_b1 + a.hidden;
  double* g_b2 = g_w2 + a.outputs * a.hidden;

  std::vector<double> dlogit(static_cast<std::size_t>(a.outputs), 0.0);
  for (int o = 0; o < a.outputs; ++o)
    if (mask[static_cast<std::size_t>(o)])
      dlogit[static_cast<std::size_t>(o)] =
          (o == act ? 1.0 : 0.0) - f.probs[static_cast<std::size_t>(o)];

  std::vector<double> dhidden(static_cast<std::size_t>(a.hidden), 0.0);
  for (int o = 0; o < a.outputs; ++o) {
    const double d = dlogit[static_cast<std::size_t>(o)];
    if (d == 0.0) continue;
    g_b2[o] = d;
    const double* row = w2 + o * a.hidden;
    for (int h = 0; h < a.hidden; ++h) {
      g_w2[o * a.hidden + h] = d * f.hidden[static_cast<std::size_t>(h)];
      dhidden[static_cast<std::size_t>(h)] += d * row[h];
    }
  }

  for (int h = 0; h < a.hidden; ++h) {
    const double t = f.hidden[static_cast<std::size_t>(h)];
    const double dpre = dhidden[static_cast<std::size_t>(h)] * (1.0 - t * t);
    g_b1[h] = dpre;
    for (int i = 0; i < a.inputs; ++i)
      g_w1[h * a.inputs + i] = dpre * f.input[static_cast<std::size_t>(i)];
  }
  return grad;
}

// theta + step * direction, as a fresh value.
inline PolicyParams axpy_update(const PolicyParams& p, const GradientVec& direction, double step) {
  if (direction.size() != p.theta.size())
    throw std::invalid_argument("axpy_update: direction shape does not match params");
  if (!std::isfinite(step)) throw std::invalid_argument("axpy_update: step not finite");
  PolicyParams out;
  out.arch = p.arch;
  out.theta.resize(p.theta.size());
  for (std::size_t i = 0; i < p.theta.size(); ++i)
    out.theta[i] = p.theta[i] + step * direction[i];
  return out;
}

// Policy objects usable by rollout().

struct SoftmaxPolicy {
  const PolicyParams* params;
  PolicyContext ctx;

  std::vector<double> action_probs(const State& s, std::span<const std::uint8_t> mask) const {
    return dbsim::action_probs(*params, ctx, s, mask);
  }
};

// Deterministic argmax over feasible actions; ties go to the lowest index.
struct GreedyPolicy {
  const PolicyParams* params;
  PolicyContext ctx;

  std::vector<double> action_probs(const State& s, std::span<const std::uint8_t> mask) const {
    std::vector<double> probs = dbsim::action_probs(*params, ctx, s, mask);
    int best = -1;
    double best_p = -1.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!mask[i]) continue;
      if (probs[i] > best_p) {
        best_p = probs[i];
        best = static_cast<int>(i);
      }
    }
    std::vector<double> out(probs.size(), 0.0);
    out[static_cast<std::size_t>(best)] = 1.0;
    return out;
  }
};

// ---- parameter persistence: versioned text format, exact round trip ----
// Values are written as hexfloats so load(save(p)) reproduces theta bit for bit.

inline void write_policy(std::ostream& out, const PolicyParams& p) {
  out << "dbsim-policy v1\n";
  out << p.arch.inputs << ' ' << p.arch.hidden << ' ' << p.arch.outputs << '\n';
  out << std::hexfloat;
  for (double v : p.theta) out << v << '\n';
  out << std::defaultfloat;
}

inline PolicyParams read_policy(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line != "dbsim-policy v1")
    throw std::runtime_error("read_policy: unsupported format header '" + line + "'");
  PolicyParams p;
  in >> p.arch.inputs >> p.arch.hidden >> p.arch.outputs;
  if (!in || p.arch.inputs <= 0 || p.arch.hidden <= 0 || p.arch.outputs <= 0)
    throw std::runtime_error("read_policy: bad architecture line");
  p.theta.resize(static_cast<std::size_t>(p.arch.param_count()));
  for (auto& v : p.theta) {
    std::string tok;
    in >> tok;
    if (!in) throw std::runtime_error("read_policy: truncated parameter vector");
    v = std::strtod(tok.c_str(), nullptr);  // istream >> double rejects hexfloat
  }
  return p;
}

inline void save_policy(const std::string& path, const PolicyParams& p) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  write_policy(out, p);
  if (!out) throw std::runtime_error("save_policy: write failed for " + path);
}

inline PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  return read_policy(in);
}

}  // namespace dbsim

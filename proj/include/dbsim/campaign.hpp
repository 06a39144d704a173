#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dbsim/config.hpp"
#include "dbsim/enumerate.hpp"
#include "dbsim/learner.hpp"
#include "dbsim/metrics.hpp"
#include "dbsim/policy.hpp"
#include "dbsim/presets.hpp"
#include "dbsim/records.hpp"
#include "dbsim/scenario.hpp"

namespace dbsim {

enum class Algorithm { vanilla_pg, mgpg };

struct ArmSpec {
  std::string name;
  Algorithm algorithm = Algorithm::mgpg;
  LearnerConfig config;
};

enum class TrainAssignment {
  per_run,   // run j trains on train_realizations[j mod n]
  per_episode  // every run cycles the whole training set, one per episode
};

struct ExperimentSpec {
  ScenarioSpec scenario;
  std::vector<ArmSpec> arms;
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> train_realizations;
  std::vector<std::uint64_t> eval_realizations;
  TrainAssignment train_assignment = TrainAssignment::per_run;
  std::string output_dir = "campaign-out";
  int workers = 1;
  bool stochastic_eval = false;
  int convergence_window = 50;
  bool repro_check = true;

  void validate() const {
    if (arms.empty()) throw std::invalid_argument("experiment: arms must not be empty");
    if (seeds.empty()) throw std::invalid_argument("experiment: need at least one seed");
    if (train_realizations.empty())
      throw std::invalid_argument("experiment: need at least one training realization id");
    if (eval_realizations.empty())
      throw std::invalid_argument("experiment: need at least one held-out realization id");
    for (auto e : eval_realizations)
      for (auto t : train_realizations)
        if (e == t)
          throw std::invalid_argument(
              "experiment: held-out realization ids must be disjoint from training ids");
    for (const auto& a : arms) a.config.validate();
    scenario.validate();
  }
};

struct RunResult {
  std::string arm;
  std::size_t arm_index = 0;
  std::uint64_t seed = 0;
  std::size_t seed_index = 0;
  RunMetrics metrics;
  PolicyParams final_params;
  double final_eta = 0.0;
  double eval_success_rate = 0.0;
  std::vector<double> eval_each;
  bool failed = false;
  std::string error;
};

struct CampaignReport {
  ExperimentSpec spec;
  std::vector<RunResult> runs;

  std::vector<const RunResult*> arm_runs(std::size_t arm_index) const {
    std::vector<const RunResult*> out;
    for (const auto& r : runs)
      if (r.arm_index == arm_index && !r.failed) out.push_back(&r);
    return out;
  }
};

namespace detail {

inline TrainResult run_training(const ExperimentSpec& spec, const ArmSpec& arm,
                                std::size_t seed_index, std::uint64_t seed) {
  std::vector<Realization> reals;
  if (spec.train_assignment == TrainAssignment::per_run) {
    const std::uint64_t rid =
        spec.train_realizations[seed_index % spec.train_realizations.size()];
    reals.push_back(generate_realization(spec.scenario, rid));
  } else {
    for (auto rid : spec.train_realizations)
      reals.push_back(generate_realization(spec.scenario, rid));
  }
  const RealizationStream stream = RealizationStream::cycle(std::move(reals));
  return arm.algorithm == Algorithm::mgpg ? mgpg_train(stream, arm.config, seed)
                                          : vanilla_pg_train(stream, arm.config, seed);
}

inline RunResult run_one(const ExperimentSpec& spec, std::size_t arm_index,
                         std::size_t seed_index) {
  const ArmSpec& arm = spec.arms[arm_index];
  const std::uint64_t seed = spec.seeds[seed_index];
  RunResult rr;
  rr.arm = arm.name;
  rr.arm_index = arm_index;
  rr.seed = seed;
  rr.seed_index = seed_index;
  try {
    TrainResult tr = run_training(spec, arm, seed_index, seed);
    tr.metrics.finalize(spec.convergence_window);
    rr.metrics = std::move(tr.metrics);
    rr.final_params = std::move(tr.params);
    rr.final_eta = tr.eta;

    const PolicyContext ctx{spec.scenario.resolved_geometry().num_clusters(),
                            spec.scenario.geometry.horizon_s};
    const Environment::Options env_opt{arm.config.max_steps};
    for (auto rid : spec.eval_realizations) {
      const Realization held_out = generate_realization(spec.scenario, rid);
      double utility = 0.0;
      if (spec.stochastic_eval) {
        Rng rng(mix_seed(seed, 0xE7A ^ rid));
        utility = rollout(held_out, SoftmaxPolicy{&rr.final_params, ctx}, rng, env_opt).total_utility;
      } else {
        Rng rng(0);  // greedy policy consumes no randomness
        utility = rollout(held_out, GreedyPolicy{&rr.final_params, ctx}, rng, env_opt).total_utility;
      }
      rr.eval_each.push_back(utility);
    }
    rr.eval_success_rate = mean_of(rr.eval_each);
  } catch (const std::exception& e) {
    rr.failed = true;
    rr.error = e.what();
  }
  return rr;
}

inline bool same_metrics(const RunMetrics& a, const RunMetrics& b) {
  return a.utility == b.utility && a.eta == b.eta && a.grad_norm == b.grad_norm &&
         a.utility_eval == b.utility_eval;
}

}  // namespace detail

// Trains every (arm, seed) pair, evaluates each run on the held-out
// realizations, and re-runs the first pair to prove the campaign is
// reproducible. Failed runs are reported and skipped by the aggregates.
inline CampaignReport run_campaign(const ExperimentSpec& spec) {
  spec.validate();
  CampaignReport report;
  report.spec = spec;

  struct Task {
    std::size_t arm_index;
    std::size_t seed_index;
  };
  std::vector<Task> tasks;
  for (std::size_t a = 0; a < spec.arms.size(); ++a)
    for (std::size_t s = 0; s < spec.seeds.size(); ++s) tasks.push_back({a, s});
  report.runs.resize(tasks.size());

  const int workers = std::max(1, spec.workers);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      report.runs[i] = detail::run_one(spec, tasks[i].arm_index, tasks[i].seed_index);
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (spec.repro_check && !report.runs.empty() && !report.runs.front().failed) {
    const RunResult redo = detail::run_one(spec, tasks.front().arm_index, tasks.front().seed_index);
    if (redo.failed || !detail::same_metrics(redo.metrics, report.runs.front().metrics))
      throw std::runtime_error(
          "campaign aborted: seed " + std::to_string(redo.seed) +
          " did not reproduce bitwise on re-run; environment is not deterministic");
  }
  return report;
}

// ---- plot-ready exports ----

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

inline std::filesystem::path resolve_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  if (const char* root = std::getenv("DBSIM_OUTPUT_ROOT"); root && *root && p.is_relative())
    p = std::filesystem::path(root) / p;
  return p;
}

// Writes convergence.csv, cdf.csv, eta_trace.csv, trajectory_snapshot.txt,
// runs.jsonl and (with two or more arms) pairs.csv. Deterministic: identical
// reports produce byte-identical files.
inline void emit_plot_data(const CampaignReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir = resolve_output_dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);

  const auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error(std::string("emit_plot_data: cannot write ") + name +
                                     " under " + dir.string());
    return f;
  };

  {
    std::ofstream f = open("convergence.csv");
    f << "episode,arm,mean,stderr\n";
    for (std::size_t a = 0; a < report.spec.arms.size(); ++a) {
      const auto runs = report.arm_runs(a);
      if (runs.empty()) continue;
      std::size_t episodes = 0;
      for (const auto* r : runs) episodes = std::max(episodes, r->metrics.utility.size());
      std::vector<double> sample;
      for (std::size_t e = 0; e < episodes; ++e) {
        sample.clear();
        for (const auto* r : runs)
          if (e < r->metrics.utility.size()) sample.push_back(r->metrics.utility[e]);
        f << e << ',' << detail::csv_quote(report.spec.arms[a].name) << ','
          << detail::fmt_double(mean_of(sample)) << ',' << detail::fmt_double(stderr_of(sample))
          << '\n';
      }
    }
  }

  {
    // distribution of the converged training success rate across runs, the
    // quantity behind the paper-style CDF comparison
    std::ofstream f = open("cdf.csv");
    f << "threshold,arm,fraction\n";
    for (std::size_t a = 0; a < report.spec.arms.size(); ++a) {
      const auto runs = report.arm_runs(a);
      if (runs.empty()) continue;
      for (int t = 0; t <= 100; ++t) {
        const double threshold = static_cast<double>(t) / 100.0;
        int covered = 0;
        for (const auto* r : runs)
          if (r->metrics.final_utility <= threshold) ++covered;
        f << detail::fmt_double(threshold) << ',' << detail::csv_quote(report.spec.arms[a].name)
          << ',' << detail::fmt_double(static_cast<double>(covered) / static_cast<double>(runs.size()))
          << '\n';
      }
    }
  }

  {
    std::ofstream f = open("eta_trace.csv");
    f << "episode,arm,seed,eta\n";
    for (std::size_t a = 0; a < report.spec.arms.size(); ++a)
      for (const auto* r : report.arm_runs(a))
        for (std::size_t e = 0; e < r->metrics.eta.size(); ++e)
          f << e << ',' << detail::csv_quote(r->arm) << ',' << r->seed << ','
            << detail::fmt_double(r->metrics.eta[e]) << '\n';
  }

  {
    std::ofstream f = open("trajectory_snapshot.txt");
    if (report.spec.eval_realizations.empty() || report.runs.empty()) {
      f << "# no held-out realization\n";
    } else {
      const std::uint64_t rid = report.spec.eval_realizations.front();
      const Realization held_out = generate_realization(report.spec.scenario, rid);
      const PolicyContext ctx{held_out.num_clusters(), held_out.geometry.horizon_s};
      for (std::size_t a = 0; a < report.spec.arms.size(); ++a) {
        const auto runs = report.arm_runs(a);
        if (runs.empty()) continue;
        const RunResult* best = runs.front();
        for (const auto* r : runs)
          if (r->eval_success_rate > best->eval_success_rate) best = r;
        Rng rng(0);
        const Experience exp =
            rollout(held_out, GreedyPolicy{&best->final_params, ctx}, rng,
                    Environment::Options{report.spec.arms[a].config.max_steps});
        const std::vector<int> traj = exp.trajectory();
        f << "arm " << report.spec.arms[a].name << " (seed " << best->seed << ")\n";
        write_trajectory_listing(f, held_out, evaluate_trajectory(held_out, traj));
      }
    }
  }

  {
    std::ofstream f = open("runs.jsonl");
    for (const auto& r : report.runs) {
      nlohmann::json j{
          {"arm", r.arm},
          {"seed", r.seed},
          {"failed", r.failed},
      };
      if (r.failed) {
        j["error"] = r.error;
      } else {
        j["final_utility"] = r.metrics.final_utility;
        j["eval_success_rate"] = r.eval_success_rate;
        j["episodes_to_converge"] = r.metrics.episodes_to_converge;
        j["converged"] = r.metrics.converged;
        j["final_eta"] = r.final_eta;
      }
      f << j.dump() << '\n';
    }
  }

  if (report.spec.arms.size() >= 2) {
    std::ofstream f = open("pairs.csv");
    f << "seed,arm_a,arm_b,final_a,final_b,delta_final,eval_a,eval_b,delta_eval,converge_a,converge_b\n";
    for (std::size_t a = 0; a < report.spec.arms.size(); ++a) {
      for (std::size_t b = a + 1; b < report.spec.arms.size(); ++b) {
        for (std::size_t s = 0; s < report.spec.seeds.size(); ++s) {
          const RunResult* ra = nullptr;
          const RunResult* rb = nullptr;
          for (const auto& r : report.runs) {
            if (r.failed || r.seed_index != s) continue;
            if (r.arm_index == a) ra = &r;
            if (r.arm_index == b) rb = &r;
          }
          if (!ra || !rb) continue;
          f << report.spec.seeds[s] << ',' << detail::csv_quote(ra->arm) << ','
            << detail::csv_quote(rb->arm) << ',' << detail::fmt_double(ra->metrics.final_utility)
            << ',' << detail::fmt_double(rb->metrics.final_utility) << ','
            << detail::fmt_double(ra->metrics.final_utility - rb->metrics.final_utility) << ','
            << detail::fmt_double(ra->eval_success_rate) << ','
            << detail::fmt_double(rb->eval_success_rate) << ','
            << detail::fmt_double(ra->eval_success_rate - rb->eval_success_rate) << ','
            << ra->metrics.episodes_to_converge << ',' << rb->metrics.episodes_to_converge << '\n';
        }
      }
    }
  }
}

// ---- experiment config ----

inline ExperimentSpec experiment_from_json(const nlohmann::json& j,
                                           const std::string& base_dir = "") {
  cfg::Node root{&j, ""};
  ExperimentSpec spec;

  if (auto v = root.maybe("scenario_file")) {
    std::filesystem::path p(v->as_string());
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    spec.scenario = load_scenario_file(p.string());
  } else if (auto v = root.maybe("scenario")) {
    spec.scenario = scenario_from_json(*v->j, v->path);
  } else {
    spec.scenario = default_scenario_spec();
  }

  const cfg::Node arms = root.at("arms");
  for (std::size_t i = 0; i < arms.array_size(); ++i) {
    const cfg::Node an = arms.item(i);
    ArmSpec arm;
    arm.name = an.at("name").as_string();
    const std::string algo = an.at("algorithm").as_string();
    if (algo == "mgpg") {
      arm.algorithm = Algorithm::mgpg;
      arm.config = learner_from_json(an, default_mgpg_config());
    } else if (algo == "pg" || algo == "vanilla_pg") {
      arm.algorithm = Algorithm::vanilla_pg;
      arm.config = learner_from_json(an, default_pg_config());
    } else {
      an.at("algorithm").fail("unknown algorithm '" + algo + "' (mgpg|pg)");
    }
    spec.arms.push_back(std::move(arm));
  }

  if (auto v = root.maybe("seeds")) {
    if (v->j->is_array()) {
      for (std::size_t i = 0; i < v->array_size(); ++i)
        spec.seeds.push_back(v->item(i).as_u64());
    } else {
      const int count = v->at("count").as_int();
      const std::uint64_t base = v->has("base") ? v->at("base").as_u64() : 1;
      for (int i = 0; i < count; ++i) spec.seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
  } else {
    spec.seeds = {1};
  }

  if (auto p = root.maybe("protocol")) {
    if (auto v = p->maybe("train_realizations"))
      for (std::size_t i = 0; i < v->array_size(); ++i)
        spec.train_realizations.push_back(v->item(i).as_u64());
    if (auto v = p->maybe("eval_realizations"))
      for (std::size_t i = 0; i < v->array_size(); ++i)
        spec.eval_realizations.push_back(v->item(i).as_u64());
    if (auto v = p->maybe("train_assignment")) {
      const std::string mode = v->as_string();
      if (mode == "per_run") spec.train_assignment = TrainAssignment::per_run;
      else if (mode == "per_episode") spec.train_assignment = TrainAssignment::per_episode;
      else v->fail("unknown train_assignment '" + mode + "' (per_run|per_episode)");
    }
  }
  if (spec.train_realizations.empty())
    for (std::size_t i = 0; i < spec.seeds.size(); ++i)
      spec.train_realizations.push_back(1000 + i);
  if (spec.eval_realizations.empty()) spec.eval_realizations = {1, 2, 3, 4, 5};

  if (auto v = root.maybe("output_dir")) spec.output_dir = v->as_string();
  if (auto v = root.maybe("workers")) spec.workers = v->as_int();
  if (auto v = root.maybe("stochastic_eval")) spec.stochastic_eval = v->as_bool();
  if (auto v = root.maybe("convergence_window")) spec.convergence_window = v->as_int();
  if (auto v = root.maybe("repro_check")) spec.repro_check = v->as_bool();

  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    root.fail(e.what());
  }
  return spec;
}

inline ExperimentSpec load_experiment_file(const std::string& path) {
  const nlohmann::json j = load_json_file(path);
  return experiment_from_json(j, std::filesystem::path(path).parent_path().string());
}

// Stock comparison: MGPG vs fixed-discount PG on the default scenario, paired
// seeds, held-out greedy evaluation.
inline ExperimentSpec default_experiment_spec() {
  ExperimentSpec spec;
  spec.scenario = default_scenario_spec();
  ArmSpec mgpg;
  mgpg.name = "mgpg";
  mgpg.algorithm = Algorithm::mgpg;
  mgpg.config = default_mgpg_config();
  ArmSpec pg;
  pg.name = "pg";
  pg.algorithm = Algorithm::vanilla_pg;
  pg.config = default_pg_config();
  spec.arms = {mgpg, pg};
  for (std::uint64_t s = 1; s <= 32; ++s) spec.seeds.push_back(s);
  for (std::uint64_t r = 0; r < 32; ++r) spec.train_realizations.push_back(1000 + r);
  spec.eval_realizations = {1, 2, 3, 4, 5, 6, 7, 8};
  spec.train_assignment = TrainAssignment::per_run;
  spec.output_dir = "campaign-out";
  spec.workers = 1;
  return spec;
}

}  // namespace dbsim

// dbsim command line: scenario generation, single training runs, multi-seed
// campaigns, and the numeric self-checks.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dbsim/campaign.hpp"
#include "dbsim/config.hpp"
#include "dbsim/enumerate.hpp"
#include "dbsim/gradcheck.hpp"
#include "dbsim/learner.hpp"
#include "dbsim/presets.hpp"
#include "dbsim/records.hpp"

namespace {

dbsim::ScenarioSpec load_scenario_or_default(const std::string& path) {
  if (path.empty()) return dbsim::default_scenario_spec();
  return dbsim::load_scenario_file(path);
}

int cmd_gen_scenario(const std::string& config, std::uint64_t seed, const std::string& out_path,
                     bool summary) {
  const dbsim::ScenarioSpec spec = load_scenario_or_default(config);
  const dbsim::Realization real = dbsim::generate_realization(spec, seed);
  if (out_path.empty() || out_path == "-") {
    dbsim::write_realization_records(std::cout, real);
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "error: cannot open " << out_path << " for writing\n";
      return 1;
    }
    dbsim::write_realization_records(out, real);
  }
  if (summary) {
    std::cerr << "realization seed=" << seed << " users=" << real.users.size()
              << " clusters=" << real.num_clusters()
              << " requesting=" << real.requesting_count() << '\n';
  }
  return 0;
}

struct TrainCli {
  std::string scenario_file;
  std::string algo = "mgpg";
  std::uint64_t seed = 1;
  std::uint64_t train_realization = 1000;
  std::string metrics_path;
  std::string policy_path;
  std::string checkpoint_path;
  int checkpoint_every = 0;
  dbsim::LearnerConfig cfg = dbsim::default_mgpg_config();
};

int cmd_train(const TrainCli& t) {
  const dbsim::ScenarioSpec spec = load_scenario_or_default(t.scenario_file);
  const auto stream =
      dbsim::RealizationStream::fixed(dbsim::generate_realization(spec, t.train_realization));

  std::ofstream metrics_out;
  if (!t.metrics_path.empty()) {
    metrics_out.open(t.metrics_path);
    if (!metrics_out) {
      std::cerr << "error: cannot open " << t.metrics_path << " for writing\n";
      return 1;
    }
  }
  dbsim::TrainObserver observer;
  observer.on_episode = [&](const dbsim::EpisodeRecord& rec) {
    if (metrics_out.is_open()) dbsim::write_episode_record(metrics_out, rec);
  };
  if (!t.checkpoint_path.empty() && t.checkpoint_every > 0) {
    observer.checkpoint_every = t.checkpoint_every;
    observer.on_checkpoint = [&](const dbsim::PolicyParams& params, double eta, int episode) {
      dbsim::save_checkpoint(t.checkpoint_path, params, eta, episode);
    };
  }

  dbsim::TrainResult result;
  if (t.algo == "mgpg") {
    result = dbsim::mgpg_train(stream, t.cfg, t.seed, observer);
  } else if (t.algo == "pg") {
    dbsim::LearnerConfig cfg = t.cfg;
    cfg.meta_step = 0.0;
    result = dbsim::vanilla_pg_train(stream, cfg, t.seed, observer);
  } else {
    std::cerr << "error: unknown --algo '" << t.algo << "' (mgpg|pg)\n";
    return 1;
  }

  if (!t.policy_path.empty()) dbsim::save_policy(t.policy_path, result.params);

  std::cout << "episodes=" << t.cfg.episodes << " final_utility=" << result.metrics.final_utility
            << " eta=" << result.eta
            << " episodes_to_converge=" << result.metrics.episodes_to_converge
            << (result.metrics.converged ? "" : " (not converged)") << '\n';
  return 0;
}

int cmd_campaign(const std::string& spec_path, int workers_override,
                 const std::string& out_override) {
  dbsim::ExperimentSpec spec = dbsim::load_experiment_file(spec_path);
  if (workers_override > 0) spec.workers = workers_override;
  if (!out_override.empty()) spec.output_dir = out_override;
  const dbsim::CampaignReport report = dbsim::run_campaign(spec);
  dbsim::emit_plot_data(report, spec.output_dir);

  int failed = 0;
  for (const auto& r : report.runs)
    if (r.failed) {
      ++failed;
      std::cerr << "run failed: arm=" << r.arm << " seed=" << r.seed << ": " << r.error << '\n';
    }
  std::cout << "campaign done: " << report.runs.size() - failed << "/" << report.runs.size()
            << " runs ok, output in " << dbsim::resolve_output_dir(spec.output_dir).string()
            << '\n';
  return failed == 0 ? 0 : 1;
}

int cmd_gradcheck(std::uint64_t seed, int policy_configs, int meta_configs) {
  const dbsim::GradCheckReport report =
      dbsim::run_gradcheck(seed, policy_configs, meta_configs);
  const bool policy_ok = report.policy_max_rel_err < 1e-5;
  const bool meta_ok = report.meta_max_rel_err < 1e-4;
  std::cout << "policy gradient vs finite difference: max rel err = " << report.policy_max_rel_err
            << " over " << report.policy_configs << " configs ["
            << (policy_ok ? "OK" : "FAIL") << "]\n";
  std::cout << "meta gradient vs finite difference:   max rel err = " << report.meta_max_rel_err
            << " over " << report.meta_configs << " configs [" << (meta_ok ? "OK" : "FAIL")
            << "]\n";
  return policy_ok && meta_ok ? 0 : 1;
}

int cmd_oracle_check(int clusters, int num_seeds, int episodes) {
  dbsim::ScenarioSpec spec = dbsim::two_cluster_toy_spec();
  if (clusters != 2) {
    spec.geometry.cluster_positions.clear();
    spec.num_clusters = clusters;
    spec.area = {600.0, 600.0};
    spec.geometry.origin = {300.0, 300.0};
    spec.geometry.horizon_s = 30.0 * clusters;
  }
  const dbsim::Realization real = dbsim::generate_realization(spec, 7);
  const dbsim::EnumerateResult best = dbsim::enumerate_optimal(real);
  std::cout << "optimal utility " << best.utility << " via trajectory [";
  for (std::size_t i = 0; i < best.trajectory.size(); ++i)
    std::cout << (i ? " " : "") << best.trajectory[i];
  std::cout << "] (" << best.nodes << " nodes)\n";

  dbsim::LearnerConfig cfg = dbsim::toy_learner_config();
  cfg.episodes = episodes;
  const auto stream = dbsim::RealizationStream::fixed(real);
  const dbsim::PolicyContext ctx{real.num_clusters(), real.geometry.horizon_s};

  int hits = 0;
  for (int s = 0; s < num_seeds; ++s) {
    const dbsim::TrainResult tr = dbsim::mgpg_train(stream, cfg, static_cast<std::uint64_t>(s + 1));
    dbsim::Rng rng(0);
    const double learned =
        dbsim::rollout(real, dbsim::GreedyPolicy{&tr.params, ctx}, rng).total_utility;
    const bool hit = learned >= 0.95 * best.utility;
    hits += hit;
    std::cout << "seed " << s + 1 << ": learned " << learned << (hit ? "  [ok]" : "  [miss]")
              << '\n';
  }
  const double frac = num_seeds > 0 ? static_cast<double>(hits) / num_seeds : 0.0;
  std::cout << hits << "/" << num_seeds << " seeds within 5% of optimal\n";
  return frac >= 0.8 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drone base station trajectory training testbed"};
  app.require_subcommand(1);

  // gen-scenario
  std::string gs_config, gs_out;
  std::uint64_t gs_seed = 7;
  bool gs_summary = false;
  auto* gen = app.add_subcommand("gen-scenario", "sample a realization and write its records");
  gen->add_option("--config", gs_config, "scenario config file (JSON); omit for the default");
  gen->add_option("--seed", gs_seed, "realization seed");
  gen->add_option("--out", gs_out, "output path (default stdout)");
  gen->add_flag("--summary", gs_summary, "print a one-line summary to stderr");

  // train
  TrainCli t;
  auto* train = app.add_subcommand("train", "train one (algorithm, seed) run");
  train->add_option("--scenario", t.scenario_file, "scenario config file (JSON)");
  train->add_option("--algo", t.algo, "mgpg|pg")->check(CLI::IsMember({"mgpg", "pg"}));
  train->add_option("--seed", t.seed, "run seed");
  train->add_option("--train-realization", t.train_realization, "realization id to train on");
  train->add_option("--episodes", t.cfg.episodes, "episode budget");
  train->add_option("--alpha", t.cfg.policy_step, "policy step size");
  train->add_option("--beta", t.cfg.meta_step, "meta step size");
  train->add_option("--eta0", t.cfg.eta_init, "initial discount");
  train->add_flag("--meta-ascent,!--meta-descent", t.cfg.meta_ascent,
                  "ascend the measurement objective (default) or follow the descending form");
  train->add_flag("--eval-rollout", t.cfg.eval_rollout,
                  "draw the measurement rollout even without a meta step");
  train->add_option("--metrics", t.metrics_path, "episode metrics JSONL output");
  train->add_option("--save-policy", t.policy_path, "write the final policy here");
  train->add_option("--checkpoint", t.checkpoint_path, "checkpoint file");
  train->add_option("--checkpoint-every", t.checkpoint_every,
                    "checkpoint interval in episodes (0 = off)");

  // campaign
  std::string c_spec, c_out;
  int c_workers = 0;
  auto* camp = app.add_subcommand("campaign", "run a multi-seed experiment spec");
  camp->add_option("--spec", c_spec, "experiment spec file (JSON)")->required();
  camp->add_option("--workers", c_workers, "override worker count");
  camp->add_option("--out", c_out, "override output directory");

  // gradcheck
  std::uint64_t g_seed = 3;
  int g_policy = 100, g_meta = 50;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of both gradients");
  grad->add_option("--seed", g_seed, "base seed");
  grad->add_option("--policy-configs", g_policy, "random configurations for the policy gradient");
  grad->add_option("--meta-configs", g_meta, "random configurations for the meta gradient");

  // oracle-check
  int o_clusters = 2, o_seeds = 20, o_episodes = 2000;
  auto* oracle = app.add_subcommand("oracle-check", "compare trained policies to the exact optimum");
  oracle->add_option("--clusters", o_clusters, "cluster count of the toy instance");
  oracle->add_option("--seeds", o_seeds, "number of training seeds");
  oracle->add_option("--episodes", o_episodes, "episodes per seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_scenario(gs_config, gs_seed, gs_out, gs_summary);
    if (train->parsed()) return cmd_train(t);
    if (camp->parsed()) return cmd_campaign(c_spec, c_workers, c_out);
    if (grad->parsed()) return cmd_gradcheck(g_seed, g_policy, g_meta);
    if (oracle->parsed()) return cmd_oracle_check(o_clusters, o_seeds, o_episodes);
  } catch (const dbsim::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

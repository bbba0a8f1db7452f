// gvf: train, replay, evaluate and benchmark from the command line.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime abort.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gvf/errors.hpp"
#include "gvf/harness.hpp"

namespace {

using gvf::harness::ExperimentConfig;

constexpr int kConfigError = 1;
constexpr int kRuntimeAbort = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> games;
  std::optional<std::size_t> team_size;
  std::optional<std::string> algo;
  std::optional<std::string> home;
  std::optional<std::size_t> trials;
  bool shared_weights = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--games", o.games, "Number of games");
  cmd->add_option("--team-size", o.team_size, "Players per team, goalie included");
  cmd->add_option("--algo", o.algo, "greedy_gq or offpac");
  cmd->add_flag("--shared-weights", o.shared_weights, "One learner shared by all field players");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : gvf::harness::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.games) {
    c.games = *o.games;
    c.bin_size = std::min(c.bin_size, c.games == 0 ? c.bin_size : c.games);
  }
  if (o.team_size) c.team_size = *o.team_size;
  if (o.algo) c.algorithm = gvf::harness::parse_algorithm(*o.algo);
  if (o.home) c.home = gvf::harness::parse_home_policy(*o.home);
  if (o.trials) c.trials = *o.trials;
  if (o.shared_weights) c.shared_weights = true;
  c.validate();
  return c;
}

void print_summary(const gvf::harness::RunMetrics& m, const std::filesystem::path& out) {
  std::cout << fmt::format("games={} updates={} mean_bin_goal_diff={:.4f}\n", m.goal_diffs.size(), m.updates,
                           m.mean_bin_goal_diff());
  for (const auto& [id, norm] : m.weight_norms) std::cout << fmt::format("learner {} weight_norm={:.6g}\n", id, norm);
  std::cout << "metrics: " << (out / "metrics.csv").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy GVF learners, diagnostics and soccer role assignment"};
  app.require_subcommand(1);

  Overrides train_opts;
  CLI::App* train = app.add_subcommand("train", "Train learners and write checkpoints, logs and metrics");
  add_common(train, train_opts);
  train->add_option("--home", train_opts.home, "Home policy: learned, random or hand_coded");
  train->add_option("--trials", train_opts.trials, "Independent trials, each seeded from the master seed");

  Overrides replay_opts;
  std::string log_path;
  CLI::App* replay = app.add_subcommand("replay", "Learn offline from an experience log");
  add_common(replay, replay_opts);
  replay->add_option("--log", log_path, "Experience log")->required()->check(CLI::ExistingFile);

  Overrides eval_opts;
  std::string checkpoints;
  CLI::App* eval = app.add_subcommand("evaluate", "Play games with frozen weights and no exploration");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoints", checkpoints, "Directory holding learner checkpoints");
  eval->add_option("--home", eval_opts.home, "Home policy: learned, random or hand_coded");

  std::vector<std::string> suites = {"all"};
  std::uint64_t bench_seed = 1;
  std::string bench_out = "bench";
  CLI::App* bench = app.add_subcommand("bench", "Run the diagnostic benchmark suites");
  bench->add_option("--suite", suites, "baird, gridworld, gradient, bandit or all")
      ->check(CLI::IsMember({"baird", "gridworld", "gradient", "bandit", "all"}));
  bench->add_option("--seed", bench_seed, "Seed");
  bench->add_option("--out", bench_out, "Output directory");

  app.add_subcommand("config", "Print the configuration schema with defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  if (app.got_subcommand("config")) {
    std::cout << gvf::harness::default_config_text();
    return EXIT_SUCCESS;
  }
  if (*bench) {
    try {
      for (const auto& p : gvf::harness::run_benchmarks(suites, bench_out, bench_seed)) std::cout << p.string() << '\n';
      return EXIT_SUCCESS;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kRuntimeAbort;
    }
  }

  const Overrides& opts = *train ? train_opts : *replay ? replay_opts : eval_opts;
  ExperimentConfig config;
  try {
    config = resolve(opts);
    if (*eval && config.home == gvf::harness::HomePolicy::kLearned && checkpoints.empty())
      throw gvf::ContractViolation("evaluate: --checkpoints is required for a learned home policy");
  } catch (const gvf::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const gvf::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const gvf::IoError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*train) {
      if (config.trials == 1) {
        print_summary(gvf::harness::run_training(config), config.out);
      } else {
        for (std::size_t k = 0; k < config.trials; ++k) {
          ExperimentConfig trial = config;
          trial.seed = gvf::harness::trial_seed(config.seed, k);
          trial.out = config.out / ("trial_" + std::to_string(k));
          std::cout << "trial " << k << " seed " << trial.seed << '\n';
          print_summary(gvf::harness::run_training(trial), trial.out);
        }
      }
    } else if (*replay) {
      const gvf::harness::SoccerFeatures features(config);
      const gvf::harness::LearnerPool pool = gvf::harness::replay_offline(log_path, config, features);
      for (std::uint32_t id : pool.ids())
        std::cout << fmt::format("learner {} weight_norm={:.6g}\n", id, pool.main_norm(id));
      std::cout << "checkpoints: " << config.out.string() << '\n';
    } else {
      print_summary(gvf::harness::evaluate(checkpoints, config), config.out);
    }
  } catch (const gvf::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeAbort;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kRuntimeAbort;
  }
  return EXIT_SUCCESS;
}

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vdmarl/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"value-decomposition actor-critic laboratory"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run one training job");
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  train->add_option("--config", config_path, "key = value config file (defaults when omitted)");
  CLI::Option* seed_opt = train->add_option("--seed", seed, "seed override");
  train->add_option("--out", out_dir, "output directory for manifest, CSVs, checkpoint")
      ->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint greedily");
  std::string checkpoint;
  int episodes = 32;
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint.bin inside a run directory")
      ->required();
  eval_cmd->add_option("--episodes", episodes, "number of evaluation episodes");

  auto* agg = app.add_subcommand("aggregate", "merge eval curves across runs");
  std::vector<std::string> run_paths;
  std::string agg_out;
  agg->add_option("--runs", run_paths, "run directories or eval CSV files")
      ->required()
      ->expected(-1);
  agg->add_option("--out", agg_out, "output CSV path")->required();

  auto* st = app.add_subcommand("selftest", "run the built-in property checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      vdmarl::TrainConfig cfg =
          config_path.empty() ? vdmarl::TrainConfig{} : vdmarl::parse_config(config_path);
      if (seed_opt->count() > 0) cfg.seed = seed;
      vdmarl::RunResult res = vdmarl::run_training(cfg, out_dir);
      std::printf("run complete: %ld updates, %ld environment steps, final win rate %.6f\n",
                  res.updates, res.t_env, res.records.back().win_rate);
    } else if (eval_cmd->parsed()) {
      vdmarl::TrainConfig cfg;
      vdmarl::AlgoNets nets = vdmarl::load_run(checkpoint, &cfg);
      vdmarl::EvalRecord rec = vdmarl::evaluate(nets.actor, cfg.env, episodes,
                                                vdmarl::derive_stream_seed(cfg.seed, 901));
      std::printf("t_env,win_rate,mean_return,episode_len_mean\n");
      std::printf("%ld,%.6f,%.6f,%.6f\n", rec.t_env, rec.win_rate, rec.mean_return,
                  rec.episode_len_mean);
    } else if (agg->parsed()) {
      std::vector<std::string> files;
      for (const auto& p : run_paths)
        files.push_back(std::filesystem::is_directory(p)
                            ? (std::filesystem::path(p) / "eval.csv").string()
                            : p);
      auto rows = vdmarl::aggregate_runs(files);
      vdmarl::emit_aggregate_csv(rows, agg_out);
      std::printf("aggregated %zu runs into %s (%zu rows)\n", files.size(), agg_out.c_str(),
                  rows.size());
    } else if (st->parsed()) {
      return vdmarl::selftest();
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

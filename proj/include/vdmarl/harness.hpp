#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdmarl/trainer.hpp"

namespace vdmarl {

inline constexpr const char* kVersion = "1.0.0";

// Flat `key = value` config with `#` comments. Unknown keys and out-of-range
// values are errors; anything omitted keeps the TrainConfig default.
TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config(const std::string& path);

struct EvalRecord {
  long t_env = 0;
  double win_rate = 0.0;
  double mean_return = 0.0;
  double episode_len_mean = 0.0;
};

// Greedy policy, fresh environment, private RNG stream; never touches
// training state. Deterministic given (parameters, env config, seed).
EvalRecord evaluate(const ActorNet& actor, const EnvConfig& env_cfg, int episodes, uint64_t seed);

// header `t_env,win_rate,mean_return,episode_len_mean`, six fractional
// digits, \n line ends.
void emit_csv(const std::vector<EvalRecord>& records, const std::string& path);
std::vector<EvalRecord> read_eval_csv(const std::string& path);

// Sorted nearest-rank percentile: rank = ceil(p*n/100), 1-based. p=50 gives
// the lower middle on even counts.
double percentile_nearest_rank(std::vector<double> v, double p);

struct AggregateRow {
  long t_env = 0;
  double win_rate = 0.0;          // median across runs
  double mean_return = 0.0;       // median
  double episode_len_mean = 0.0;  // median
  double win_rate_p25 = 0.0;
  double win_rate_p75 = 0.0;
};

// Requires at least two runs on identical t_env grids.
std::vector<AggregateRow> aggregate_runs(const std::vector<std::string>& eval_files);
void emit_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path);

struct RunManifest {
  std::string version;
  std::string started_at;
  uint64_t seed = 0;
  std::string stats_file;
  std::string eval_file;
  std::string checkpoint_file;
  TrainConfig config;
};

void write_manifest(const RunManifest& m, const std::string& path);
RunManifest read_manifest(const std::string& path);

struct RunResult {
  std::vector<EvalRecord> records;
  long updates = 0;
  long t_env = 0;
};

// One full training run: rollouts and updates until t_max environment steps,
// greedy evaluation on the fixed grid {0, eval_interval, 2*eval_interval, ...}
// so different seeds aggregate. With a non-empty out_dir, writes manifest.json,
// stats.csv, eval.csv, and checkpoint.bin there.
RunResult run_training(const TrainConfig& cfg, const std::string& out_dir);

// Rebuilds the networks described by a run's manifest.json and loads the
// checkpoint into them.
AlgoNets load_run(const std::string& checkpoint_path, TrainConfig* cfg_out);

// Quick in-process property checks; returns 0 when everything holds and
// prints one line per check.
int selftest();

}  // namespace vdmarl

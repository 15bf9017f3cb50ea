#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vdmarl/actor.hpp"
#include "vdmarl/critic.hpp"
#include "vdmarl/env.hpp"
#include "vdmarl/rng.hpp"

namespace vdmarl {

enum class Algo { Iac, VdacSum, VdacMix, VdacMixLinear, NaiveCritic, Coma };

Algo parse_algo(const std::string& name);
const char* algo_name(Algo a);

struct TrainConfig {
  Algo algorithm = Algo::VdacMix;
  double gamma = 0.99;
  double lambda = 0.8;
  double lr = 5e-4;
  double alpha_pi = -1.0;  // negative means "use lr"
  double alpha_v = -1.0;
  double entropy_coef = 0.0;
  double grad_clip = 10.0;
  int n_envs = 8;
  int target_sync = 200;
  long t_max = 20000;
  long eval_interval = 2000;
  int eval_episodes = 32;
  int hidden_dim = 64;
  uint64_t seed = 1;
  EnvConfig env;

  double pi_coef() const { return alpha_pi < 0 ? lr : alpha_pi; }
  double v_coef() const { return alpha_v < 0 ? lr : alpha_v; }
};

// Padded time-major batch over [T x n_envs x n_agents]. Rows 0..T exist for
// observations/state/avail/actions so row L_e (an episode's terminal state)
// is available for bootstrapping; rewards/filled/terminated cover the T
// transition steps. Padding rows keep all-ones avail masks and action 0 so
// recomputing the forward pass stays well-defined; filled zeroes them out of
// every loss.
struct EpisodeBatch {
  int T = 0;
  int n_envs = 0, n_agents = 0, n_actions = 0, obs_dim = 0, state_dim = 0;
  std::vector<double> obs;          // (T+1) * E * A * obs_dim
  std::vector<double> state;        // (T+1) * E * state_dim
  std::vector<uint8_t> avail;       // (T+1) * E * A * n_actions
  std::vector<int> actions;         // (T+1) * E * A; row L_e holds the bootstrap action
  std::vector<double> rewards;      // T * E
  std::vector<uint8_t> terminated;  // T * E; 1 only at true terminals, not truncation
  std::vector<double> filled;       // T * E
  std::vector<double> log_probs;    // T * E * A behavior log-probs
  std::vector<double> local_values; // (T+1) * E * A rollout-time local values
  std::vector<int> lengths;         // per-env episode length

  int rows() const { return n_envs * n_agents; }
  long total_steps() const;

  size_t obs_at(int t, int e, int a) const {
    return ((static_cast<size_t>(t) * n_envs + e) * n_agents + a) * obs_dim;
  }
  size_t state_at(int t, int e) const {
    return (static_cast<size_t>(t) * n_envs + e) * state_dim;
  }
  size_t avail_at(int t, int e, int a) const {
    return ((static_cast<size_t>(t) * n_envs + e) * n_agents + a) * n_actions;
  }
  size_t agent_at(int t, int e, int a) const {
    return (static_cast<size_t>(t) * n_envs + e) * n_agents + a;
  }
  size_t env_at(int t, int e) const { return static_cast<size_t>(t) * n_envs + e; }
};

struct RolloutContext {
  std::vector<std::unique_ptr<Env>> envs;
  std::vector<Rng> rngs;  // private stream per env

  static RolloutContext create(const EnvConfig& cfg, int n_envs, uint64_t seed);
};

// One full episode per env under the current actor snapshot, lockstep across
// envs, hidden states starting at zero.
EpisodeBatch rollout(const ActorNet& actor, RolloutContext& ctx);

// Backward-recursion n-step returns over `rows` independent streams:
// y_t = r_t + gamma * (filled_{t+1} ? y_{t+1} : values_{t+1}). values has T+1
// rows; the caller zeroes bootstrap entries at true terminals and leaves the
// critic value at truncation.
std::vector<double> nstep_targets(const std::vector<double>& rewards,
                                  const std::vector<double>& values, double gamma,
                                  const std::vector<double>& filled, int T, int rows);

// TD(lambda) targets: G_t = r_t + gamma*((1-lambda)*values_{t+1} + lambda*G_{t+1}),
// collapsing to the bootstrap value beyond each episode's end.
std::vector<double> lambda_targets(const std::vector<double>& rewards,
                                   const std::vector<double>& values, double gamma, double lambda,
                                   const std::vector<double>& filled, int T, int rows);

// A = y - v, computed as plain numbers so the policy loss treats it as a
// constant.
std::vector<double> td_advantage(const std::vector<double>& y, const std::vector<double>& v);

struct AlgoNets {
  Algo algo = Algo::VdacMix;
  ActorNet actor;
  std::optional<MixingNetwork> mixer;
  std::optional<CentralCritic> central;
  std::optional<CentralCritic> central_target;
  std::optional<ComaCritic> coma;
  std::optional<ComaCritic> coma_target;
  TargetCopy target;          // wraps the target net's parameters when one exists
  ParameterSet critic_params; // mixer or central/coma parameters (the alpha_v group)
  RmsProp actor_opt;
  RmsProp critic_opt;

  static AlgoNets create(const TrainConfig& cfg, int obs_dim, int state_dim, int n_agents,
                         int n_actions, int hidden_dim);
  bool has_target() const { return algo == Algo::NaiveCritic || algo == Algo::Coma; }
  const ParameterSet& live_critic_params() const;
};

// Everything the losses treat as constants: targets, advantages, and the
// no-grad value estimates they came from.
struct TargetData {
  bool per_agent = false;          // y indexed [T*E*A] instead of [T*E]
  std::vector<double> y;
  std::vector<double> advantage;   // always [T*E*A]
  double mean_advantage = 0.0;
};

TargetData compute_targets(const TrainConfig& cfg, const AlgoNets& nets,
                           const EpisodeBatch& batch);

struct LossBundle {
  Tensor total;
  Tensor policy;   // includes the entropy bonus when enabled
  Tensor value;    // critic/mixer loss; undefined for pure policy paths
  double entropy = 0.0;
};

// Rebuilds the differentiable losses from the batch under the current
// parameters, holding TargetData fixed. Calling it twice without parameter
// changes gives bit-identical losses.
LossBundle build_losses(const TrainConfig& cfg, const AlgoNets& nets, const EpisodeBatch& batch,
                        const TargetData& targets);

struct TrainStats {
  double total_loss = 0.0;
  double policy_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double mean_advantage = 0.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
  bool target_synced = false;
};

TrainStats train_step(const TrainConfig& cfg, AlgoNets& nets, const EpisodeBatch& batch);

// No-grad forward over every row of the batch (including the bootstrap row),
// reproducing the rollout's numbers bit-exactly.
struct UnrollResult {
  std::vector<double> values;  // (T+1) * E * A
  std::vector<double> probs;   // (T+1) * E * A * n_actions
};
UnrollResult unroll_policy_values(const ActorNet& actor, const EpisodeBatch& batch);

}  // namespace vdmarl

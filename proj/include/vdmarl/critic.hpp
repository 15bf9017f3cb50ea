#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vdmarl/nn.hpp"
#include "vdmarl/params.hpp"
#include "vdmarl/tensor.hpp"

namespace vdmarl {

// Monotonic mixer: V_tot = W2^T elu(W1^T v + b1) + b2 where W1 and W2 come
// from abs-activated hypernetworks of the state, so dV_tot/dV^a >= 0 for every
// state. Biases come from unconstrained hypernetworks. The linear ablation
// drops the elu. Hypernetwork w1 output index a*embed+j holds W1[a][j].
struct MixingNetwork {
  DenseLayer hyper_w1;        // state -> n_agents*embed, abs
  DenseLayer hyper_b1;        // state -> embed
  DenseLayer hyper_w2;        // state -> embed, abs
  DenseLayer hyper_b2_hidden; // state -> 64, relu
  DenseLayer hyper_b2_out;    // 64 -> 1
  bool linear = false;
  int n_agents = 0;
  int state_dim = 0;
  int embed_dim = 32;
  ParameterSet params;

  static MixingNetwork create(int state_dim, int n_agents, bool linear, uint64_t seed,
                              int embed_dim = 32);
};

// Batched mixer forward: local_values [B x n_agents], state [B x state_dim]
// -> [B x 1].
Tensor mix_forward(const MixingNetwork& net, const Tensor& local_values, const Tensor& state);

// Additive decomposition V_tot = sum_a V^a. Accepts [n] or [B x n]; returns
// [1] or [B x 1].
Tensor vdac_sum_mix(const Tensor& local_values);

// Single-point mixer value matching the batched forward at B=1.
Tensor vdac_mix(const MixingNetwork& net, const Tensor& local_values, const Tensor& state);

// Pins the hypernetworks so the mixer computes exactly sum_a V^a for every
// state: W1 = 1, W2 = 1/embed, all biases 0. Linear mixers only.
void force_sum_constants(MixingNetwork& net);

// V(s_t, u_{t-1}): three dense layers 128-128-1 over state plus the previous
// joint action one-hot.
struct CentralCritic {
  DenseLayer l1, l2, l3;
  int input_dim = 0;
  ParameterSet params;

  static CentralCritic create(int input_dim, uint64_t seed, int hidden_dim = 128);
};

Tensor critic_forward(const CentralCritic& net, const Tensor& x);  // [B x in] -> [B x 1]

// Spec-shaped convenience: assembles state + one-hot(u_{t-1}) for one sample.
// prev_joint may be empty (episode start), encoding an all-zero action block.
Tensor naive_critic_value(const CentralCritic& net, std::span<const double> state,
                          const std::vector<int>& prev_joint, int n_agents, int n_actions);

// Q^a(s, (u^{-a}, .)): three dense layers 128-128-|U| over
// state + obs_a + one-hot(a) + joint action one-hot with agent a's own block
// zeroed. One forward yields the Q-row for all candidate actions of agent a.
struct ComaCritic {
  DenseLayer l1, l2, l3;
  int input_dim = 0;
  int n_actions = 0;
  ParameterSet params;

  static ComaCritic create(int input_dim, int n_actions, uint64_t seed, int hidden_dim = 128);
};

Tensor coma_forward(const ComaCritic& net, const Tensor& x);  // [B x in] -> [B x |U|]

// Input assembly shared by coma_q and the trainer's batched passes; the
// joint_action entry for agent_id itself is masked out of the one-hot block.
std::vector<double> coma_input_row(std::span<const double> state, std::span<const double> obs_a,
                                   int agent_id, const std::vector<int>& joint_action,
                                   int n_agents, int n_actions);

Tensor coma_q(const ComaCritic& net, std::span<const double> state, std::span<const double> obs_a,
              int agent_id, const std::vector<int>& joint_action, int n_agents);

// Eq. 4 counterfactual advantage: q[taken] - dot(probs, q).
double coma_advantage(std::span<const double> q_row, std::span<const double> probs, int taken);

// Hard-copy snapshot that refreshes every `period` training steps.
struct TargetCopy {
  ParameterSet params;
  int steps_since_sync = 0;
};

void sync_target(TargetCopy& target, const ParameterSet& live);
// Counts one training step; copies live into target when the counter reaches
// period and reports whether it fired.
bool tick_target(TargetCopy& target, const ParameterSet& live, int period);

}  // namespace vdmarl

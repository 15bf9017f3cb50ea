#pragma once

#include <cstdint>
#include <vector>

#include "vdmarl/nn.hpp"
#include "vdmarl/params.hpp"
#include "vdmarl/rng.hpp"
#include "vdmarl/tensor.hpp"

namespace vdmarl {

// Recurrent actor shared by all agents: agent identity and the previous
// action enter through one-hot input features. The value head gives the local
// state value used by IAC and the VDAC variants.
struct ActorNet {
  DenseLayer encoder;       // obs + |U| + n_agents -> hidden, relu
  GruCell gru;              // hidden -> hidden
  DenseLayer policy_head;   // hidden -> |U|
  DenseLayer value_head;    // hidden -> 1
  int obs_dim = 0;
  int n_actions = 0;
  int n_agents = 0;
  int hidden_dim = 0;
  ParameterSet params;

  static ActorNet create(int obs_dim, int n_actions, int n_agents, int hidden_dim, uint64_t seed);
};

struct PolicyOutput {
  Tensor logits;        // [rows x |U|]
  Tensor probs;         // masked softmax of logits
  Tensor local_values;  // [rows x 1]
  Tensor hidden;        // [rows x hidden]
  Tensor mask;          // the 0/1 availability mask the softmax used
};

// One forward step for a batch of agent rows. Row i carries observation
// obs[i], previous action prev_actions[i] (-1 at episode start), agent id
// agent_ids[i], and mask avail[i]. hidden holds the matching recurrent state.
PolicyOutput actor_forward(const ActorNet& net, const std::vector<std::vector<double>>& obs,
                           const std::vector<int>& prev_actions,
                           const std::vector<int>& agent_ids, const Tensor& hidden,
                           const std::vector<std::vector<uint8_t>>& avail);

// Same but over flat row-major buffers, for batched training passes.
PolicyOutput actor_forward_flat(const ActorNet& net, const double* obs, const int* prev_actions,
                                const int* agent_ids, const Tensor& hidden, const uint8_t* avail,
                                int rows);

Tensor initial_hidden(const ActorNet& net, int rows);

// Inverse-CDF categorical sample over one probability row.
struct SampledAction {
  int action = 0;
  double log_prob = 0.0;
};
SampledAction sample_action(std::span<const double> probs, Rng& rng);

// Argmax with ties to the lowest action id.
int greedy_action(std::span<const double> probs);

}  // namespace vdmarl

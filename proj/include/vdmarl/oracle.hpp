#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vdmarl/actor.hpp"
#include "vdmarl/env.hpp"
#include "vdmarl/tensor.hpp"

namespace vdmarl {

// Tiny fully-specified cooperative MDP for exhaustive enumeration. Joint
// actions index as u^0 * n_actions + u^1 * ... (agent 0 most significant).
// Built small enough that every reachable (history, joint action) pair fits
// in one tree.
struct EnumerableMdp {
  int n_states = 0;
  int n_agents = 0;
  int n_actions = 0;
  int horizon = 0;
  int initial_state = 0;
  double gamma = 1.0;
  // transition[s][ja][s'] and reward[s][ja]
  std::vector<std::vector<std::vector<double>>> transition;
  std::vector<std::vector<double>> reward;
  std::vector<std::vector<double>> state_vec;               // per state
  std::vector<std::vector<std::vector<double>>> obs_vec;    // per state, per agent

  int n_joint() const;
  std::vector<int> decode_joint(int ja) const;
};

// The climb payoff matrix as a one-step MDP.
EnumerableMdp make_climb_mdp(const MatrixGameSpec& spec);

// Frozen two-state, two-agent, two-action MDP with horizon 3 and stochastic
// transitions; exercises multi-step recurrence and bootstrapping.
EnumerableMdp make_two_state_mdp();

// One node per action-history prefix. probs/local_values/hidden come from
// numeric actor forwards along the path; value and q hold exact
// backward-induction returns under the current policy.
struct OracleNode {
  int state = 0;
  int t = 0;
  double prefix_prob = 1.0;            // probability of reaching this node
  std::vector<int> prev_joint;         // empty at the root
  std::vector<std::vector<double>> probs;         // [agent][action]
  std::vector<double> local_values;               // [agent]
  std::vector<std::vector<double>> hidden;        // [agent][hidden_dim]
  double value = 0.0;                  // V^pi at this node
  std::vector<double> q;               // [joint action] exact Q^pi
  // children[ja][s'] is null when transition probability is zero
  std::vector<std::vector<std::unique_ptr<OracleNode>>> children;
};

// Expands every reachable history up to the horizon, running the actor
// numerically at each node, then fills value/q by backward induction.
std::unique_ptr<OracleNode> build_tree(const EnumerableMdp& mdp, const ActorNet& actor);

// Exact score-function gradient with per-(node, joint action) coefficients:
//   grad = sum_nodes gamma^t * p(node) * sum_ja pi(ja|node) * c(node, ja)
//          * grad log pi(ja|node).
// Rebuilds the actor forwards in graph mode over the whole tree and runs one
// backward; gradients land in the actor's parameters.
using JointCoefficient = std::function<double(const OracleNode&, int ja)>;
void score_gradient(const EnumerableMdp& mdp, const ActorNet& actor, const JointCoefficient& c);

// c(node, ja) = Q^pi(node, ja): the vanilla multi-agent policy gradient.
// Guards enumeration cost: errors when states, joint actions, or horizon are
// too large to enumerate.
void vanilla_mapg_oracle(const EnumerableMdp& mdp, const ActorNet& actor);

// c(node, ja) = -V(node) for a V that ignores the current joint action. The
// exact gradient of such a term is zero at every node, so this measures how
// far the implementation drifts from the cancellation.
using NodeValue = std::function<double(const OracleNode&)>;
void baseline_gradient(const EnumerableMdp& mdp, const ActorNet& actor, const NodeValue& v);

// c(node, ja) = r + gamma * E[V^pi(child)] - V^pi(node), the TD advantage
// evaluated with the exact value function.
void td_advantage_gradient(const EnumerableMdp& mdp, const ActorNet& actor);

}  // namespace vdmarl

#include "vdmarl/critic.hpp"

#include <cmath>
#include <stdexcept>

#include "vdmarl/rng.hpp"

namespace vdmarl {

MixingNetwork MixingNetwork::create(int state_dim, int n_agents, bool linear, uint64_t seed,
                                    int embed_dim) {
  MixingNetwork net;
  net.linear = linear;
  net.n_agents = n_agents;
  net.state_dim = state_dim;
  net.embed_dim = embed_dim;
  Rng rng(splitmix64(seed));
  net.hyper_w1 = DenseLayer::create(net.params, "mixer.hyper_w1", state_dim,
                                    n_agents * embed_dim, Activation::Abs, rng);
  net.hyper_b1 =
      DenseLayer::create(net.params, "mixer.hyper_b1", state_dim, embed_dim, Activation::None, rng);
  net.hyper_w2 =
      DenseLayer::create(net.params, "mixer.hyper_w2", state_dim, embed_dim, Activation::Abs, rng);
  net.hyper_b2_hidden = DenseLayer::create(net.params, "mixer.hyper_b2_hidden", state_dim, 64,
                                           Activation::Relu, rng);
  net.hyper_b2_out =
      DenseLayer::create(net.params, "mixer.hyper_b2_out", 64, 1, Activation::None, rng);
  return net;
}

Tensor mix_forward(const MixingNetwork& net, const Tensor& local_values, const Tensor& state) {
  if (local_values.shape().size() != 2 || local_values.shape()[1] != net.n_agents)
    throw std::invalid_argument("mixer: local values " + shape_str(local_values.shape()) +
                                " do not match " + std::to_string(net.n_agents) + " agents");
  if (state.shape().size() != 2 || state.shape()[1] != net.state_dim)
    throw std::invalid_argument("mixer: state " + shape_str(state.shape()) +
                                " does not match hypernetwork input " +
                                std::to_string(net.state_dim));
  if (state.shape()[0] != local_values.shape()[0])
    throw std::invalid_argument("mixer: batch mismatch between values " +
                                shape_str(local_values.shape()) + " and state " +
                                shape_str(state.shape()));
  Tensor w1 = net.hyper_w1.forward(state);  // [B x n*embed], nonnegative
  Tensor b1 = net.hyper_b1.forward(state);
  Tensor hidden = add(rowwise_vm(local_values, w1, net.embed_dim), b1);
  if (!net.linear) hidden = elu(hidden);
  Tensor w2 = net.hyper_w2.forward(state);  // [B x embed], nonnegative
  Tensor mixed = row_sum(mul(hidden, w2));
  Tensor b2 = net.hyper_b2_out.forward(net.hyper_b2_hidden.forward(state));
  return add(mixed, b2);
}

Tensor vdac_sum_mix(const Tensor& local_values) {
  if (local_values.shape().size() == 1)
    return row_sum(reshape(local_values, {1, local_values.size()}));
  return row_sum(local_values);
}

Tensor vdac_mix(const MixingNetwork& net, const Tensor& local_values, const Tensor& state) {
  Tensor v = local_values.shape().size() == 1
                 ? reshape(local_values, {1, local_values.size()})
                 : local_values;
  Tensor s = state.shape().size() == 1 ? reshape(state, {1, state.size()}) : state;
  return mix_forward(net, v, s);
}

void force_sum_constants(MixingNetwork& net) {
  if (!net.linear)
    throw std::invalid_argument("mixer: summation constants require the linear ablation");
  auto zero = [](Tensor& t) {
    for (double& v : t.values_mut()) v = 0.0;
  };
  auto fill = [](Tensor& t, double x) {
    for (double& v : t.values_mut()) v = x;
  };
  zero(net.hyper_w1.weight);
  fill(net.hyper_w1.bias, 1.0);
  zero(net.hyper_w2.weight);
  fill(net.hyper_w2.bias, 1.0 / net.embed_dim);
  zero(net.hyper_b1.weight);
  zero(net.hyper_b1.bias);
  zero(net.hyper_b2_hidden.weight);
  zero(net.hyper_b2_hidden.bias);
  zero(net.hyper_b2_out.weight);
  zero(net.hyper_b2_out.bias);
}

CentralCritic CentralCritic::create(int input_dim, uint64_t seed, int hidden_dim) {
  CentralCritic net;
  net.input_dim = input_dim;
  Rng rng(splitmix64(seed));
  net.l1 = DenseLayer::create(net.params, "critic.l1", input_dim, hidden_dim, Activation::Relu, rng);
  net.l2 =
      DenseLayer::create(net.params, "critic.l2", hidden_dim, hidden_dim, Activation::Relu, rng);
  net.l3 = DenseLayer::create(net.params, "critic.l3", hidden_dim, 1, Activation::None, rng);
  return net;
}

Tensor critic_forward(const CentralCritic& net, const Tensor& x) {
  return net.l3.forward(net.l2.forward(net.l1.forward(x)));
}

Tensor naive_critic_value(const CentralCritic& net, std::span<const double> state,
                          const std::vector<int>& prev_joint, int n_agents, int n_actions) {
  std::vector<double> row(state.begin(), state.end());
  row.resize(state.size() + static_cast<size_t>(n_agents) * n_actions, 0.0);
  if (!prev_joint.empty()) {
    if (static_cast<int>(prev_joint.size()) != n_agents)
      throw std::invalid_argument("critic: previous joint action has wrong arity");
    for (int a = 0; a < n_agents; ++a)
      row[state.size() + static_cast<size_t>(a) * n_actions + prev_joint[a]] = 1.0;
  }
  const int width = static_cast<int>(row.size());
  return critic_forward(net, Tensor::of({1, width}, std::move(row)));
}

ComaCritic ComaCritic::create(int input_dim, int n_actions, uint64_t seed, int hidden_dim) {
  ComaCritic net;
  net.input_dim = input_dim;
  net.n_actions = n_actions;
  Rng rng(splitmix64(seed));
  net.l1 = DenseLayer::create(net.params, "coma.l1", input_dim, hidden_dim, Activation::Relu, rng);
  net.l2 = DenseLayer::create(net.params, "coma.l2", hidden_dim, hidden_dim, Activation::Relu, rng);
  net.l3 = DenseLayer::create(net.params, "coma.l3", hidden_dim, n_actions, Activation::None, rng);
  return net;
}

Tensor coma_forward(const ComaCritic& net, const Tensor& x) {
  return net.l3.forward(net.l2.forward(net.l1.forward(x)));
}

std::vector<double> coma_input_row(std::span<const double> state, std::span<const double> obs_a,
                                   int agent_id, const std::vector<int>& joint_action,
                                   int n_agents, int n_actions) {
  std::vector<double> row;
  row.reserve(state.size() + obs_a.size() + n_agents + static_cast<size_t>(n_agents) * n_actions);
  row.insert(row.end(), state.begin(), state.end());
  row.insert(row.end(), obs_a.begin(), obs_a.end());
  for (int a = 0; a < n_agents; ++a) row.push_back(a == agent_id ? 1.0 : 0.0);
  std::vector<double> joint(static_cast<size_t>(n_agents) * n_actions, 0.0);
  if (static_cast<int>(joint_action.size()) != n_agents)
    throw std::invalid_argument("coma: joint action has wrong arity");
  for (int a = 0; a < n_agents; ++a)
    if (a != agent_id) joint[static_cast<size_t>(a) * n_actions + joint_action[a]] = 1.0;
  row.insert(row.end(), joint.begin(), joint.end());
  return row;
}

Tensor coma_q(const ComaCritic& net, std::span<const double> state, std::span<const double> obs_a,
              int agent_id, const std::vector<int>& joint_action, int n_agents) {
  std::vector<double> row =
      coma_input_row(state, obs_a, agent_id, joint_action, n_agents, net.n_actions);
  if (static_cast<int>(row.size()) != net.input_dim)
    throw std::invalid_argument("coma: assembled input has " + std::to_string(row.size()) +
                                " features, critic expects " + std::to_string(net.input_dim));
  return coma_forward(net, Tensor::of({1, net.input_dim}, std::move(row)));
}

double coma_advantage(std::span<const double> q_row, std::span<const double> probs, int taken) {
  if (q_row.size() != probs.size())
    throw std::invalid_argument("coma: Q-row and probability row lengths disagree");
  if (taken < 0 || taken >= static_cast<int>(q_row.size()))
    throw std::invalid_argument("coma: taken action out of range");
  double baseline = 0.0;
  for (size_t u = 0; u < q_row.size(); ++u) baseline += probs[u] * q_row[u];
  return q_row[taken] - baseline;
}

void sync_target(TargetCopy& target, const ParameterSet& live) {
  target.params.copy_values_from(live);
  target.steps_since_sync = 0;
}

bool tick_target(TargetCopy& target, const ParameterSet& live, int period) {
  ++target.steps_since_sync;
  if (target.steps_since_sync < period) return false;
  sync_target(target, live);
  return true;
}

}  // namespace vdmarl

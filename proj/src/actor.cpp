#include "vdmarl/actor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vdmarl {

ActorNet ActorNet::create(int obs_dim, int n_actions, int n_agents, int hidden_dim,
                          uint64_t seed) {
  ActorNet net;
  net.obs_dim = obs_dim;
  net.n_actions = n_actions;
  net.n_agents = n_agents;
  net.hidden_dim = hidden_dim;
  Rng rng(splitmix64(seed));
  int in_dim = obs_dim + n_actions + n_agents;
  net.encoder = DenseLayer::create(net.params, "actor.encoder", in_dim, hidden_dim,
                                   Activation::Relu, rng);
  net.gru = GruCell::create(net.params, "actor.gru", hidden_dim, hidden_dim, rng);
  net.policy_head =
      DenseLayer::create(net.params, "actor.policy", hidden_dim, n_actions, Activation::None, rng);
  net.value_head =
      DenseLayer::create(net.params, "actor.value", hidden_dim, 1, Activation::None, rng);
  return net;
}

Tensor initial_hidden(const ActorNet& net, int rows) {
  return Tensor::zeros({rows, net.hidden_dim});
}

namespace {

PolicyOutput forward_rows(const ActorNet& net, const std::vector<double>& input,
                          const Tensor& hidden, const std::vector<double>& mask, int rows) {
  int in_dim = net.obs_dim + net.n_actions + net.n_agents;
  Tensor x = Tensor::of({rows, in_dim}, input);
  Tensor enc = net.encoder.forward(x);
  Tensor h = net.gru.step(enc, hidden);
  Tensor m = Tensor::of({rows, net.n_actions}, mask);
  PolicyOutput out;
  out.logits = affine(h, net.policy_head.weight, net.policy_head.bias);
  out.probs = softmax(out.logits, m);
  out.local_values = affine(h, net.value_head.weight, net.value_head.bias);
  out.hidden = h;
  out.mask = m;
  return out;
}

}  // namespace

PolicyOutput actor_forward_flat(const ActorNet& net, const double* obs, const int* prev_actions,
                                const int* agent_ids, const Tensor& hidden, const uint8_t* avail,
                                int rows) {
  if (hidden.shape() != Shape{rows, net.hidden_dim})
    throw std::invalid_argument("actor: hidden " + shape_str(hidden.shape()) +
                                " does not match batch of " + std::to_string(rows));
  int in_dim = net.obs_dim + net.n_actions + net.n_agents;
  std::vector<double> input(static_cast<size_t>(rows) * in_dim, 0.0);
  std::vector<double> mask(static_cast<size_t>(rows) * net.n_actions);
  for (int r = 0; r < rows; ++r) {
    double* row = input.data() + static_cast<size_t>(r) * in_dim;
    for (int i = 0; i < net.obs_dim; ++i) row[i] = obs[static_cast<size_t>(r) * net.obs_dim + i];
    int prev = prev_actions[r];
    if (prev >= net.n_actions)
      throw std::invalid_argument("actor: previous action " + std::to_string(prev) +
                                  " out of range");
    if (prev >= 0) row[net.obs_dim + prev] = 1.0;
    int id = agent_ids[r];
    if (id < 0 || id >= net.n_agents)
      throw std::invalid_argument("actor: agent id " + std::to_string(id) + " out of range");
    row[net.obs_dim + net.n_actions + id] = 1.0;
    bool any = false;
    for (int u = 0; u < net.n_actions; ++u) {
      uint8_t m = avail[static_cast<size_t>(r) * net.n_actions + u];
      mask[static_cast<size_t>(r) * net.n_actions + u] = m ? 1.0 : 0.0;
      any = any || m;
    }
    if (!any) {
      std::ostringstream os;
      os << "actor: agent " << id << " has no available action";
      throw std::runtime_error(os.str());
    }
  }
  return forward_rows(net, input, hidden, mask, rows);
}

PolicyOutput actor_forward(const ActorNet& net, const std::vector<std::vector<double>>& obs,
                           const std::vector<int>& prev_actions,
                           const std::vector<int>& agent_ids, const Tensor& hidden,
                           const std::vector<std::vector<uint8_t>>& avail) {
  int rows = static_cast<int>(obs.size());
  if (static_cast<int>(prev_actions.size()) != rows ||
      static_cast<int>(agent_ids.size()) != rows || static_cast<int>(avail.size()) != rows)
    throw std::invalid_argument("actor: obs/prev/agent/avail row counts disagree");
  std::vector<double> flat_obs(static_cast<size_t>(rows) * net.obs_dim);
  std::vector<uint8_t> flat_avail(static_cast<size_t>(rows) * net.n_actions);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(obs[r].size()) != net.obs_dim)
      throw std::invalid_argument("actor: observation row " + std::to_string(r) +
                                  " has wrong length");
    if (static_cast<int>(avail[r].size()) != net.n_actions)
      throw std::invalid_argument("actor: avail row " + std::to_string(r) + " has wrong length");
    std::copy(obs[r].begin(), obs[r].end(), flat_obs.begin() + static_cast<size_t>(r) * net.obs_dim);
    std::copy(avail[r].begin(), avail[r].end(),
              flat_avail.begin() + static_cast<size_t>(r) * net.n_actions);
  }
  return actor_forward_flat(net, flat_obs.data(), prev_actions.data(), agent_ids.data(), hidden,
                            flat_avail.data(), rows);
}

SampledAction sample_action(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0)
      throw std::runtime_error("actor: invalid probability " + std::to_string(p));
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-6)
    throw std::runtime_error("actor: probabilities sum to " + std::to_string(total));
  double u = rng.uniform();
  double cum = 0.0;
  int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    cum += probs[i];
    if (u < cum) return {i, std::log(probs[i])};
  }
  // numeric round-off: fall back to the last action with positive mass
  for (int i = n - 1; i >= 0; --i)
    if (probs[i] > 0.0) return {i, std::log(probs[i])};
  throw std::runtime_error("actor: all probabilities are zero");
}

int greedy_action(std::span<const double> probs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

}  // namespace vdmarl

#include "vdmarl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vdmarl {

int EnumerableMdp::n_joint() const {
  int j = 1;
  for (int a = 0; a < n_agents; ++a) j *= n_actions;
  return j;
}

std::vector<int> EnumerableMdp::decode_joint(int ja) const {
  std::vector<int> u(n_agents);
  for (int a = n_agents - 1; a >= 0; --a) {
    u[a] = ja % n_actions;
    ja /= n_actions;
  }
  return u;
}

EnumerableMdp make_climb_mdp(const MatrixGameSpec& spec) {
  int u = static_cast<int>(spec.payoff.size());
  if (u == 0) throw std::invalid_argument("oracle: empty payoff matrix");
  for (const auto& row : spec.payoff)
    if (static_cast<int>(row.size()) != u)
      throw std::invalid_argument("oracle: payoff matrix must be square");

  EnumerableMdp m;
  m.n_states = 1;
  m.n_agents = 2;
  m.n_actions = u;
  m.horizon = 1;
  m.initial_state = 0;
  m.gamma = 1.0;
  int j = u * u;
  m.transition = {std::vector<std::vector<double>>(j, std::vector<double>{1.0})};
  m.reward.resize(1);
  m.reward[0].resize(j);
  for (int u0 = 0; u0 < u; ++u0)
    for (int u1 = 0; u1 < u; ++u1) m.reward[0][u0 * u + u1] = spec.payoff[u0][u1];
  m.state_vec = {{1.0, 1.0}};
  m.obs_vec = {{{1.0}, {1.0}}};
  return m;
}

EnumerableMdp make_two_state_mdp() {
  EnumerableMdp m;
  m.n_states = 2;
  m.n_agents = 2;
  m.n_actions = 2;
  m.horizon = 3;
  m.initial_state = 0;
  m.gamma = 0.99;
  m.transition = {
      {{0.7, 0.3}, {0.2, 0.8}, {0.55, 0.45}, {0.35, 0.65}},
      {{0.15, 0.85}, {0.6, 0.4}, {0.8, 0.2}, {0.45, 0.55}},
  };
  m.reward = {
      {1.0, -0.5, 0.25, 2.0},
      {-1.0, 0.5, 1.5, -0.25},
  };
  m.state_vec = {{1.0, 0.0}, {0.0, 1.0}};
  m.obs_vec = {
      {{1.0, 0.0}, {1.0, 0.0}},
      {{0.0, 1.0}, {0.0, 1.0}},
  };
  return m;
}

namespace {

void validate(const EnumerableMdp& mdp, const ActorNet& actor) {
  if (mdp.n_states <= 0 || mdp.n_agents <= 0 || mdp.n_actions <= 0 || mdp.horizon <= 0)
    throw std::invalid_argument("oracle: mdp dimensions must be positive");
  if (mdp.initial_state < 0 || mdp.initial_state >= mdp.n_states)
    throw std::invalid_argument("oracle: initial state out of range");
  int j = mdp.n_joint();
  if (static_cast<int>(mdp.transition.size()) != mdp.n_states ||
      static_cast<int>(mdp.reward.size()) != mdp.n_states ||
      static_cast<int>(mdp.state_vec.size()) != mdp.n_states ||
      static_cast<int>(mdp.obs_vec.size()) != mdp.n_states)
    throw std::invalid_argument("oracle: per-state tables must have n_states entries");
  for (int s = 0; s < mdp.n_states; ++s) {
    if (static_cast<int>(mdp.transition[s].size()) != j ||
        static_cast<int>(mdp.reward[s].size()) != j)
      throw std::invalid_argument("oracle: per-action tables must have n_joint entries");
    for (int ja = 0; ja < j; ++ja) {
      if (static_cast<int>(mdp.transition[s][ja].size()) != mdp.n_states)
        throw std::invalid_argument("oracle: transition rows must have n_states entries");
      double total = 0.0;
      for (double p : mdp.transition[s][ja]) {
        if (p < 0.0) throw std::invalid_argument("oracle: negative transition probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "oracle: transition row (s=" << s << ", ja=" << ja << ") sums to " << total;
        throw std::invalid_argument(os.str());
      }
    }
    if (static_cast<int>(mdp.obs_vec[s].size()) != mdp.n_agents)
      throw std::invalid_argument("oracle: obs_vec must have one row per agent");
    for (const auto& o : mdp.obs_vec[s])
      if (static_cast<int>(o.size()) != actor.obs_dim)
        throw std::invalid_argument("oracle: observation width disagrees with the actor");
  }
  if (mdp.n_actions != actor.n_actions || mdp.n_agents != actor.n_agents)
    throw std::invalid_argument("oracle: actor was built for different agent/action counts");
}

PolicyOutput node_forward(const EnumerableMdp& mdp, const ActorNet& actor, int state,
                          const std::vector<int>& prev, const Tensor& hidden) {
  int n = mdp.n_agents, u = mdp.n_actions;
  std::vector<double> obs;
  obs.reserve(static_cast<size_t>(n) * actor.obs_dim);
  for (int a = 0; a < n; ++a)
    obs.insert(obs.end(), mdp.obs_vec[state][a].begin(), mdp.obs_vec[state][a].end());
  std::vector<int> prev_row = prev.empty() ? std::vector<int>(n, -1) : prev;
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<uint8_t> avail(static_cast<size_t>(n) * u, 1);
  return actor_forward_flat(actor, obs.data(), prev_row.data(), ids.data(), hidden, avail.data(),
                            n);
}

std::unique_ptr<OracleNode> expand(const EnumerableMdp& mdp, const ActorNet& actor, int state,
                                   int t, double prefix, std::vector<int> prev,
                                   const Tensor& hidden) {
  auto node = std::make_unique<OracleNode>();
  node->state = state;
  node->t = t;
  node->prefix_prob = prefix;
  node->prev_joint = std::move(prev);
  if (t == mdp.horizon) return node;

  PolicyOutput out = node_forward(mdp, actor, state, node->prev_joint, hidden);
  int n = mdp.n_agents, u = mdp.n_actions, j = mdp.n_joint(), h = actor.hidden_dim;
  auto probs = out.probs.values();
  auto vals = out.local_values.values();
  auto hid = out.hidden.values();
  node->probs.resize(n);
  node->local_values.resize(n);
  node->hidden.resize(n);
  for (int a = 0; a < n; ++a) {
    node->probs[a].assign(probs.begin() + static_cast<size_t>(a) * u,
                          probs.begin() + static_cast<size_t>(a + 1) * u);
    node->local_values[a] = vals[a];
    node->hidden[a].assign(hid.begin() + static_cast<size_t>(a) * h,
                           hid.begin() + static_cast<size_t>(a + 1) * h);
  }
  node->q.assign(j, 0.0);
  node->children.resize(j);
  for (int ja = 0; ja < j; ++ja) {
    std::vector<int> joint = mdp.decode_joint(ja);
    double pj = 1.0;
    for (int a = 0; a < n; ++a) pj *= node->probs[a][joint[a]];
    node->children[ja].resize(mdp.n_states);
    double q = mdp.reward[state][ja];
    for (int s2 = 0; s2 < mdp.n_states; ++s2) {
      double p = mdp.transition[state][ja][s2];
      if (p <= 0.0) continue;
      auto child = expand(mdp, actor, s2, t + 1, prefix * pj * p, joint, out.hidden);
      q += mdp.gamma * p * child->value;
      node->children[ja][s2] = std::move(child);
    }
    node->q[ja] = q;
    node->value += pj * q;
  }
  return node;
}

struct GraphWalk {
  const EnumerableMdp& mdp;
  const ActorNet& actor;
  const JointCoefficient& coeff;
  Tensor loss;

  void visit(const OracleNode& node, const Tensor& hidden) {
    if (node.t == mdp.horizon) return;
    int n = mdp.n_agents, u = mdp.n_actions, j = mdp.n_joint();
    std::vector<double> c(static_cast<size_t>(n) * u, 0.0);
    {
      // coefficient callbacks may run networks; keep them off the tape
      NoGradGuard ng;
      double disc = std::pow(mdp.gamma, node.t);
      for (int ja = 0; ja < j; ++ja) {
        std::vector<int> joint = mdp.decode_joint(ja);
        double pj = 1.0;
        for (int a = 0; a < n; ++a) pj *= node.probs[a][joint[a]];
        double w = disc * node.prefix_prob * pj * coeff(node, ja);
        if (w == 0.0) continue;
        for (int a = 0; a < n; ++a) c[static_cast<size_t>(a) * u + joint[a]] += w;
      }
    }
    PolicyOutput out = node_forward(mdp, actor, node.state, node.prev_joint, hidden);
    Tensor lp = log_softmax(out.logits, out.mask);
    Tensor contrib = sum(mul(lp, Tensor::of({n, u}, std::move(c))));
    loss = loss.defined() ? add(loss, contrib) : contrib;
    for (int ja = 0; ja < j; ++ja)
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        if (node.children[ja][s2]) visit(*node.children[ja][s2], out.hidden);
  }
};

}  // namespace

std::unique_ptr<OracleNode> build_tree(const EnumerableMdp& mdp, const ActorNet& actor) {
  validate(mdp, actor);
  NoGradGuard ng;
  return expand(mdp, actor, mdp.initial_state, 0, 1.0, {}, initial_hidden(actor, mdp.n_agents));
}

void score_gradient(const EnumerableMdp& mdp, const ActorNet& actor, const JointCoefficient& c) {
  auto root = build_tree(mdp, actor);
  // clear stale adjoints so the result is exactly this gradient, zero elsewhere
  for (int i = 0; i < actor.params.count(); ++i) {
    auto node = actor.params.tensor(i).node();
    std::fill(node->grad.begin(), node->grad.end(), 0.0);
  }
  GraphWalk walk{mdp, actor, c, Tensor()};
  walk.visit(*root, initial_hidden(actor, mdp.n_agents));
  backward(walk.loss);
}

void vanilla_mapg_oracle(const EnumerableMdp& mdp, const ActorNet& actor) {
  std::ostringstream why;
  if (mdp.n_states > 50)
    why << "n_states " << mdp.n_states << " exceeds 50";
  else if (mdp.n_joint() > 25)
    why << "joint action count " << mdp.n_joint() << " exceeds 25";
  else if (mdp.horizon > 5)
    why << "horizon " << mdp.horizon << " exceeds 5";
  if (!why.str().empty())
    throw std::invalid_argument("oracle: refusing full enumeration: " + why.str());
  score_gradient(mdp, actor, [](const OracleNode& n, int ja) { return n.q[ja]; });
}

void baseline_gradient(const EnumerableMdp& mdp, const ActorNet& actor, const NodeValue& v) {
  score_gradient(mdp, actor,
                 [&v](const OracleNode& n, int ja) { (void)ja; return -v(n); });
}

void td_advantage_gradient(const EnumerableMdp& mdp, const ActorNet& actor) {
  score_gradient(mdp, actor,
                 [](const OracleNode& n, int ja) { return n.q[ja] - n.value; });
}

}  // namespace vdmarl

#include "vdmarl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>

namespace vdmarl {

Algo parse_algo(const std::string& name) {
  if (name == "iac") return Algo::Iac;
  if (name == "vdac_sum") return Algo::VdacSum;
  if (name == "vdac_mix") return Algo::VdacMix;
  if (name == "vdac_mix_linear") return Algo::VdacMixLinear;
  if (name == "naive_critic") return Algo::NaiveCritic;
  if (name == "coma") return Algo::Coma;
  throw std::invalid_argument("trainer: unknown algorithm '" + name + "'");
}

const char* algo_name(Algo a) {
  switch (a) {
    case Algo::Iac: return "iac";
    case Algo::VdacSum: return "vdac_sum";
    case Algo::VdacMix: return "vdac_mix";
    case Algo::VdacMixLinear: return "vdac_mix_linear";
    case Algo::NaiveCritic: return "naive_critic";
    case Algo::Coma: return "coma";
  }
  throw std::logic_error("trainer: bad algorithm enum");
}

long EpisodeBatch::total_steps() const {
  if (static_cast<int>(lengths.size()) == n_envs) {
    long s = 0;
    for (int l : lengths) s += l;
    return s;
  }
  long s = 0;
  for (double f : filled) s += f > 0.0 ? 1 : 0;
  return s;
}

RolloutContext RolloutContext::create(const EnvConfig& cfg, int n_envs, uint64_t seed) {
  RolloutContext ctx;
  for (int e = 0; e < n_envs; ++e) {
    ctx.envs.push_back(make_env(cfg));
    ctx.rngs.emplace_back(derive_stream_seed(seed, 100 + e));
  }
  return ctx;
}

namespace {

struct RowInputs {
  const double* obs;
  const uint8_t* avail;
  std::vector<int> prev;
  std::vector<int> ids;
};

RowInputs row_inputs(const EpisodeBatch& b, int t) {
  RowInputs r;
  int rows = b.rows();
  r.obs = b.obs.data() + b.obs_at(t, 0, 0);
  r.avail = b.avail.data() + b.avail_at(t, 0, 0);
  r.ids.resize(rows);
  for (int i = 0; i < rows; ++i) r.ids[i] = i % b.n_agents;
  if (t == 0) {
    r.prev.assign(rows, -1);
  } else {
    r.prev.resize(rows);
    const int* prev_row = b.actions.data() + b.agent_at(t - 1, 0, 0);
    for (int i = 0; i < rows; ++i) r.prev[i] = prev_row[i];
  }
  return r;
}

PolicyOutput forward_batch_row(const ActorNet& actor, const EpisodeBatch& b, int t,
                               const Tensor& hidden) {
  RowInputs r = row_inputs(b, t);
  return actor_forward_flat(actor, r.obs, r.prev.data(), r.ids.data(), hidden, r.avail, b.rows());
}

void write_step_rows(EpisodeBatch& b, int t, int e, const EnvStep& s) {
  for (int a = 0; a < b.n_agents; ++a) {
    std::copy(s.observations[a].begin(), s.observations[a].end(),
              b.obs.begin() + b.obs_at(t, e, a));
    std::copy(s.avail_actions[a].begin(), s.avail_actions[a].end(),
              b.avail.begin() + b.avail_at(t, e, a));
  }
  std::copy(s.state.begin(), s.state.end(), b.state.begin() + b.state_at(t, e));
}

// Episode length and true-terminal flag per env, derived from the masks so
// synthetic batches work too.
void episode_ends(const EpisodeBatch& b, std::vector<int>& len, std::vector<uint8_t>& term) {
  len.assign(b.n_envs, 0);
  term.assign(b.n_envs, 0);
  for (int e = 0; e < b.n_envs; ++e) {
    for (int t = 0; t < b.T; ++t)
      if (b.filled[b.env_at(t, e)] > 0.0) len[e] = t + 1;
    if (len[e] > 0) term[e] = b.terminated[b.env_at(len[e] - 1, e)];
  }
}

}  // namespace

EpisodeBatch rollout(const ActorNet& actor, RolloutContext& ctx) {
  NoGradGuard ng;
  int E = static_cast<int>(ctx.envs.size());
  if (E == 0) throw std::invalid_argument("rollout: no environments");
  Env& probe = *ctx.envs[0];
  int A = probe.n_agents(), U = probe.n_actions();
  int cap = probe.episode_limit();

  EpisodeBatch b;
  b.n_envs = E;
  b.n_agents = A;
  b.n_actions = U;
  b.obs_dim = probe.obs_dim();
  b.state_dim = probe.state_dim();
  b.T = cap;  // trimmed after the loop
  b.obs.assign(static_cast<size_t>(cap + 1) * E * A * b.obs_dim, 0.0);
  b.state.assign(static_cast<size_t>(cap + 1) * E * b.state_dim, 0.0);
  b.avail.assign(static_cast<size_t>(cap + 1) * E * A * U, 1);
  b.actions.assign(static_cast<size_t>(cap + 1) * E * A, 0);
  b.rewards.assign(static_cast<size_t>(cap) * E, 0.0);
  b.terminated.assign(static_cast<size_t>(cap) * E, 0);
  b.filled.assign(static_cast<size_t>(cap) * E, 0.0);
  b.log_probs.assign(static_cast<size_t>(cap) * E * A, 0.0);
  b.local_values.assign(static_cast<size_t>(cap + 1) * E * A, 0.0);

  std::vector<int> len(E, -1);
  for (int e = 0; e < E; ++e) {
    EnvStep s0 = ctx.envs[e]->reset(ctx.rngs[e].next_u64());
    write_step_rows(b, 0, e, s0);
  }

  Tensor hidden = initial_hidden(actor, E * A);
  int T = 0;
  for (int t = 0; t <= cap; ++t) {
    bool any = false;
    for (int e = 0; e < E; ++e)
      if (len[e] < 0 || t <= len[e]) any = true;
    if (!any) break;

    PolicyOutput out = forward_batch_row(actor, b, t, hidden);
    hidden = out.hidden;
    auto values = out.local_values.values();
    auto probs = out.probs.values();
    for (int e = 0; e < E; ++e)
      for (int a = 0; a < A; ++a)
        b.local_values[b.agent_at(t, e, a)] = values[static_cast<size_t>(e) * A + a];

    for (int e = 0; e < E; ++e) {
      if (len[e] >= 0 && t > len[e]) continue;  // padding rows keep action 0
      for (int a = 0; a < A; ++a) {
        int row = e * A + a;
        auto p = probs.subspan(static_cast<size_t>(row) * U, U);
        SampledAction sa = sample_action(p, ctx.rngs[e]);
        b.actions[b.agent_at(t, e, a)] = sa.action;
        if (len[e] < 0) b.log_probs[b.agent_at(t, e, a)] = sa.log_prob;
      }
    }

    for (int e = 0; e < E; ++e) {
      if (len[e] >= 0) continue;
      std::vector<int> joint(A);
      for (int a = 0; a < A; ++a) joint[a] = b.actions[b.agent_at(t, e, a)];
      EnvStep s;
      try {
        s = ctx.envs[e]->step(joint);
      } catch (const std::exception& err) {
        throw std::runtime_error("rollout: env " + std::to_string(e) + ": " + err.what());
      }
      b.rewards[b.env_at(t, e)] = s.reward;
      b.filled[b.env_at(t, e)] = 1.0;
      b.terminated[b.env_at(t, e)] = (s.terminated && !s.truncated) ? 1 : 0;
      write_step_rows(b, t + 1, e, s);
      if (s.terminated) len[e] = t + 1;
      T = std::max(T, t + 1);
    }
  }

  b.T = T;
  b.obs.resize(static_cast<size_t>(T + 1) * E * A * b.obs_dim);
  b.state.resize(static_cast<size_t>(T + 1) * E * b.state_dim);
  b.avail.resize(static_cast<size_t>(T + 1) * E * A * U);
  b.actions.resize(static_cast<size_t>(T + 1) * E * A);
  b.rewards.resize(static_cast<size_t>(T) * E);
  b.terminated.resize(static_cast<size_t>(T) * E);
  b.filled.resize(static_cast<size_t>(T) * E);
  b.log_probs.resize(static_cast<size_t>(T) * E * A);
  b.local_values.resize(static_cast<size_t>(T + 1) * E * A);
  b.lengths = len;
  return b;
}

std::vector<double> nstep_targets(const std::vector<double>& rewards,
                                  const std::vector<double>& values, double gamma,
                                  const std::vector<double>& filled, int T, int rows) {
  size_t n = static_cast<size_t>(T) * rows;
  if (rewards.size() != n || filled.size() != n)
    throw std::invalid_argument("nstep_targets: rewards/filled must have T*rows entries");
  if (values.size() != n + static_cast<size_t>(rows))
    throw std::invalid_argument("nstep_targets: values must have (T+1)*rows entries");
  std::vector<double> y(n, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int t = T - 1; t >= 0; --t) {
      size_t at = static_cast<size_t>(t) * rows + r;
      if (filled[at] <= 0.0) continue;
      size_t next = at + rows;
      bool next_in = t + 1 < T && filled[next] > 0.0;
      y[at] = rewards[at] + gamma * (next_in ? y[next] : values[next]);
    }
  }
  return y;
}

std::vector<double> lambda_targets(const std::vector<double>& rewards,
                                   const std::vector<double>& values, double gamma, double lambda,
                                   const std::vector<double>& filled, int T, int rows) {
  size_t n = static_cast<size_t>(T) * rows;
  if (rewards.size() != n || filled.size() != n)
    throw std::invalid_argument("lambda_targets: rewards/filled must have T*rows entries");
  if (values.size() != n + static_cast<size_t>(rows))
    throw std::invalid_argument("lambda_targets: values must have (T+1)*rows entries");
  std::vector<double> y(n, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int t = T - 1; t >= 0; --t) {
      size_t at = static_cast<size_t>(t) * rows + r;
      if (filled[at] <= 0.0) continue;
      size_t next = at + rows;
      bool next_in = t + 1 < T && filled[next] > 0.0;
      double boot = values[next];
      y[at] = rewards[at] +
              gamma * (next_in ? (1.0 - lambda) * boot + lambda * y[next] : boot);
    }
  }
  return y;
}

std::vector<double> td_advantage(const std::vector<double>& y, const std::vector<double>& v) {
  if (y.size() != v.size())
    throw std::invalid_argument("td_advantage: target and value lengths disagree");
  std::vector<double> a(y.size());
  for (size_t i = 0; i < y.size(); ++i) a[i] = y[i] - v[i];
  return a;
}

const ParameterSet& AlgoNets::live_critic_params() const {
  if (central) return central->params;
  if (coma) return coma->params;
  throw std::logic_error("trainer: no live critic for this algorithm");
}

AlgoNets AlgoNets::create(const TrainConfig& cfg, int obs_dim, int state_dim, int n_agents,
                          int n_actions, int hidden_dim) {
  AlgoNets n;
  n.algo = cfg.algorithm;
  n.actor = ActorNet::create(obs_dim, n_actions, n_agents, hidden_dim,
                             derive_stream_seed(cfg.seed, 11));
  uint64_t critic_seed = derive_stream_seed(cfg.seed, 12);
  switch (cfg.algorithm) {
    case Algo::Iac:
    case Algo::VdacSum:
      break;
    case Algo::VdacMix:
    case Algo::VdacMixLinear:
      n.mixer = MixingNetwork::create(state_dim, n_agents,
                                      cfg.algorithm == Algo::VdacMixLinear, critic_seed);
      n.critic_params.adopt(n.mixer->params, "");
      break;
    case Algo::NaiveCritic: {
      int in = state_dim + n_agents * n_actions;
      n.central = CentralCritic::create(in, critic_seed);
      n.central_target = CentralCritic::create(in, critic_seed);
      n.target.params = n.central_target->params;
      sync_target(n.target, n.central->params);
      n.critic_params.adopt(n.central->params, "");
      break;
    }
    case Algo::Coma: {
      int in = state_dim + obs_dim + n_agents + n_agents * n_actions;
      n.coma = ComaCritic::create(in, n_actions, critic_seed);
      n.coma_target = ComaCritic::create(in, n_actions, critic_seed);
      n.target.params = n.coma_target->params;
      sync_target(n.target, n.coma->params);
      n.critic_params.adopt(n.coma->params, "");
      break;
    }
  }
  n.actor_opt = RmsProp(cfg.lr, 0.99, 1e-5);
  n.critic_opt = RmsProp(cfg.lr, 0.99, 1e-5);
  return n;
}

UnrollResult unroll_policy_values(const ActorNet& actor, const EpisodeBatch& batch) {
  NoGradGuard ng;
  int rows = batch.rows();
  UnrollResult u;
  u.values.assign(static_cast<size_t>(batch.T + 1) * rows, 0.0);
  u.probs.assign(static_cast<size_t>(batch.T + 1) * rows * batch.n_actions, 0.0);
  Tensor hidden = initial_hidden(actor, rows);
  for (int t = 0; t <= batch.T; ++t) {
    PolicyOutput out = forward_batch_row(actor, batch, t, hidden);
    hidden = out.hidden;
    auto v = out.local_values.values();
    std::copy(v.begin(), v.end(), u.values.begin() + static_cast<size_t>(t) * rows);
    auto p = out.probs.values();
    std::copy(p.begin(), p.end(),
              u.probs.begin() + static_cast<size_t>(t) * rows * batch.n_actions);
  }
  return u;
}

namespace {

// state + one-hot(u_{t-1}) rows for the naive central critic, one per env.
std::vector<double> naive_input_rows(const EpisodeBatch& b, int t) {
  int in = b.state_dim + b.n_agents * b.n_actions;
  std::vector<double> x(static_cast<size_t>(b.n_envs) * in, 0.0);
  for (int e = 0; e < b.n_envs; ++e) {
    double* row = x.data() + static_cast<size_t>(e) * in;
    const double* st = b.state.data() + b.state_at(t, e);
    std::copy(st, st + b.state_dim, row);
    if (t > 0)
      for (int a = 0; a < b.n_agents; ++a)
        row[b.state_dim + a * b.n_actions + b.actions[b.agent_at(t - 1, e, a)]] = 1.0;
  }
  return x;
}

// state + obs_a + one-hot(a) + current joint action with slot a zeroed; one
// row per (env, agent).
std::vector<double> coma_input_rows(const EpisodeBatch& b, int t) {
  int in = b.state_dim + b.obs_dim + b.n_agents + b.n_agents * b.n_actions;
  std::vector<double> x(static_cast<size_t>(b.rows()) * in, 0.0);
  for (int e = 0; e < b.n_envs; ++e) {
    for (int a = 0; a < b.n_agents; ++a) {
      double* row = x.data() + (static_cast<size_t>(e) * b.n_agents + a) * in;
      const double* st = b.state.data() + b.state_at(t, e);
      std::copy(st, st + b.state_dim, row);
      const double* ob = b.obs.data() + b.obs_at(t, e, a);
      std::copy(ob, ob + b.obs_dim, row + b.state_dim);
      row[b.state_dim + b.obs_dim + a] = 1.0;
      double* joint = row + b.state_dim + b.obs_dim + b.n_agents;
      for (int o = 0; o < b.n_agents; ++o)
        if (o != a) joint[o * b.n_actions + b.actions[b.agent_at(t, e, o)]] = 1.0;
    }
  }
  return x;
}

std::vector<double> tile_per_agent(const std::vector<double>& per_env, int T, int E, int A) {
  std::vector<double> out(static_cast<size_t>(T) * E * A);
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < E; ++e)
      for (int a = 0; a < A; ++a)
        out[(static_cast<size_t>(t) * E + e) * A + a] = per_env[static_cast<size_t>(t) * E + e];
  return out;
}

}  // namespace

TargetData compute_targets(const TrainConfig& cfg, const AlgoNets& nets,
                           const EpisodeBatch& batch) {
  NoGradGuard ng;
  const int T = batch.T, E = batch.n_envs, A = batch.n_agents, U = batch.n_actions;
  const int rows = E * A;
  std::vector<int> len;
  std::vector<uint8_t> term;
  episode_ends(batch, len, term);

  TargetData td;
  switch (nets.algo) {
    case Algo::Iac: {
      UnrollResult u = unroll_policy_values(nets.actor, batch);
      std::vector<double> values = u.values;
      for (int e = 0; e < E; ++e)
        if (term[e])
          for (int a = 0; a < A; ++a)
            values[(static_cast<size_t>(len[e]) * E + e) * A + a] = 0.0;
      std::vector<double> rew = tile_per_agent(batch.rewards, T, E, A);
      std::vector<double> fil = tile_per_agent(batch.filled, T, E, A);
      td.per_agent = true;
      td.y = lambda_targets(rew, values, cfg.gamma, cfg.lambda, fil, T, rows);
      td.advantage = td.y;
      for (size_t i = 0; i < td.advantage.size(); ++i) td.advantage[i] -= u.values[i];
      break;
    }
    case Algo::VdacSum:
    case Algo::VdacMix:
    case Algo::VdacMixLinear: {
      UnrollResult u = unroll_policy_values(nets.actor, batch);
      std::vector<double> v_tot(static_cast<size_t>(T + 1) * E, 0.0);
      if (nets.algo == Algo::VdacSum) {
        for (int t = 0; t <= T; ++t)
          for (int e = 0; e < E; ++e)
            for (int a = 0; a < A; ++a)
              v_tot[static_cast<size_t>(t) * E + e] +=
                  u.values[(static_cast<size_t>(t) * E + e) * A + a];
      } else {
        Tensor vals = Tensor::of({(T + 1) * E, A},
                                 std::vector<double>(u.values.begin(), u.values.end()));
        Tensor st = Tensor::of({(T + 1) * E, batch.state_dim},
                               std::vector<double>(batch.state.begin(), batch.state.end()));
        Tensor out = mix_forward(*nets.mixer, vals, st);
        auto ov = out.values();
        std::copy(ov.begin(), ov.end(), v_tot.begin());
      }
      std::vector<double> boot = v_tot;
      for (int e = 0; e < E; ++e)
        if (term[e]) boot[static_cast<size_t>(len[e]) * E + e] = 0.0;
      td.per_agent = false;
      td.y = lambda_targets(batch.rewards, boot, cfg.gamma, cfg.lambda, batch.filled, T, E);
      std::vector<double> adv_env = td.y;
      for (size_t i = 0; i < adv_env.size(); ++i) adv_env[i] -= v_tot[i];
      td.advantage = tile_per_agent(adv_env, T, E, A);
      break;
    }
    case Algo::NaiveCritic: {
      std::vector<double> vhat(static_cast<size_t>(T + 1) * E);
      for (int t = 0; t <= T; ++t) {
        Tensor x = Tensor::of({E, nets.central_target->input_dim}, naive_input_rows(batch, t));
        Tensor v = critic_forward(*nets.central_target, x);
        auto out = v.values();
        std::copy(out.begin(), out.end(), vhat.begin() + static_cast<size_t>(t) * E);
      }
      std::vector<double> boot = vhat;
      for (int e = 0; e < E; ++e)
        if (term[e]) boot[static_cast<size_t>(len[e]) * E + e] = 0.0;
      td.per_agent = false;
      td.y = lambda_targets(batch.rewards, boot, cfg.gamma, cfg.lambda, batch.filled, T, E);
      std::vector<double> adv_env = td.y;
      for (size_t i = 0; i < adv_env.size(); ++i) adv_env[i] -= vhat[i];
      td.advantage = tile_per_agent(adv_env, T, E, A);
      break;
    }
    case Algo::Coma: {
      UnrollResult u = unroll_policy_values(nets.actor, batch);
      std::vector<double> q_taken(static_cast<size_t>(T + 1) * rows);
      for (int t = 0; t <= T; ++t) {
        Tensor x = Tensor::of({rows, nets.coma_target->input_dim}, coma_input_rows(batch, t));
        Tensor qt = coma_forward(*nets.coma_target, x);
        auto q = qt.values();
        for (int r = 0; r < rows; ++r) {
          int taken = batch.actions[static_cast<size_t>(t) * rows + r];
          q_taken[static_cast<size_t>(t) * rows + r] = q[static_cast<size_t>(r) * U + taken];
        }
      }
      for (int e = 0; e < E; ++e)
        if (term[e])
          for (int a = 0; a < A; ++a)
            q_taken[(static_cast<size_t>(len[e]) * E + e) * A + a] = 0.0;
      std::vector<double> rew = tile_per_agent(batch.rewards, T, E, A);
      std::vector<double> fil = tile_per_agent(batch.filled, T, E, A);
      td.per_agent = true;
      td.y = lambda_targets(rew, q_taken, cfg.gamma, cfg.lambda, fil, T, rows);
      // advantage from the live critic (Eq. 4), detached
      td.advantage.assign(static_cast<size_t>(T) * rows, 0.0);
      for (int t = 0; t < T; ++t) {
        Tensor x = Tensor::of({rows, nets.coma->input_dim}, coma_input_rows(batch, t));
        Tensor qe = coma_forward(*nets.coma, x);
        auto q = qe.values();
        for (int r = 0; r < rows; ++r) {
          int taken = batch.actions[static_cast<size_t>(t) * rows + r];
          auto q_row = q.subspan(static_cast<size_t>(r) * U, U);
          auto p_row = std::span<const double>(u.probs).subspan(
              (static_cast<size_t>(t) * rows + r) * U, U);
          td.advantage[static_cast<size_t>(t) * rows + r] =
              coma_advantage(q_row, p_row, taken);
        }
      }
      break;
    }
  }

  double num = 0.0, den = 0.0;
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < E; ++e) {
      if (batch.filled[batch.env_at(t, e)] <= 0.0) continue;
      for (int a = 0; a < A; ++a) {
        num += td.advantage[(static_cast<size_t>(t) * E + e) * A + a];
        den += 1.0;
      }
    }
  td.mean_advantage = den > 0.0 ? num / den : 0.0;
  return td;
}

LossBundle build_losses(const TrainConfig& cfg, const AlgoNets& nets, const EpisodeBatch& batch,
                        const TargetData& targets) {
  const int T = batch.T, E = batch.n_envs, A = batch.n_agents;
  const int rows = E * A;
  double filled_env = 0.0;
  for (double f : batch.filled) filled_env += f > 0.0 ? 1.0 : 0.0;
  if (filled_env == 0.0) throw std::invalid_argument("trainer: batch has no filled steps");
  double filled_agents = filled_env * A;

  Tensor policy_acc, value_acc, entropy_acc;
  auto accumulate = [](Tensor& acc, const Tensor& term) {
    acc = acc.defined() ? add(acc, term) : term;
  };

  Tensor hidden = initial_hidden(nets.actor, rows);
  for (int t = 0; t < T; ++t) {
    PolicyOutput out = forward_batch_row(nets.actor, batch, t, hidden);
    hidden = out.hidden;

    std::vector<int> taken(batch.actions.begin() + static_cast<size_t>(t) * rows,
                           batch.actions.begin() + static_cast<size_t>(t + 1) * rows);
    Tensor lp_all = log_softmax(out.logits, out.mask);
    Tensor lp = gather_cols(lp_all, taken);

    std::vector<double> coeff(rows);
    for (int e = 0; e < E; ++e) {
      double f = batch.filled[batch.env_at(t, e)];
      for (int a = 0; a < A; ++a)
        coeff[static_cast<size_t>(e) * A + a] =
            f * targets.advantage[(static_cast<size_t>(t) * E + e) * A + a];
    }
    accumulate(policy_acc, sum(mul(lp, Tensor::of({rows, 1}, std::move(coeff)))));

    std::vector<double> fill_rows(rows);
    for (int e = 0; e < E; ++e)
      for (int a = 0; a < A; ++a)
        fill_rows[static_cast<size_t>(e) * A + a] = batch.filled[batch.env_at(t, e)];

    if (cfg.entropy_coef > 0.0) {
      Tensor plogp = row_sum(mul(out.probs, lp_all));  // [rows x 1]
      accumulate(entropy_acc,
                 sum(mul(plogp, Tensor::of({rows, 1}, std::vector<double>(fill_rows)))));
    }

    switch (nets.algo) {
      case Algo::Iac: {
        Tensor y = Tensor::of({rows, 1},
                              std::vector<double>(targets.y.begin() + static_cast<size_t>(t) * rows,
                                                  targets.y.begin() + static_cast<size_t>(t + 1) * rows));
        Tensor d = sub(y, out.local_values);
        accumulate(value_acc,
                   sum(mul(mul(d, d), Tensor::of({rows, 1}, std::move(fill_rows)))));
        break;
      }
      case Algo::VdacSum:
      case Algo::VdacMix:
      case Algo::VdacMixLinear: {
        Tensor v_env;
        Tensor vals = reshape(out.local_values, {E, A});
        if (nets.algo == Algo::VdacSum) {
          v_env = row_sum(vals);
        } else {
          Tensor st = Tensor::of(
              {E, batch.state_dim},
              std::vector<double>(batch.state.begin() + batch.state_at(t, 0),
                                  batch.state.begin() + batch.state_at(t, 0) +
                                      static_cast<size_t>(E) * batch.state_dim));
          v_env = mix_forward(*nets.mixer, vals, st);
        }
        Tensor y = Tensor::of({E, 1},
                              std::vector<double>(targets.y.begin() + static_cast<size_t>(t) * E,
                                                  targets.y.begin() + static_cast<size_t>(t + 1) * E));
        Tensor d = sub(y, v_env);
        std::vector<double> fe(batch.filled.begin() + static_cast<size_t>(t) * E,
                               batch.filled.begin() + static_cast<size_t>(t + 1) * E);
        accumulate(value_acc, sum(mul(mul(d, d), Tensor::of({E, 1}, std::move(fe)))));
        break;
      }
      case Algo::NaiveCritic: {
        Tensor x = Tensor::of({E, nets.central->input_dim}, naive_input_rows(batch, t));
        Tensor v = critic_forward(*nets.central, x);
        Tensor y = Tensor::of({E, 1},
                              std::vector<double>(targets.y.begin() + static_cast<size_t>(t) * E,
                                                  targets.y.begin() + static_cast<size_t>(t + 1) * E));
        Tensor d = sub(y, v);
        std::vector<double> fe(batch.filled.begin() + static_cast<size_t>(t) * E,
                               batch.filled.begin() + static_cast<size_t>(t + 1) * E);
        accumulate(value_acc, sum(mul(mul(d, d), Tensor::of({E, 1}, std::move(fe)))));
        break;
      }
      case Algo::Coma: {
        Tensor x = Tensor::of({rows, nets.coma->input_dim}, coma_input_rows(batch, t));
        Tensor q = coma_forward(*nets.coma, x);
        Tensor q_taken = gather_cols(q, taken);
        Tensor y = Tensor::of({rows, 1},
                              std::vector<double>(targets.y.begin() + static_cast<size_t>(t) * rows,
                                                  targets.y.begin() + static_cast<size_t>(t + 1) * rows));
        Tensor d = sub(y, q_taken);
        accumulate(value_acc,
                   sum(mul(mul(d, d), Tensor::of({rows, 1}, std::move(fill_rows)))));
        break;
      }
    }
  }

  LossBundle lb;
  lb.policy = mul(policy_acc, -1.0 / filled_agents);
  if (cfg.entropy_coef > 0.0) {
    // entropy_acc holds sum of filled * p log p; entropy is its negation
    lb.entropy = -entropy_acc.item() / filled_agents;
    lb.policy = add(lb.policy, mul(entropy_acc, cfg.entropy_coef / filled_agents));
  }
  double value_norm = targets.per_agent ? filled_agents : filled_env;
  lb.value = mul(value_acc, 1.0 / value_norm);
  lb.total = add(mul(lb.policy, cfg.pi_coef() / cfg.lr), mul(lb.value, cfg.v_coef() / cfg.lr));
  return lb;
}

TrainStats train_step(const TrainConfig& cfg, AlgoNets& nets, const EpisodeBatch& batch) {
  TargetData td = compute_targets(cfg, nets, batch);
  LossBundle lb = build_losses(cfg, nets, batch, td);

  TrainStats stats;
  stats.total_loss = lb.total.item();
  stats.policy_loss = lb.policy.item();
  stats.critic_loss = lb.value.item();
  stats.entropy = lb.entropy;
  stats.mean_advantage = td.mean_advantage;
  if (!std::isfinite(stats.total_loss)) {
    std::ostringstream os;
    os << "trainer: non-finite loss (total=" << stats.total_loss
       << ", policy=" << stats.policy_loss << ", critic=" << stats.critic_loss
       << ", mean_advantage=" << stats.mean_advantage << ")";
    throw std::runtime_error(os.str());
  }

  backward(lb.total);

  auto actor_grads = collect_grads(nets.actor.params);
  stats.actor_grad_norm = clip_grad_norm(actor_grads, cfg.grad_clip);
  nets.actor_opt.update(nets.actor.params, actor_grads);

  if (nets.critic_params.count() > 0) {
    auto critic_grads = collect_grads(nets.critic_params);
    stats.critic_grad_norm = clip_grad_norm(critic_grads, cfg.grad_clip);
    nets.critic_opt.update(nets.critic_params, critic_grads);
  }

  if (nets.has_target())
    stats.target_synced = tick_target(nets.target, nets.live_critic_params(), cfg.target_sync);
  return stats;
}

}  // namespace vdmarl

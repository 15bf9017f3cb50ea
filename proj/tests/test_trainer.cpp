#include "vdmarl/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "vdmarl/env.hpp"
#include "vdmarl/harness.hpp"
#include "vdmarl/rng.hpp"

namespace vdmarl {
namespace {

// Pursuit env whose reset always restores one fixed layout; lets rollout tests
// pin the opening position.
class FixedLayoutEnv : public PursuitEnv {
 public:
  FixedLayoutEnv(PursuitGridSpec spec, std::vector<Cell> hunters, Cell prey)
      : PursuitEnv(spec), hunters_(std::move(hunters)), prey_(prey) {}
  EnvStep reset(uint64_t) override {
    set_layout(hunters_, prey_);
    return current();
  }

 private:
  std::vector<Cell> hunters_;
  Cell prey_;
};

void zero_params(ParameterSet& params) {
  params.restore_values(std::vector<double>(params.total_size(), 0.0));
}

// Actor that all but surely picks `action` wherever it is available.
ActorNet biased_actor(const Env& probe, int action, int hidden = 8) {
  ActorNet net = ActorNet::create(probe.obs_dim(), probe.n_actions(), probe.n_agents(), hidden, 1);
  zero_params(net.params);
  net.policy_head.bias.values_mut()[action] = 50.0;
  return net;
}

TrainConfig climb_config(Algo algo, uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.algorithm = algo;
  cfg.seed = seed;
  cfg.hidden_dim = 16;
  cfg.env.name = "climb";
  return cfg;
}

AlgoNets make_nets(const TrainConfig& cfg) {
  auto probe = make_env(cfg.env);
  return AlgoNets::create(cfg, probe->obs_dim(), probe->state_dim(), probe->n_agents(),
                          probe->n_actions(), cfg.hidden_dim);
}

// Synthetic 2-env batch: env 0 runs 3 steps and truncates (bootstraps from the
// critic), env 1 terminates after 2 steps. Dimensions are arbitrary.
EpisodeBatch synthetic_batch(uint64_t seed, int n_actions = 3, int obs_dim = 2,
                             int state_dim = 3) {
  Rng rng(seed);
  EpisodeBatch b;
  b.T = 3;
  b.n_envs = 2;
  b.n_agents = 2;
  b.n_actions = n_actions;
  b.obs_dim = obs_dim;
  b.state_dim = state_dim;
  int rows = b.rows();
  b.obs.resize(static_cast<size_t>(b.T + 1) * rows * obs_dim);
  for (double& v : b.obs) v = rng.uniform(-1.0, 1.0);
  b.state.resize(static_cast<size_t>(b.T + 1) * b.n_envs * state_dim);
  for (double& v : b.state) v = rng.uniform(-1.0, 1.0);
  b.avail.assign(static_cast<size_t>(b.T + 1) * rows * n_actions, 1);
  b.actions.resize(static_cast<size_t>(b.T + 1) * rows);
  for (int& u : b.actions) u = rng.uniform_int(n_actions);
  b.rewards.resize(static_cast<size_t>(b.T) * b.n_envs);
  for (double& r : b.rewards) r = rng.uniform(-1.0, 1.0);
  b.filled = {1, 1, 1, 1, 1, 0};      // time-major [t][env]
  b.terminated = {0, 0, 0, 1, 0, 0};  // env 1 terminates at t=1
  b.log_probs.assign(static_cast<size_t>(b.T) * rows, 0.0);
  b.local_values.assign(static_cast<size_t>(b.T + 1) * rows, 0.0);
  b.lengths = {3, 2};
  // Mask one non-taken action on a couple of live rows to exercise the mask.
  b.avail[b.avail_at(0, 0, 0) + (b.actions[b.agent_at(0, 0, 0)] + 1) % n_actions] = 0;
  b.avail[b.avail_at(1, 1, 1) + (b.actions[b.agent_at(1, 1, 1)] + 1) % n_actions] = 0;
  return b;
}

TEST(Algo, ParseAndNameRoundTrip) {
  const char* names[] = {"iac", "vdac_sum", "vdac_mix", "vdac_mix_linear", "naive_critic", "coma"};
  for (const char* n : names) EXPECT_STREQ(algo_name(parse_algo(n)), n);
  EXPECT_THROW(parse_algo("qmix"), std::invalid_argument);
}

TEST(Rollout, ClimbEpisodesHaveLengthOne) {
  TrainConfig cfg = climb_config(Algo::VdacSum);
  RolloutContext ctx = RolloutContext::create(cfg.env, 4, 7);
  ActorNet actor = ActorNet::create(1, 3, 2, 8, 3);
  EpisodeBatch b = rollout(actor, ctx);
  EXPECT_EQ(b.T, 1);
  EXPECT_EQ(b.lengths, (std::vector<int>{1, 1, 1, 1}));
  EXPECT_EQ(b.total_steps(), 4);
  for (int e = 0; e < 4; ++e) {
    EXPECT_EQ(b.terminated[b.env_at(0, e)], 1);
    EXPECT_DOUBLE_EQ(b.filled[b.env_at(0, e)], 1.0);
  }
}

TEST(Rollout, ForcedCaptureRewardAtStepZero) {
  PursuitGridSpec spec;
  RolloutContext ctx;
  // All hunters adjacent to the prey, so tag is available everywhere and the
  // tag-biased actor captures immediately.
  ctx.envs.push_back(std::make_unique<FixedLayoutEnv>(
      spec, std::vector<Cell>{{2, 3}, {4, 3}, {3, 2}}, Cell{3, 3}));
  ctx.rngs.emplace_back(derive_stream_seed(1, 100));
  ActorNet actor = biased_actor(*ctx.envs[0], kTag);
  EpisodeBatch b = rollout(actor, ctx);
  EXPECT_EQ(b.T, 1);
  EXPECT_NEAR(b.rewards[0], 9.95, 1e-12);
  EXPECT_EQ(b.terminated[0], 1);
  EXPECT_EQ(b.lengths, (std::vector<int>{1}));
}

TEST(Rollout, TruncatedEpisodesKeepTerminatedZero) {
  PursuitGridSpec spec;
  spec.episode_limit = 3;
  RolloutContext ctx;
  ctx.envs.push_back(std::make_unique<FixedLayoutEnv>(
      spec, std::vector<Cell>{{0, 0}, {0, 6}, {6, 0}}, Cell{6, 6}));
  ctx.rngs.emplace_back(derive_stream_seed(1, 100));
  ActorNet actor = biased_actor(*ctx.envs[0], kStay);
  EpisodeBatch b = rollout(actor, ctx);
  EXPECT_EQ(b.T, 3);
  EXPECT_EQ(b.lengths, (std::vector<int>{3}));
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(b.terminated[b.env_at(t, 0)], 0);
    EXPECT_DOUBLE_EQ(b.filled[b.env_at(t, 0)], 1.0);
  }
}

TEST(Rollout, IdenticalSeedsGiveIdenticalBatches) {
  EnvConfig env;
  env.name = "pursuit7";
  ActorNet actor = ActorNet::create(11, 6, 3, 16, 5);
  RolloutContext a = RolloutContext::create(env, 3, 21);
  RolloutContext b = RolloutContext::create(env, 3, 21);
  EpisodeBatch ba = rollout(actor, a), bb = rollout(actor, b);
  EXPECT_EQ(ba.obs, bb.obs);
  EXPECT_EQ(ba.state, bb.state);
  EXPECT_EQ(ba.actions, bb.actions);
  EXPECT_EQ(ba.rewards, bb.rewards);
  EXPECT_EQ(ba.log_probs, bb.log_probs);
  EXPECT_EQ(ba.lengths, bb.lengths);

  RolloutContext c = RolloutContext::create(env, 3, 22);
  EpisodeBatch bc = rollout(actor, c);
  EXPECT_NE(ba.state, bc.state);
}

TEST(Rollout, UnrollReproducesRolloutNumbersBitExactly) {
  EnvConfig env;
  env.name = "pursuit7";
  ActorNet actor = ActorNet::create(11, 6, 3, 16, 31);
  RolloutContext ctx = RolloutContext::create(env, 2, 33);
  EpisodeBatch b = rollout(actor, ctx);
  UnrollResult u = unroll_policy_values(actor, b);
  EXPECT_EQ(u.values, b.local_values);
  for (int t = 0; t < b.T; ++t) {
    for (int e = 0; e < b.n_envs; ++e) {
      if (b.filled[b.env_at(t, e)] == 0.0) continue;
      for (int a = 0; a < b.n_agents; ++a) {
        int taken = b.actions[b.agent_at(t, e, a)];
        double p = u.probs[b.agent_at(t, e, a) * static_cast<size_t>(b.n_actions) + taken];
        EXPECT_EQ(std::log(p), b.log_probs[b.agent_at(t, e, a)]);
      }
    }
  }
}

TEST(NstepTargets, HandExampleWithBootstrap) {
  std::vector<double> rewards = {1, 1, 1};
  std::vector<double> values = {0, 0, 0, 10};
  std::vector<double> filled = {1, 1, 1};
  std::vector<double> y = nstep_targets(rewards, values, 0.99, filled, 3, 1);
  EXPECT_NEAR(y[0], 12.673090, 1e-6);
  EXPECT_NEAR(y[0], 1 + 0.99 + 0.9801 + 0.970299 * 10, 1e-12);
  EXPECT_NEAR(y[1], 1 + 0.99 + 0.9801 * 10, 1e-12);
  EXPECT_NEAR(y[2], 1 + 0.99 * 10, 1e-12);
}

TEST(NstepTargets, TerminalStepHasNoBootstrap) {
  // The caller zeroes the bootstrap entry at a true terminal.
  std::vector<double> y = nstep_targets({5}, {0, 0}, 0.99, {1}, 1, 1);
  EXPECT_DOUBLE_EQ(y[0], 5.0);
}

TEST(NstepTargets, GammaZeroIsMyopic) {
  std::vector<double> y = nstep_targets({2, -3, 4}, {9, 9, 9, 9}, 0.0, {1, 1, 1}, 3, 1);
  EXPECT_DOUBLE_EQ(y[0], 2.0);
  EXPECT_DOUBLE_EQ(y[1], -3.0);
  EXPECT_DOUBLE_EQ(y[2], 4.0);
}

TEST(NstepTargets, SizeValidation) {
  EXPECT_THROW(nstep_targets({1, 2}, {0, 0, 0}, 0.9, {1, 1, 1}, 3, 1), std::invalid_argument);
  EXPECT_THROW(nstep_targets({1, 2, 3}, {0, 0}, 0.9, {1, 1, 1}, 3, 1), std::invalid_argument);
  EXPECT_THROW(lambda_targets({1}, {0}, 0.9, 0.8, {1}, 1, 1), std::invalid_argument);
}

TEST(LambdaTargets, LimitsAreExact) {
  Rng rng(3);
  for (int it = 0; it < 50; ++it) {
    int T = 1 + rng.uniform_int(6);
    int rows = 1 + rng.uniform_int(3);
    std::vector<double> rewards(static_cast<size_t>(T) * rows), filled(rewards.size(), 0.0);
    std::vector<double> values(static_cast<size_t>(T + 1) * rows);
    for (double& r : rewards) r = rng.uniform(-2.0, 2.0);
    for (double& v : values) v = rng.uniform(-2.0, 2.0);
    for (int r = 0; r < rows; ++r) {
      int len = 1 + rng.uniform_int(T);
      for (int t = 0; t < len; ++t) filled[static_cast<size_t>(t) * rows + r] = 1.0;
    }
    double gamma = rng.uniform(0.5, 1.0);
    std::vector<double> one_step(static_cast<size_t>(T) * rows);
    for (int t = 0; t < T; ++t)
      for (int r = 0; r < rows; ++r) {
        size_t i = static_cast<size_t>(t) * rows + r;
        // Padding rows stay zero, matching the targets' contract.
        one_step[i] = filled[i] > 0.0 ? rewards[i] + gamma * values[i + rows] : 0.0;
      }
    EXPECT_EQ(lambda_targets(rewards, values, gamma, 0.0, filled, T, rows), one_step);
    EXPECT_EQ(lambda_targets(rewards, values, gamma, 1.0, filled, T, rows),
              nstep_targets(rewards, values, gamma, filled, T, rows));
  }
}

TEST(LambdaTargets, ForwardWeightedSumOracle) {
  // Single 3-step stream, bootstrap from values[3].
  std::vector<double> rewards = {1.0, -0.5, 2.0};
  std::vector<double> values = {0.3, 0.7, -0.2, 0.9};
  std::vector<double> filled = {1, 1, 1};
  double gamma = 0.9, lambda = 0.8;
  std::vector<double> got = lambda_targets(rewards, values, gamma, lambda, filled, 3, 1);
  auto nstep_return = [&](int t, int n) {
    double acc = 0.0, g = 1.0;
    for (int i = 0; i < n; ++i) {
      acc += g * rewards[t + i];
      g *= gamma;
    }
    return acc + g * values[t + n];
  };
  for (int t = 0; t < 3; ++t) {
    int horizon = 3 - t;
    double expect = 0.0;
    for (int n = 1; n < horizon; ++n)
      expect += (1 - lambda) * std::pow(lambda, n - 1) * nstep_return(t, n);
    expect += std::pow(lambda, horizon - 1) * nstep_return(t, horizon);
    EXPECT_NEAR(got[t], expect, 1e-12);
  }
}

TEST(TdAdvantage, Subtraction) {
  EXPECT_EQ(td_advantage({2.0}, {0.5}), (std::vector<double>{1.5}));
  EXPECT_EQ(td_advantage({1.0, -1.0}, {1.0, -1.0}), (std::vector<double>{0.0, 0.0}));
  EXPECT_THROW(td_advantage({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(AlgoNets, CreateWiresPerAlgorithmParts) {
  for (Algo algo : {Algo::Iac, Algo::VdacSum, Algo::VdacMix, Algo::VdacMixLinear,
                    Algo::NaiveCritic, Algo::Coma}) {
    AlgoNets nets = make_nets(climb_config(algo));
    EXPECT_EQ(nets.algo, algo);
    bool mixer = algo == Algo::VdacMix || algo == Algo::VdacMixLinear;
    EXPECT_EQ(nets.mixer.has_value(), mixer);
    EXPECT_EQ(nets.central.has_value(), algo == Algo::NaiveCritic);
    EXPECT_EQ(nets.coma.has_value(), algo == Algo::Coma);
    EXPECT_EQ(nets.has_target(), algo == Algo::NaiveCritic || algo == Algo::Coma);
    if (algo == Algo::Iac || algo == Algo::VdacSum)
      EXPECT_EQ(nets.critic_params.count(), 0);
    else
      EXPECT_GT(nets.critic_params.count(), 0);
  }
}

TEST(Targets, IacIsPerAgentOthersPerEnv) {
  EpisodeBatch b = synthetic_batch(5);
  TrainConfig cfg = climb_config(Algo::Iac);
  cfg.env.name = "climb";  // nets built from batch dims below, not the env
  AlgoNets iac = AlgoNets::create(cfg, b.obs_dim, b.state_dim, b.n_agents, b.n_actions, 8);
  TargetData td = compute_targets(cfg, iac, b);
  EXPECT_TRUE(td.per_agent);
  EXPECT_EQ(td.y.size(), static_cast<size_t>(b.T) * b.n_envs * b.n_agents);

  cfg.algorithm = Algo::VdacSum;
  AlgoNets vs = AlgoNets::create(cfg, b.obs_dim, b.state_dim, b.n_agents, b.n_actions, 8);
  TargetData td2 = compute_targets(cfg, vs, b);
  EXPECT_FALSE(td2.per_agent);
  EXPECT_EQ(td2.y.size(), static_cast<size_t>(b.T) * b.n_envs);
  EXPECT_EQ(td2.advantage.size(), static_cast<size_t>(b.T) * b.n_envs * b.n_agents);
}

TEST(PolicyLoss, ClosedFormAtHalfProbability) {
  // Single climb-shaped step, two agents, third action masked, zero actor:
  // pi(u) = 0.5, advantage 1 => loss = -log 0.5.
  EpisodeBatch b;
  b.T = 1;
  b.n_envs = 1;
  b.n_agents = 2;
  b.n_actions = 3;
  b.obs_dim = 1;
  b.state_dim = 2;
  b.obs = {1, 1, 1, 1};
  b.state = {1, 1, 1, 1};
  b.avail = {1, 1, 0, 1, 1, 0, 1, 1, 1, 1, 1, 1};
  b.actions = {0, 1, 0, 0};
  b.rewards = {11};
  b.terminated = {1};
  b.filled = {1};
  b.log_probs = {std::log(0.5), std::log(0.5)};
  b.local_values = {0, 0, 0, 0};
  b.lengths = {1};

  TrainConfig cfg = climb_config(Algo::VdacSum);
  AlgoNets nets = AlgoNets::create(cfg, 1, 2, 2, 3, 8);
  zero_params(nets.actor.params);
  TargetData td;
  td.per_agent = false;
  td.y = {1.0};
  td.advantage = {1.0, 1.0};
  td.mean_advantage = 1.0;
  LossBundle lb = build_losses(cfg, nets, b, td);
  EXPECT_NEAR(lb.policy.item(), -std::log(0.5), 1e-12);
  EXPECT_NEAR(lb.policy.item(), 0.693147, 1e-6);

  // Zero advantage zeroes the loss and its gradient.
  TargetData zero = td;
  zero.advantage = {0.0, 0.0};
  zero.mean_advantage = 0.0;
  LossBundle lz = build_losses(cfg, nets, b, zero);
  EXPECT_DOUBLE_EQ(lz.policy.item(), 0.0);
  backward(lz.policy);
  for (const auto& g : collect_grads(nets.actor.params))
    for (double v : g) EXPECT_DOUBLE_EQ(v, 0.0);

  // Value loss (y - V_tot)^2: bias the value head to 0.5 per agent so
  // V_tot = 1; y = 3 gives 4, y = V_tot gives 0.
  nets.actor.value_head.bias.values_mut()[0] = 0.5;
  TargetData vt = td;
  vt.y = {3.0};
  LossBundle lv = build_losses(cfg, nets, b, vt);
  EXPECT_NEAR(lv.value.item(), 4.0, 1e-12);
  vt.y = {1.0};
  LossBundle lv0 = build_losses(cfg, nets, b, vt);
  EXPECT_NEAR(lv0.value.item(), 0.0, 1e-15);
}

// The advantage enters the policy loss as a constant: critic parameters get
// no gradient from it.
TEST(Losses, PolicyLossIndependentOfCriticParameters) {
  for (Algo algo : {Algo::VdacMix, Algo::NaiveCritic, Algo::Coma}) {
    EpisodeBatch b = synthetic_batch(11);
    TrainConfig cfg = climb_config(algo);
    AlgoNets nets = AlgoNets::create(cfg, b.obs_dim, b.state_dim, b.n_agents, b.n_actions, 8);
    TargetData td = compute_targets(cfg, nets, b);
    LossBundle lb = build_losses(cfg, nets, b, td);
    backward(lb.policy);
    for (const auto& g : collect_grads(nets.critic_params))
      for (double v : g) EXPECT_DOUBLE_EQ(v, 0.0) << algo_name(algo);
  }
}

TEST(Losses, ValueGradientFlowsToActorAndMixer) {
  EpisodeBatch b = synthetic_batch(13);
  TrainConfig cfg = climb_config(Algo::VdacMix);
  AlgoNets nets = AlgoNets::create(cfg, b.obs_dim, b.state_dim, b.n_agents, b.n_actions, 8);
  TargetData td = compute_targets(cfg, nets, b);
  LossBundle lb = build_losses(cfg, nets, b, td);
  backward(lb.value);
  auto norm = [](const std::vector<std::vector<double>>& gs) {
    double sq = 0.0;
    for (const auto& g : gs)
      for (double v : g) sq += v * v;
    return std::sqrt(sq);
  };
  // Alg. 3 pushes the mixer loss through both the hypernetworks and the
  // shared actor body via the local values.
  EXPECT_GT(norm(collect_grads(nets.actor.params)), 0.0);
  EXPECT_GT(norm(collect_grads(nets.critic_params)), 0.0);
}

TEST(Losses, PaddingContributesNothing) {
  for (Algo algo : {Algo::VdacMix, Algo::Coma, Algo::NaiveCritic, Algo::Iac}) {
    EpisodeBatch b = synthetic_batch(17);
    TrainConfig cfg = climb_config(algo);
    AlgoNets nets = AlgoNets::create(cfg, b.obs_dim, b.state_dim, b.n_agents, b.n_actions, 8);
    TargetData td = compute_targets(cfg, nets, b);
    LossBundle lb = build_losses(cfg, nets, b, td);

    // Rewrite everything strictly past env 1's episode: row 3 inputs and the
    // t=2 transition (filled = 0). Losses must not move by a single bit.
    EpisodeBatch m = b;
    Rng rng(99);
    for (int a = 0; a < m.n_agents; ++a) {
      for (int i = 0; i < m.obs_dim; ++i)
        m.obs[m.obs_at(3, 1, a) + i] = rng.uniform(-9.0, 9.0);
      m.actions[m.agent_at(3, 1, a)] = rng.uniform_int(m.n_actions);
    }
    for (int i = 0; i < m.state_dim; ++i) m.state[m.state_at(3, 1) + i] = rng.uniform(-9.0, 9.0);
    m.rewards[m.env_at(2, 1)] = 1234.5;
    TargetData tdm = compute_targets(cfg, nets, m);
    LossBundle lbm = build_losses(cfg, nets, m, tdm);
    EXPECT_EQ(lb.policy.item(), lbm.policy.item()) << algo_name(algo);
    EXPECT_EQ(lb.total.item(), lbm.total.item()) << algo_name(algo);
    EXPECT_EQ(td.mean_advantage, tdm.mean_advantage) << algo_name(algo);
  }
}

TEST(TrainStep, ZeroAdvantageLeavesActorUntouched) {
  EpisodeBatch b = synthetic_batch(19);
  TrainConfig cfg = climb_config(Algo::NaiveCritic);
  AlgoNets nets = AlgoNets::create(cfg, b.obs_dim, b.state_dim, b.n_agents, b.n_actions, 8);
  TargetData td;
  td.per_agent = false;
  td.y.assign(static_cast<size_t>(b.T) * b.n_envs, 0.5);
  td.advantage.assign(static_cast<size_t>(b.T) * b.n_envs * b.n_agents, 0.0);
  LossBundle lb = build_losses(cfg, nets, b, td);
  backward(lb.total);
  for (const auto& g : collect_grads(nets.actor.params))
    for (double v : g) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(TrainStep, OverfitsOneBatch) {
  TrainConfig cfg = climb_config(Algo::VdacMix, 3);
  AlgoNets nets = make_nets(cfg);
  RolloutContext ctx = RolloutContext::create(cfg.env, 8, cfg.seed);
  EpisodeBatch b = rollout(nets.actor, ctx);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 50; ++i) {
    TrainStats ts = train_step(cfg, nets, b);
    if (i == 0) first = ts.total_loss;
    last = ts.total_loss;
    EXPECT_TRUE(std::isfinite(ts.total_loss));
  }
  EXPECT_LT(last, first);
}

TEST(TrainStep, StatsSchemaPopulated) {
  for (Algo algo : {Algo::NaiveCritic, Algo::Coma}) {
    TrainConfig cfg = climb_config(algo, 5);
    AlgoNets nets = make_nets(cfg);
    RolloutContext ctx = RolloutContext::create(cfg.env, 4, cfg.seed);
    EpisodeBatch b = rollout(nets.actor, ctx);
    TrainStats ts = train_step(cfg, nets, b);
    EXPECT_GT(ts.critic_loss, 0.0) << algo_name(algo);
    EXPECT_TRUE(std::isfinite(ts.mean_advantage)) << algo_name(algo);
    EXPECT_GT(ts.actor_grad_norm, 0.0) << algo_name(algo);
    EXPECT_GT(ts.critic_grad_norm, 0.0) << algo_name(algo);
    EXPECT_FALSE(ts.target_synced);
  }
}

TEST(TrainStep, TargetSyncsAtConfiguredPeriod) {
  TrainConfig cfg = climb_config(Algo::NaiveCritic, 7);
  cfg.target_sync = 3;
  AlgoNets nets = make_nets(cfg);
  RolloutContext ctx = RolloutContext::create(cfg.env, 4, cfg.seed);
  for (int i = 1; i <= 6; ++i) {
    EpisodeBatch b = rollout(nets.actor, ctx);
    TrainStats ts = train_step(cfg, nets, b);
    EXPECT_EQ(ts.target_synced, i % 3 == 0) << "update " << i;
    if (ts.target_synced)
      EXPECT_EQ(nets.central_target->params.snapshot_values(),
                nets.central->params.snapshot_values());
  }
}

TEST(TrainStep, BatchWithNoFilledStepsIsAnError) {
  EpisodeBatch b = synthetic_batch(23);
  b.filled.assign(b.filled.size(), 0.0);
  TrainConfig cfg = climb_config(Algo::VdacSum);
  AlgoNets nets = AlgoNets::create(cfg, b.obs_dim, b.state_dim, b.n_agents, b.n_actions, 8);
  EXPECT_THROW(train_step(cfg, nets, b), std::invalid_argument);
}

// Same seed and config reproduce the same parameters after several updates.
TEST(TrainStep, DeterministicLearningTrajectory) {
  auto run = [](Algo algo) {
    TrainConfig cfg = climb_config(algo, 11);
    AlgoNets nets = make_nets(cfg);
    RolloutContext ctx = RolloutContext::create(cfg.env, 4, cfg.seed);
    for (int i = 0; i < 5; ++i) {
      EpisodeBatch b = rollout(nets.actor, ctx);
      train_step(cfg, nets, b);
    }
    return nets.actor.params.snapshot_values();
  };
  EXPECT_EQ(run(Algo::VdacMix), run(Algo::VdacMix));
  EXPECT_EQ(run(Algo::Coma), run(Algo::Coma));
}

}  // namespace
}  // namespace vdmarl

#include "vdmarl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "vdmarl/rng.hpp"

namespace vdmarl {

namespace {

[[noreturn]] void bad_action(int agent, int action, int step) {
  std::ostringstream os;
  os << "env: agent " << agent << " chose unavailable action " << action << " at step " << step;
  throw std::runtime_error(os.str());
}

void check_joint(const std::vector<int>& joint, int n_agents, int n_actions, int step) {
  if (static_cast<int>(joint.size()) != n_agents) {
    std::ostringstream os;
    os << "env: joint action has " << joint.size() << " entries for " << n_agents << " agents";
    throw std::invalid_argument(os.str());
  }
  for (int a = 0; a < n_agents; ++a)
    if (joint[a] < 0 || joint[a] >= n_actions) bad_action(a, joint[a], step);
}

}  // namespace

ClimbEnv::ClimbEnv(MatrixGameSpec spec) : spec_(std::move(spec)) {
  size_t n = spec_.payoff.size();
  if (n == 0) throw std::invalid_argument("climb: empty payoff table");
  for (const auto& row : spec_.payoff)
    if (row.size() != n) throw std::invalid_argument("climb: payoff table is not square");
}

int ClimbEnv::n_actions() const { return static_cast<int>(spec_.payoff.size()); }

EnvStep ClimbEnv::reset(uint64_t) {
  current_ = EnvStep{};
  current_.observations = {{1.0}, {1.0}};
  current_.state = {1.0, 1.0};
  current_.avail_actions.assign(2, std::vector<uint8_t>(n_actions(), 1));
  live_ = true;
  return current_;
}

EnvStep ClimbEnv::step(const std::vector<int>& joint_action) {
  if (!live_) throw std::runtime_error("env: step before reset");
  if (current_.terminated)
    throw std::runtime_error("env: step after termination at step " +
                             std::to_string(current_.step));
  check_joint(joint_action, 2, n_actions(), current_.step);
  double r = spec_.payoff[joint_action[0]][joint_action[1]];
  double best = optimal_return(spec_);
  current_.reward = r;
  current_.terminated = true;
  current_.truncated = false;
  current_.won = r == best;
  current_.step = 1;
  return current_;
}

std::vector<double> ClimbEnv::observe(int agent_id) const {
  if (agent_id < 0 || agent_id >= 2)
    throw std::invalid_argument("env: bad agent id " + std::to_string(agent_id));
  return {1.0};
}

std::vector<std::vector<double>> ClimbEnv::observations_from_state(
    const std::vector<double>& state) const {
  if (state.size() != 2) throw std::invalid_argument("climb: state must have 2 entries");
  return {{state[0]}, {state[1]}};
}

double optimal_return(const MatrixGameSpec& spec) {
  double best = spec.payoff[0][0];
  for (const auto& row : spec.payoff)
    for (double v : row) best = std::max(best, v);
  return best;
}

namespace {

constexpr int kDx[5] = {0, 0, 1, -1, 0};   // north, south, east, west, stay
constexpr int kDy[5] = {-1, 1, 0, 0, 0};

int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }
int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

bool in_grid(const PursuitGridSpec& spec, Cell c) {
  return c.x >= 0 && c.x < spec.grid && c.y >= 0 && c.y < spec.grid;
}

Cell moved(Cell c, int action) {
  return {c.x + kDx[action], c.y + kDy[action]};
}

}  // namespace

PursuitEnv::PursuitEnv(PursuitGridSpec spec) : spec_(spec) {
  if (spec_.grid < 3) throw std::invalid_argument("pursuit: grid too small");
  if (spec_.n_hunters < 2) throw std::invalid_argument("pursuit: need at least 2 hunters");
  if (spec_.n_hunters + 1 > spec_.grid * spec_.grid)
    throw std::invalid_argument("pursuit: more pieces than cells");
}

std::vector<uint8_t> PursuitEnv::avail_mask(const PursuitGridSpec& spec, Cell hunter, Cell prey) {
  std::vector<uint8_t> m(6, 0);
  for (int a = 0; a < 4; ++a) {
    Cell t = moved(hunter, a);
    // may not enter the prey's cell; capture works by adjacency, not stacking
    if (in_grid(spec, t) && !(t == prey)) m[a] = 1;
  }
  m[kStay] = 1;
  m[kTag] = chebyshev(hunter, prey) == 1 ? 1 : 0;
  return m;
}

PursuitEnv::Transition PursuitEnv::transition(const PursuitGridSpec& spec,
                                              const std::vector<Cell>& hunters, Cell prey,
                                              const std::vector<int>& joint_action) {
  Transition out;
  out.hunters = hunters;
  out.prey = prey;
  bool tagged = false;
  for (size_t i = 0; i < hunters.size(); ++i) {
    int u = joint_action[i];
    if (u < 4) out.hunters[i] = moved(hunters[i], u);
    if (u == kTag) tagged = true;
  }
  int adjacent = 0;
  for (const Cell& h : out.hunters)
    if (chebyshev(h, prey) <= 1) ++adjacent;
  if (tagged && adjacent >= 2) {
    out.captured = true;
    return out;
  }
  // Scripted flee: maximize Manhattan distance to the nearest hunter over the
  // in-grid moves (tag excluded), ties to the lowest action id. 'stay' is
  // always a candidate, so the prey never steps onto an occupied cell.
  int best_action = kStay;
  int best_dist = -1;
  for (int a = 0; a < 5; ++a) {
    Cell t = moved(prey, a);
    if (!in_grid(spec, t)) continue;
    int d = spec.grid * spec.grid;
    for (const Cell& h : out.hunters) d = std::min(d, manhattan(t, h));
    if (d > best_dist) {
      best_dist = d;
      best_action = a;
    }
  }
  out.prey = moved(prey, best_action);
  return out;
}

EnvStep PursuitEnv::reset(uint64_t seed) {
  Rng rng(splitmix64(seed));
  std::vector<int> cells;
  while (static_cast<int>(cells.size()) < spec_.n_hunters + 1) {
    int c = rng.uniform_int(spec_.grid * spec_.grid);
    if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);
  }
  hunters_.resize(spec_.n_hunters);
  for (int i = 0; i < spec_.n_hunters; ++i)
    hunters_[i] = {cells[i] % spec_.grid, cells[i] / spec_.grid};
  prey_ = {cells[spec_.n_hunters] % spec_.grid, cells[spec_.n_hunters] / spec_.grid};
  t_ = 0;
  live_ = true;
  refresh_current();
  return current_;
}

void PursuitEnv::set_layout(const std::vector<Cell>& hunters, Cell prey) {
  if (static_cast<int>(hunters.size()) != spec_.n_hunters)
    throw std::invalid_argument("pursuit: wrong hunter count in layout");
  for (const Cell& h : hunters)
    if (!in_grid(spec_, h) || h == prey) throw std::invalid_argument("pursuit: invalid layout");
  if (!in_grid(spec_, prey)) throw std::invalid_argument("pursuit: prey off grid");
  hunters_ = hunters;
  prey_ = prey;
  t_ = 0;
  live_ = true;
  refresh_current();
}

EnvStep PursuitEnv::step(const std::vector<int>& joint_action) {
  if (!live_) throw std::runtime_error("env: step before reset");
  if (current_.terminated)
    throw std::runtime_error("env: step after termination at step " + std::to_string(t_));
  check_joint(joint_action, spec_.n_hunters, 6, t_);
  for (int a = 0; a < spec_.n_hunters; ++a)
    if (!current_.avail_actions[a][joint_action[a]]) bad_action(a, joint_action[a], t_);

  Transition tr = transition(spec_, hunters_, prey_, joint_action);
  hunters_ = tr.hunters;
  prey_ = tr.prey;
  ++t_;
  refresh_current();
  if (tr.captured) {
    current_.reward = spec_.capture_reward + spec_.step_penalty;
    current_.terminated = true;
    current_.won = true;
  } else {
    current_.reward = spec_.step_penalty;
    if (t_ >= spec_.episode_limit) {
      current_.terminated = true;
      current_.truncated = true;
    }
  }
  return current_;
}

void PursuitEnv::refresh_current() {
  current_ = EnvStep{};
  current_.step = t_;
  current_.observations.resize(spec_.n_hunters);
  current_.avail_actions.resize(spec_.n_hunters);
  for (int a = 0; a < spec_.n_hunters; ++a) {
    current_.observations[a] = observe(a);
    current_.avail_actions[a] = avail_mask(spec_, hunters_[a], prey_);
  }
  double denom = spec_.grid - 1;
  current_.state.clear();
  for (const Cell& h : hunters_) {
    current_.state.push_back(h.x / denom);
    current_.state.push_back(h.y / denom);
  }
  current_.state.push_back(prey_.x / denom);
  current_.state.push_back(prey_.y / denom);
  current_.state.push_back(static_cast<double>(t_) / spec_.episode_limit);
}

std::vector<double> PursuitEnv::observe(int agent_id) const {
  if (agent_id < 0 || agent_id >= spec_.n_hunters)
    throw std::invalid_argument("env: bad agent id " + std::to_string(agent_id));
  Cell own = hunters_[agent_id];
  double denom = spec_.grid - 1;
  std::vector<double> obs;
  obs.reserve(obs_dim());
  obs.push_back(own.x / denom);
  obs.push_back(own.y / denom);
  auto push_block = [&](Cell other) {
    if (chebyshev(own, other) <= spec_.sight_radius) {
      obs.push_back(1.0);
      obs.push_back(static_cast<double>(other.x - own.x));
      obs.push_back(static_cast<double>(other.y - own.y));
    } else {
      obs.insert(obs.end(), {0.0, 0.0, 0.0});
    }
  };
  push_block(prey_);
  for (int other = 0; other < spec_.n_hunters; ++other)
    if (other != agent_id) push_block(hunters_[other]);
  return obs;
}

std::vector<std::vector<double>> PursuitEnv::observations_from_state(
    const std::vector<double>& state) const {
  if (static_cast<int>(state.size()) != state_dim())
    throw std::invalid_argument("pursuit: state has wrong length");
  double denom = spec_.grid - 1;
  auto decode = [&](int i) {
    return Cell{static_cast<int>(std::lround(state[2 * i] * denom)),
                static_cast<int>(std::lround(state[2 * i + 1] * denom))};
  };
  std::vector<Cell> hunters(spec_.n_hunters);
  for (int i = 0; i < spec_.n_hunters; ++i) hunters[i] = decode(i);
  Cell prey = decode(spec_.n_hunters);

  PursuitEnv probe(spec_);
  probe.hunters_ = hunters;
  probe.prey_ = prey;
  std::vector<std::vector<double>> obs(spec_.n_hunters);
  for (int a = 0; a < spec_.n_hunters; ++a) obs[a] = probe.observe(a);
  return obs;
}

namespace {

uint32_t pack_state(const PursuitGridSpec& spec, const std::vector<Cell>& hunters, Cell prey) {
  uint32_t key = 0;
  auto cell_id = [&](Cell c) { return static_cast<uint32_t>(c.y * spec.grid + c.x); };
  for (const Cell& h : hunters) key = key * 64 + cell_id(h);
  return key * 64 + cell_id(prey);
}

}  // namespace

double optimal_return(const PursuitGridSpec& spec, const std::vector<Cell>& hunters, Cell prey) {
  if (spec.grid > 7) throw std::invalid_argument("pursuit: optimal_return supports grids up to 7x7");
  if (spec.n_hunters != 3)
    throw std::invalid_argument("pursuit: optimal_return expects 3 hunters");

  // BFS over joint deterministic dynamics; depth d reaching capture means the
  // episode ends at step d+1 with return 10 - 0.05*(d+1).
  std::vector<uint8_t> visited(1u << 24, 0);
  std::deque<std::pair<uint32_t, int>> frontier;
  auto unpack = [&](uint32_t key) {
    std::vector<Cell> hs(3);
    Cell p{static_cast<int>(key % 64) % spec.grid, static_cast<int>(key % 64) / spec.grid};
    key /= 64;
    for (int i = 2; i >= 0; --i) {
      uint32_t c = key % 64;
      hs[i] = {static_cast<int>(c) % spec.grid, static_cast<int>(c) / spec.grid};
      key /= 64;
    }
    return std::make_pair(hs, p);
  };

  uint32_t start = pack_state(spec, hunters, prey);
  visited[start] = 1;
  frontier.emplace_back(start, 0);
  while (!frontier.empty()) {
    auto [key, depth] = frontier.front();
    frontier.pop_front();
    if (depth >= spec.episode_limit) continue;
    auto [hs, p] = unpack(key);
    std::vector<std::vector<int>> choices(3);
    for (int i = 0; i < 3; ++i) {
      auto mask = PursuitEnv::avail_mask(spec, hs[i], p);
      for (int u = 0; u < 6; ++u)
        if (mask[u]) choices[i].push_back(u);
    }
    std::vector<int> joint(3);
    for (int u0 : choices[0])
      for (int u1 : choices[1])
        for (int u2 : choices[2]) {
          joint = {u0, u1, u2};
          auto tr = PursuitEnv::transition(spec, hs, p, joint);
          if (tr.captured)
            return spec.capture_reward + spec.step_penalty * (depth + 1);
          uint32_t next = pack_state(spec, tr.hunters, tr.prey);
          if (!visited[next]) {
            visited[next] = 1;
            frontier.emplace_back(next, depth + 1);
          }
        }
  }
  return spec.step_penalty * spec.episode_limit;
}

std::unique_ptr<Env> make_env(const EnvConfig& cfg) {
  if (cfg.name == "climb") return std::make_unique<ClimbEnv>(cfg.matrix);
  if (cfg.name == "pursuit7") return std::make_unique<PursuitEnv>(cfg.pursuit);
  throw std::invalid_argument("env: unknown environment '" + cfg.name + "'");
}

}  // namespace vdmarl

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace vdmarl {

// One transition's worth of environment output. The team shares a single
// scalar reward. terminated marks the episode as over for any reason;
// truncated additionally marks ends forced by the step limit, where
// bootstrapping from the critic is still sound. won implies terminated.
struct EnvStep {
  std::vector<std::vector<double>> observations;
  std::vector<double> state;
  std::vector<std::vector<uint8_t>> avail_actions;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  bool won = false;
  int step = 0;
};

// Two-agent single-step matrix game. Default is the climb payoff, whose
// off-diagonal penalties punish unilateral moves toward the best joint action.
struct MatrixGameSpec {
  std::vector<std::vector<double>> payoff = {
      {11.0, -30.0, 0.0},
      {-30.0, 7.0, 6.0},
      {0.0, 0.0, 5.0},
  };
};

// 7x7 pursuit: 3 hunters chase one scripted prey. Actions are
// {north, south, east, west, stay, tag}. Capture needs at least two hunters
// adjacent (Chebyshev distance 1) to the prey with at least one tagging.
struct PursuitGridSpec {
  int grid = 7;
  int n_hunters = 3;
  int sight_radius = 2;
  int episode_limit = 40;
  double step_penalty = -0.05;
  double capture_reward = 10.0;
};

enum PursuitAction { kNorth = 0, kSouth = 1, kEast = 2, kWest = 3, kStay = 4, kTag = 5 };

class Env {
 public:
  virtual ~Env() = default;
  virtual int n_agents() const = 0;
  virtual int n_actions() const = 0;
  virtual int obs_dim() const = 0;
  virtual int state_dim() const = 0;
  virtual int episode_limit() const = 0;
  virtual EnvStep reset(uint64_t seed) = 0;
  virtual EnvStep step(const std::vector<int>& joint_action) = 0;
  virtual std::vector<double> observe(int agent_id) const = 0;
  virtual const EnvStep& current() const = 0;
  // Observations reconstructed from a global state vector alone; checks the
  // centralized-training premise that the state determines every observation.
  virtual std::vector<std::vector<double>> observations_from_state(
      const std::vector<double>& state) const = 0;
};

class ClimbEnv : public Env {
 public:
  explicit ClimbEnv(MatrixGameSpec spec = {});
  int n_agents() const override { return 2; }
  int n_actions() const override;
  int obs_dim() const override { return 1; }
  int state_dim() const override { return 2; }
  int episode_limit() const override { return 1; }
  EnvStep reset(uint64_t seed) override;
  EnvStep step(const std::vector<int>& joint_action) override;
  std::vector<double> observe(int agent_id) const override;
  const EnvStep& current() const override { return current_; }
  std::vector<std::vector<double>> observations_from_state(
      const std::vector<double>& state) const override;
  const MatrixGameSpec& spec() const { return spec_; }

 private:
  MatrixGameSpec spec_;
  EnvStep current_;
  bool live_ = false;
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

class PursuitEnv : public Env {
 public:
  explicit PursuitEnv(PursuitGridSpec spec = {});
  int n_agents() const override { return spec_.n_hunters; }
  int n_actions() const override { return 6; }
  int obs_dim() const override { return 2 + 3 * spec_.n_hunters; }  // own pos + prey/mate blocks
  int state_dim() const override { return 2 * (spec_.n_hunters + 1) + 1; }
  int episode_limit() const override { return spec_.episode_limit; }
  EnvStep reset(uint64_t seed) override;
  EnvStep step(const std::vector<int>& joint_action) override;
  std::vector<double> observe(int agent_id) const override;
  const EnvStep& current() const override { return current_; }
  std::vector<std::vector<double>> observations_from_state(
      const std::vector<double>& state) const override;

  const PursuitGridSpec& spec() const { return spec_; }
  const std::vector<Cell>& hunters() const { return hunters_; }
  Cell prey() const { return prey_; }
  // Places pieces directly; for tests and the BFS oracle.
  void set_layout(const std::vector<Cell>& hunters, Cell prey);

  struct Transition {
    std::vector<Cell> hunters;
    Cell prey;
    bool captured = false;
  };
  // Pure joint dynamics used by both step() and the BFS oracle: hunters move
  // (tag/stay hold position), capture is checked against the pre-flee prey,
  // then the prey flees if uncaptured.
  static Transition transition(const PursuitGridSpec& spec, const std::vector<Cell>& hunters,
                               Cell prey, const std::vector<int>& joint_action);
  static std::vector<uint8_t> avail_mask(const PursuitGridSpec& spec, Cell hunter, Cell prey);

 private:
  void refresh_current();

  PursuitGridSpec spec_;
  std::vector<Cell> hunters_;
  Cell prey_;
  int t_ = 0;
  EnvStep current_;
  bool live_ = false;
};

// Best achievable episode return under centralized control.
double optimal_return(const MatrixGameSpec& spec);
// Joint-space breadth-first search from the given layout; deterministic
// because the prey is scripted. Errors on grids above 7x7.
double optimal_return(const PursuitGridSpec& spec, const std::vector<Cell>& hunters, Cell prey);

struct EnvConfig {
  std::string name = "climb";  // climb | pursuit7
  MatrixGameSpec matrix;
  PursuitGridSpec pursuit;
};

std::unique_ptr<Env> make_env(const EnvConfig& cfg);

}  // namespace vdmarl

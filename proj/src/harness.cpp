#include "vdmarl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vdmarl/params.hpp"

namespace vdmarl {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_error(int line, const std::string& msg) {
  std::ostringstream os;
  os << "config line " << line << ": " << msg;
  throw std::invalid_argument(os.str());
}

double parse_double(const std::string& v, int line) {
  size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    config_error(line, "expected a number, got '" + v + "'");
  }
  if (pos != v.size()) config_error(line, "trailing characters in number '" + v + "'");
  return d;
}

long long parse_int(const std::string& v, int line) {
  size_t pos = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &pos);
  } catch (const std::exception&) {
    config_error(line, "expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) config_error(line, "trailing characters in integer '" + v + "'");
  return n;
}

uint64_t parse_u64(const std::string& v, int line) {
  size_t pos = 0;
  uint64_t n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    config_error(line, "expected an unsigned integer, got '" + v + "'");
  }
  if (pos != v.size()) config_error(line, "trailing characters in integer '" + v + "'");
  return n;
}

void check_ranges(const TrainConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0))
    throw std::invalid_argument("config: gamma must be in (0, 1]");
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0))
    throw std::invalid_argument("config: lambda must be in [0, 1]");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
  if (cfg.entropy_coef < 0.0)
    throw std::invalid_argument("config: entropy_coef must be non-negative");
  if (cfg.n_envs < 1) throw std::invalid_argument("config: n_envs must be at least 1");
  if (cfg.target_sync < 1) throw std::invalid_argument("config: target_sync must be at least 1");
  if (cfg.t_max < 1) throw std::invalid_argument("config: t_max must be at least 1");
  if (cfg.eval_interval < 1)
    throw std::invalid_argument("config: eval_interval must be at least 1");
  if (cfg.eval_episodes < 1)
    throw std::invalid_argument("config: eval_episodes must be at least 1");
  if (cfg.hidden_dim < 1) throw std::invalid_argument("config: hidden_dim must be at least 1");
  if (cfg.env.name != "climb" && cfg.env.name != "pursuit7")
    throw std::invalid_argument("config: env.name must be climb or pursuit7");
}

std::string iso_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  nlohmann::json env;
  env["name"] = cfg.env.name;
  env["payoff"] = cfg.env.matrix.payoff;
  env["grid"] = cfg.env.pursuit.grid;
  env["sight_radius"] = cfg.env.pursuit.sight_radius;
  env["episode_limit"] = cfg.env.pursuit.episode_limit;
  env["step_penalty"] = cfg.env.pursuit.step_penalty;
  env["capture_reward"] = cfg.env.pursuit.capture_reward;

  nlohmann::json j;
  j["algorithm"] = algo_name(cfg.algorithm);
  j["gamma"] = cfg.gamma;
  j["lambda"] = cfg.lambda;
  j["lr"] = cfg.lr;
  j["alpha_pi"] = cfg.alpha_pi;
  j["alpha_v"] = cfg.alpha_v;
  j["entropy_coef"] = cfg.entropy_coef;
  j["grad_clip"] = cfg.grad_clip;
  j["n_envs"] = cfg.n_envs;
  j["target_sync"] = cfg.target_sync;
  j["t_max"] = cfg.t_max;
  j["eval_interval"] = cfg.eval_interval;
  j["eval_episodes"] = cfg.eval_episodes;
  j["hidden_dim"] = cfg.hidden_dim;
  j["seed"] = cfg.seed;
  j["env"] = env;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.algorithm = parse_algo(j.at("algorithm").get<std::string>());
  cfg.gamma = j.at("gamma").get<double>();
  cfg.lambda = j.at("lambda").get<double>();
  cfg.lr = j.at("lr").get<double>();
  cfg.alpha_pi = j.at("alpha_pi").get<double>();
  cfg.alpha_v = j.at("alpha_v").get<double>();
  cfg.entropy_coef = j.at("entropy_coef").get<double>();
  cfg.grad_clip = j.at("grad_clip").get<double>();
  cfg.n_envs = j.at("n_envs").get<int>();
  cfg.target_sync = j.at("target_sync").get<int>();
  cfg.t_max = j.at("t_max").get<long>();
  cfg.eval_interval = j.at("eval_interval").get<long>();
  cfg.eval_episodes = j.at("eval_episodes").get<int>();
  cfg.hidden_dim = j.at("hidden_dim").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  const auto& env = j.at("env");
  cfg.env.name = env.at("name").get<std::string>();
  cfg.env.matrix.payoff = env.at("payoff").get<std::vector<std::vector<double>>>();
  cfg.env.pursuit.grid = env.at("grid").get<int>();
  cfg.env.pursuit.sight_radius = env.at("sight_radius").get<int>();
  cfg.env.pursuit.episode_limit = env.at("episode_limit").get<int>();
  cfg.env.pursuit.step_penalty = env.at("step_penalty").get<double>();
  cfg.env.pursuit.capture_reward = env.at("capture_reward").get<double>();
  return cfg;
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      config_error(line_no, "expected 'key = value', got '" + trim(raw) + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) config_error(line_no, "empty key");
    if (value.empty()) config_error(line_no, "empty value for key '" + key + "'");

    if (key == "algorithm") {
      try {
        cfg.algorithm = parse_algo(value);
      } catch (const std::exception& e) {
        config_error(line_no, e.what());
      }
    } else if (key == "gamma") {
      cfg.gamma = parse_double(value, line_no);
    } else if (key == "lambda") {
      cfg.lambda = parse_double(value, line_no);
    } else if (key == "lr") {
      cfg.lr = parse_double(value, line_no);
    } else if (key == "alpha_pi") {
      cfg.alpha_pi = parse_double(value, line_no);
      if (cfg.alpha_pi <= 0.0) config_error(line_no, "alpha_pi must be positive");
    } else if (key == "alpha_v") {
      cfg.alpha_v = parse_double(value, line_no);
      if (cfg.alpha_v <= 0.0) config_error(line_no, "alpha_v must be positive");
    } else if (key == "entropy_coef") {
      cfg.entropy_coef = parse_double(value, line_no);
    } else if (key == "grad_clip") {
      cfg.grad_clip = parse_double(value, line_no);
    } else if (key == "n_envs") {
      cfg.n_envs = static_cast<int>(parse_int(value, line_no));
    } else if (key == "target_sync") {
      cfg.target_sync = static_cast<int>(parse_int(value, line_no));
    } else if (key == "t_max") {
      cfg.t_max = static_cast<long>(parse_int(value, line_no));
    } else if (key == "eval_interval") {
      cfg.eval_interval = static_cast<long>(parse_int(value, line_no));
    } else if (key == "eval_episodes") {
      cfg.eval_episodes = static_cast<int>(parse_int(value, line_no));
    } else if (key == "hidden_dim") {
      cfg.hidden_dim = static_cast<int>(parse_int(value, line_no));
    } else if (key == "seed") {
      cfg.seed = parse_u64(value, line_no);
    } else if (key == "env.name") {
      cfg.env.name = value;
    } else if (key == "env.grid") {
      cfg.env.pursuit.grid = static_cast<int>(parse_int(value, line_no));
    } else if (key == "env.sight_radius") {
      cfg.env.pursuit.sight_radius = static_cast<int>(parse_int(value, line_no));
    } else if (key == "env.episode_limit") {
      cfg.env.pursuit.episode_limit = static_cast<int>(parse_int(value, line_no));
    } else if (key == "env.step_penalty") {
      cfg.env.pursuit.step_penalty = parse_double(value, line_no);
    } else if (key == "env.capture_reward") {
      cfg.env.pursuit.capture_reward = parse_double(value, line_no);
    } else {
      config_error(line_no, "unknown key '" + key + "'");
    }
  }
  check_ranges(cfg);
  return cfg;
}

TrainConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

EvalRecord evaluate(const ActorNet& actor, const EnvConfig& env_cfg, int episodes,
                    uint64_t seed) {
  if (episodes <= 0) throw std::invalid_argument("evaluate: episodes must be positive");
  NoGradGuard ng;
  auto env = make_env(env_cfg);
  int n = env->n_agents(), u = env->n_actions();
  if (n != actor.n_agents || u != actor.n_actions || env->obs_dim() != actor.obs_dim)
    throw std::invalid_argument("evaluate: actor and environment dimensions disagree");
  Rng rng(seed);
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);

  double wins = 0.0, ret_sum = 0.0, len_sum = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    EnvStep s = env->reset(rng.next_u64());
    Tensor hidden = initial_hidden(actor, n);
    std::vector<int> prev(n, -1);
    double ret = 0.0;
    int len = 0;
    bool won = false;
    int guard = env->episode_limit() + 1;
    while (!s.terminated) {
      if (--guard < 0)
        throw std::runtime_error("evaluate: episode exceeded the declared limit");
      std::vector<double> obs;
      obs.reserve(static_cast<size_t>(n) * actor.obs_dim);
      std::vector<uint8_t> avail;
      avail.reserve(static_cast<size_t>(n) * u);
      for (int a = 0; a < n; ++a) {
        obs.insert(obs.end(), s.observations[a].begin(), s.observations[a].end());
        avail.insert(avail.end(), s.avail_actions[a].begin(), s.avail_actions[a].end());
      }
      PolicyOutput out =
          actor_forward_flat(actor, obs.data(), prev.data(), ids.data(), hidden, avail.data(), n);
      hidden = out.hidden;
      auto probs = out.probs.values();
      std::vector<int> joint(n);
      for (int a = 0; a < n; ++a)
        joint[a] = greedy_action(probs.subspan(static_cast<size_t>(a) * u, u));
      s = env->step(joint);
      ret += s.reward;
      ++len;
      won = s.won;
      prev = joint;
    }
    wins += won ? 1.0 : 0.0;
    ret_sum += ret;
    len_sum += len;
  }
  EvalRecord r;
  r.win_rate = wins / episodes;
  r.mean_return = ret_sum / episodes;
  r.episode_len_mean = len_sum / episodes;
  return r;
}

void emit_csv(const std::vector<EvalRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "'");
  out << "t_env,win_rate,mean_return,episode_len_mean\n";
  char buf[160];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f,%.6f\n", r.t_env, r.win_rate, r.mean_return,
                  r.episode_len_mean);
    out << buf;
  }
  out.flush();
  if (!out) throw std::runtime_error("emit_csv: write failed for '" + path + "'");
}

namespace {

double csv_field_double(const std::string& field, const std::string& path, int line) {
  size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(field, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != field.size()) {
    std::ostringstream os;
    os << path << " line " << line << ": bad number '" << field << "'";
    throw std::runtime_error(os.str());
  }
  return d;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<EvalRecord> read_eval_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_eval_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (trim(line) != "t_env,win_rate,mean_return,episode_len_mean")
    throw std::runtime_error(path + ": unexpected header '" + trim(line) + "'");
  std::vector<EvalRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_csv(trim(line));
    if (f.size() != 4) {
      std::ostringstream os;
      os << path << " line " << line_no << ": expected 4 fields, got " << f.size();
      throw std::runtime_error(os.str());
    }
    EvalRecord r;
    r.t_env = static_cast<long>(csv_field_double(f[0], path, line_no));
    r.win_rate = csv_field_double(f[1], path, line_no);
    r.mean_return = csv_field_double(f[2], path, line_no);
    r.episode_len_mean = csv_field_double(f[3], path, line_no);
    out.push_back(r);
  }
  return out;
}

double percentile_nearest_rank(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("percentile: empty sample");
  if (p < 0.0 || p > 100.0) throw std::invalid_argument("percentile: p outside [0, 100]");
  std::sort(v.begin(), v.end());
  long rank = static_cast<long>(std::ceil(p * static_cast<double>(v.size()) / 100.0));
  if (rank < 1) rank = 1;
  if (rank > static_cast<long>(v.size())) rank = static_cast<long>(v.size());
  return v[rank - 1];
}

std::vector<AggregateRow> aggregate_runs(const std::vector<std::string>& eval_files) {
  if (eval_files.size() < 2)
    throw std::invalid_argument("aggregate: need at least two runs");
  std::vector<std::vector<EvalRecord>> runs;
  runs.reserve(eval_files.size());
  for (const auto& f : eval_files) runs.push_back(read_eval_csv(f));
  size_t n = runs[0].size();
  for (size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].size() != n)
      throw std::runtime_error("aggregate: misaligned t_env grids: '" + eval_files[i] +
                               "' has a different record count");
    for (size_t k = 0; k < n; ++k)
      if (runs[i][k].t_env != runs[0][k].t_env) {
        std::ostringstream os;
        os << "aggregate: misaligned t_env grids at row " << k << ": '" << eval_files[i]
           << "' has " << runs[i][k].t_env << ", expected " << runs[0][k].t_env;
        throw std::runtime_error(os.str());
      }
  }
  std::vector<AggregateRow> rows(n);
  std::vector<double> win(runs.size()), ret(runs.size()), len(runs.size());
  for (size_t k = 0; k < n; ++k) {
    for (size_t i = 0; i < runs.size(); ++i) {
      win[i] = runs[i][k].win_rate;
      ret[i] = runs[i][k].mean_return;
      len[i] = runs[i][k].episode_len_mean;
    }
    rows[k].t_env = runs[0][k].t_env;
    rows[k].win_rate = percentile_nearest_rank(win, 50.0);
    rows[k].mean_return = percentile_nearest_rank(ret, 50.0);
    rows[k].episode_len_mean = percentile_nearest_rank(len, 50.0);
    rows[k].win_rate_p25 = percentile_nearest_rank(win, 25.0);
    rows[k].win_rate_p75 = percentile_nearest_rank(win, 75.0);
  }
  return rows;
}

void emit_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_aggregate_csv: cannot open '" + path + "'");
  out << "t_env,win_rate,mean_return,episode_len_mean,win_rate_p25,win_rate_p75\n";
  char buf[240];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.t_env, r.win_rate,
                  r.mean_return, r.episode_len_mean, r.win_rate_p25, r.win_rate_p75);
    out << buf;
  }
  out.flush();
  if (!out) throw std::runtime_error("emit_aggregate_csv: write failed for '" + path + "'");
}

void write_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::json j;
  j["version"] = m.version;
  j["started_at"] = m.started_at;
  j["seed"] = m.seed;
  j["stats_file"] = m.stats_file;
  j["eval_file"] = m.eval_file;
  j["checkpoint_file"] = m.checkpoint_file;
  j["config"] = config_to_json(m.config);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("manifest: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
  out.flush();
  if (!out) throw std::runtime_error("manifest: write failed for '" + path + "'");
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open '" + path + "'");
  RunManifest m;
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    m.version = j.at("version").get<std::string>();
    m.started_at = j.at("started_at").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.stats_file = j.at("stats_file").get<std::string>();
    m.eval_file = j.at("eval_file").get<std::string>();
    m.checkpoint_file = j.at("checkpoint_file").get<std::string>();
    m.config = config_from_json(j.at("config"));
  } catch (const std::exception& e) {
    throw std::runtime_error("manifest '" + path + "': " + e.what());
  }
  return m;
}

RunResult run_training(const TrainConfig& cfg, const std::string& out_dir) {
  check_ranges(cfg);
  auto probe = make_env(cfg.env);
  AlgoNets nets = AlgoNets::create(cfg, probe->obs_dim(), probe->state_dim(), probe->n_agents(),
                                   probe->n_actions(), cfg.hidden_dim);
  RolloutContext ctx = RolloutContext::create(cfg.env, cfg.n_envs, cfg.seed);

  bool writing = !out_dir.empty();
  std::ofstream stats;
  if (writing) {
    std::filesystem::create_directories(out_dir);
    RunManifest manifest;
    manifest.version = kVersion;
    manifest.started_at = iso_utc_now();
    manifest.seed = cfg.seed;
    manifest.stats_file = "stats.csv";
    manifest.eval_file = "eval.csv";
    manifest.checkpoint_file = "checkpoint.bin";
    manifest.config = cfg;
    write_manifest(manifest, out_dir + "/manifest.json");
    stats.open(out_dir + "/stats.csv", std::ios::binary);
    if (!stats) throw std::runtime_error("run: cannot open stats file in '" + out_dir + "'");
    stats << "update,t_env,total_loss,policy_loss,critic_loss,entropy,mean_advantage,"
             "actor_grad_norm,critic_grad_norm,target_synced\n";
  }

  RunResult result;
  int eval_idx = 0;
  auto run_eval = [&](long label) {
    EvalRecord rec = evaluate(nets.actor, cfg.env, cfg.eval_episodes,
                              derive_stream_seed(cfg.seed, 500 + eval_idx));
    ++eval_idx;
    rec.t_env = label;
    result.records.push_back(rec);
  };
  run_eval(0);
  long next_eval = cfg.eval_interval;

  while (result.t_env < cfg.t_max) {
    EpisodeBatch batch = rollout(nets.actor, ctx);
    TrainStats ts = train_step(cfg, nets, batch);
    result.t_env += batch.total_steps();
    ++result.updates;
    if (writing) {
      char buf[360];
      std::snprintf(buf, sizeof buf, "%ld,%ld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n",
                    result.updates, result.t_env, ts.total_loss, ts.policy_loss, ts.critic_loss,
                    ts.entropy, ts.mean_advantage, ts.actor_grad_norm, ts.critic_grad_norm,
                    ts.target_synced ? 1 : 0);
      stats << buf;
    }
    while (next_eval <= result.t_env && next_eval <= cfg.t_max) {
      run_eval(next_eval);
      next_eval += cfg.eval_interval;
    }
  }

  if (writing) {
    stats.flush();
    if (!stats) throw std::runtime_error("run: stats write failed in '" + out_dir + "'");
    emit_csv(result.records, out_dir + "/eval.csv");
    ParameterSet all;
    all.adopt(nets.actor.params, "");
    all.adopt(nets.critic_params, "");
    save_checkpoint(all, out_dir + "/checkpoint.bin");
  }
  return result;
}

AlgoNets load_run(const std::string& checkpoint_path, TrainConfig* cfg_out) {
  std::filesystem::path cp(checkpoint_path);
  RunManifest m = read_manifest((cp.parent_path() / "manifest.json").string());
  auto probe = make_env(m.config.env);
  AlgoNets nets = AlgoNets::create(m.config, probe->obs_dim(), probe->state_dim(),
                                   probe->n_agents(), probe->n_actions(), m.config.hidden_dim);
  ParameterSet all;
  all.adopt(nets.actor.params, "");
  all.adopt(nets.critic_params, "");
  load_checkpoint(all, checkpoint_path);
  if (cfg_out) *cfg_out = m.config;
  return nets;
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

void check_autodiff() {
  Rng rng(41);
  auto rand_vec = [&](int n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
  };
  ParameterSet params;
  Tensor w1 = params.add("w1", Tensor::param({4, 3}, rand_vec(12)));
  Tensor b1 = params.add("b1", Tensor::param({4}, rand_vec(4)));
  Tensor w2 = params.add("w2", Tensor::param({2, 4}, rand_vec(8)));
  Tensor b2 = params.add("b2", Tensor::param({2}, rand_vec(2)));
  Tensor x = Tensor::of({3, 3}, rand_vec(9));
  auto f = [&]() {
    Tensor h = tanh(affine(x, w1, b1));
    Tensor y = affine(h, w2, b2);
    return sum(mul(y, y));
  };
  GradCheckReport rep = grad_check(f, params, 1e-5);
  std::ostringstream os;
  os << "max rel err " << rep.max_rel_err << " at " << rep.worst_coordinate;
  require(rep.max_rel_err <= 1e-6, os.str());
}

void check_masked_softmax() {
  Rng rng(42);
  int rows = 6, cols = 5;
  std::vector<double> logits(static_cast<size_t>(rows) * cols);
  for (double& v : logits) v = rng.uniform(-4.0, 4.0);
  std::vector<double> mask(static_cast<size_t>(rows) * cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    mask[static_cast<size_t>(r) * cols + rng.uniform_int(cols)] = 1.0;
    for (int c = 0; c < cols; ++c)
      if (rng.uniform() < 0.5) mask[static_cast<size_t>(r) * cols + c] = 1.0;
  }
  Tensor p = softmax(Tensor::of({rows, cols}, logits), Tensor::of({rows, cols}, mask));
  auto pv = p.values();
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) {
      double v = pv[static_cast<size_t>(r) * cols + c];
      if (mask[static_cast<size_t>(r) * cols + c] == 0.0)
        require(v == 0.0, "masked entry got probability mass");
      s += v;
    }
    require(std::abs(s - 1.0) <= 1e-12, "softmax row does not sum to one");
  }
}

void check_return_targets() {
  Rng rng(43);
  int t_len = 7, rows = 3;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> rewards(static_cast<size_t>(t_len) * rows);
    std::vector<double> values(static_cast<size_t>(t_len + 1) * rows);
    std::vector<double> filled(static_cast<size_t>(t_len) * rows, 0.0);
    std::vector<int> lens(rows);
    for (double& r : rewards) r = rng.uniform(-2.0, 2.0);
    for (double& v : values) v = rng.uniform(-2.0, 2.0);
    for (int r = 0; r < rows; ++r) {
      lens[r] = 1 + rng.uniform_int(t_len);
      for (int t = 0; t < lens[r]; ++t) filled[static_cast<size_t>(t) * rows + r] = 1.0;
    }
    double gamma = 0.97;
    auto y = nstep_targets(rewards, values, gamma, filled, t_len, rows);
    auto y_l1 = lambda_targets(rewards, values, gamma, 1.0, filled, t_len, rows);
    require(y == y_l1, "lambda=1 differs from the n-step recursion");
    auto y_l0 = lambda_targets(rewards, values, gamma, 0.0, filled, t_len, rows);
    for (int r = 0; r < rows; ++r)
      for (int t = 0; t < lens[r]; ++t) {
        size_t at = static_cast<size_t>(t) * rows + r;
        double expect = rewards[at] + gamma * values[at + rows];
        require(std::abs(y_l0[at] - expect) <= 1e-12, "lambda=0 is not the one-step target");
      }
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0, disc = 1.0;
      for (int t = 0; t < lens[r]; ++t) {
        acc += disc * rewards[static_cast<size_t>(t) * rows + r];
        disc *= gamma;
      }
      acc += disc * values[static_cast<size_t>(lens[r]) * rows + r];
      require(std::abs(y[r] - acc) <= 1e-12, "n-step target differs from the discounted sum");
    }
  }
}

void check_mixer_monotonic() {
  Rng rng(44);
  int agents = 3, state_dim = 4;
  for (int trial = 0; trial < 50; ++trial) {
    MixingNetwork net =
        MixingNetwork::create(state_dim, agents, trial % 2 == 1, 1000 + trial, 8);
    std::vector<double> state(state_dim), values(agents);
    for (double& s : state) s = rng.uniform(-1.0, 1.0);
    for (double& v : values) v = rng.uniform(-3.0, 3.0);
    NoGradGuard ng;
    Tensor st = Tensor::of({1, state_dim}, state);
    double h = 1e-6;
    for (int a = 0; a < agents; ++a) {
      auto shifted = values;
      shifted[a] += h;
      double up = mix_forward(net, Tensor::of({1, agents}, shifted), st).item();
      shifted[a] -= 2 * h;
      double dn = mix_forward(net, Tensor::of({1, agents}, shifted), st).item();
      require((up - dn) / (2 * h) >= -1e-8, "mixer is not monotone in a local value");
    }
  }
}

void check_coma_identity() {
  Rng rng(45);
  int u = 5;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> q(u), p(u);
    double z = 0.0;
    for (int i = 0; i < u; ++i) {
      q[i] = rng.uniform(-5.0, 5.0);
      p[i] = rng.uniform(0.05, 1.0);
      z += p[i];
    }
    for (double& v : p) v /= z;
    double expectation = 0.0;
    for (int i = 0; i < u; ++i) expectation += p[i] * coma_advantage(q, p, i);
    require(std::abs(expectation) <= 1e-12, "counterfactual advantage expectation is not zero");
  }
}

void check_rollout_determinism() {
  EnvConfig env;
  env.name = "climb";
  ActorNet actor = ActorNet::create(1, 3, 2, 16, 7);
  RolloutContext a = RolloutContext::create(env, 4, 99);
  RolloutContext b = RolloutContext::create(env, 4, 99);
  EpisodeBatch ba = rollout(actor, a);
  EpisodeBatch bb = rollout(actor, b);
  require(ba.actions == bb.actions && ba.rewards == bb.rewards &&
              ba.log_probs == bb.log_probs && ba.obs == bb.obs,
          "identical seeds produced different batches");
}

void check_sum_pinned_mixer() {
  Rng rng(46);
  MixingNetwork net = MixingNetwork::create(4, 3, true, 77);
  force_sum_constants(net);
  NoGradGuard ng;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> values(3), state(4);
    for (double& v : values) v = rng.uniform(-4.0, 4.0);
    for (double& s : state) s = rng.uniform(-1.0, 1.0);
    double mixed = mix_forward(net, Tensor::of({1, 3}, values), Tensor::of({1, 4}, state)).item();
    double total = values[0] + values[1] + values[2];
    require(std::abs(mixed - total) <= 1e-10, "pinned mixer is not the sum");
  }
}

}  // namespace

int selftest() {
  struct Check {
    const char* name;
    std::function<void()> fn;
  };
  std::vector<Check> checks = {
      {"autodiff finite differences", check_autodiff},
      {"masked softmax rows", check_masked_softmax},
      {"return-target identities", check_return_targets},
      {"mixer monotonicity", check_mixer_monotonic},
      {"counterfactual advantage identity", check_coma_identity},
      {"rollout determinism", check_rollout_determinism},
      {"sum-pinned linear mixer", check_sum_pinned_mixer},
  };
  int failures = 0;
  for (auto& c : checks) {
    try {
      c.fn();
      std::printf("selftest: %-36s ok\n", c.name);
    } catch (const std::exception& e) {
      ++failures;
      std::printf("selftest: %-36s FAILED (%s)\n", c.name, e.what());
    }
  }
  if (failures == 0) {
    std::printf("selftest: all %d checks passed\n", static_cast<int>(checks.size()));
    return 0;
  }
  std::printf("selftest: %d of %d checks failed\n", failures, static_cast<int>(checks.size()));
  return 1;
}

}  // namespace vdmarl

#include "sgad/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <optional>
#include <sstream>

#include "sgad/errors.hpp"

namespace sgad {
namespace {

double distance(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

// Homotopy side in the maze, tracked in the band where the path passes the
// obstacle.
class ModeTracker {
 public:
  void observe(const EnvState& s, EnvId env) {
    namespace g = geometry;
    if (env != EnvId::kMaze) return;
    const double y = s.agent_pos[1];
    if (y > g::kMazeObstacle[1] + g::kMazeObstacleRadius ||
        y < g::kMazeObstacle[1] - g::kMazeObstacleRadius - 0.1) {
      return;
    }
    const double side = side_of(g::kMazeStart, g::kMazeGoal, s.agent_pos);
    const int sign = side > 0 ? 1 : (side < 0 ? -1 : 0);
    if (sign == 0) return;
    if (last_ != 0 && sign != last_) ++switches_;
    last_ = sign;
  }
  int switches() const { return switches_; }

 private:
  int last_ = 0;
  int switches_ = 0;
};

}  // namespace

ExpertSampler::ExpertSampler(EnvConfig env, VariancePreset preset, PolicyConfig policy)
    : env_(std::move(env)),
      preset_(std::move(preset)),
      policy_(policy),
      controller_(env_.env_id, LatentMode::kLeft, {0.0, 0.0}) {}

void ExpertSampler::begin_episode(Rng& rng) {
  const LatentMode mode =
      rng.uniform() < preset_.mode_mix ? LatentMode::kLeft : LatentMode::kRight;
  const Vec2 offset = {rng.uniform(-1.0, 1.0) * preset_.waypoint_offset_scale,
                       rng.uniform(-1.0, 1.0) * preset_.waypoint_offset_scale};
  controller_ = ExpertController(env_.env_id, mode, offset);
}

std::vector<ActionChunk> ExpertSampler::sample(std::span<const double> obs_window,
                                               int n, Rng& /*rng*/,
                                               const GuidanceRequest* /*guidance*/) {
  const auto d = static_cast<std::size_t>(obs_dim(env_.env_id));
  const auto latest = obs_window.subspan(obs_window.size() - d, d);
  EnvState s = state_from_features(latest, env_);
  controller_.act(s, env_);  // advances the persistent waypoint phase
  ExpertController plan = controller_;
  ActionChunk chunk(static_cast<std::size_t>(policy_.l),
                    static_cast<std::size_t>(policy_.chunk_width()));
  for (int k = 0; k < policy_.l; ++k) {
    const Vec2 a = plan.act(s, env_);
    chunk(k, 0) = a[0];
    chunk(k, 1) = a[1];
    s = advance(s, a, env_);
    s.step_index = 0;
    if (policy_.predict_states) {
      const auto f = features(s, env_);
      for (std::size_t j = 0; j < f.size(); ++j) chunk(k, 2 + j) = f[j];
    }
  }
  return std::vector<ActionChunk>(static_cast<std::size_t>(n), chunk);
}

EpisodeResult rollout(ChunkSampler& sampler, const EnvConfig& env,
                      const PolicyConfig& policy, const StrategyConfig& strategy,
                      std::uint64_t seed) {
  policy.validate();
  strategy.validate();
  env.validate();
  const PolicyConfig& sp = sampler.policy();
  if (sp.c != policy.c || sp.l != policy.l || sp.obs_dim != policy.obs_dim ||
      sp.action_dim != policy.action_dim || sp.predict_states != policy.predict_states) {
    throw InvalidConfig("policy: checkpoint dims do not match the policy config");
  }
  if (policy.obs_dim != obs_dim(env.env_id) || policy.action_dim != kActionDim) {
    throw InvalidConfig("policy: dims do not match environment '" + to_string(env.env_id) + "'");
  }

  const Rng root(seed);
  Rng env_rng = root.fork(1);
  Rng obs_rng = root.fork(2);
  const Rng policy_rng = root.fork(3);
  Rng begin_rng = root.fork(4);
  sampler.begin_episode(begin_rng);

  EnvState s = env_reset(env, env_rng);
  std::deque<std::vector<double>> history;
  history.push_back(observe(s, env, obs_rng));
  const auto od = static_cast<std::size_t>(policy.obs_dim);
  std::vector<double> window(static_cast<std::size_t>(policy.c) * od);

  EpisodeResult result;
  result.seed = seed;
  ModeTracker modes;
  modes.observe(s, env.env_id);
  std::optional<PriorChunk> prior;
  std::vector<TimedChunk> buffer;
  const bool ensemble = strategy.kind == StrategyKind::kEnsemble;
  StrategyConfig sample_strategy = strategy;
  if (ensemble) sample_strategy.kind = StrategyKind::kRandom;

  std::int64_t t = 0;
  bool done = is_success(s, env);
  while (!done && s.step_index < env.max_steps) {
    if (prior) check_prior_age(*prior, t, policy.h);
    for (int k = 0; k < policy.c; ++k) {
      const long idx = static_cast<long>(history.size()) - policy.c + k;
      const auto& o = history[static_cast<std::size_t>(std::max(0L, idx))];
      std::copy(o.begin(), o.end(), window.begin() + k * od);
    }
    Rng decision_rng = policy_rng.fork(static_cast<std::uint64_t>(t));
    ActionChunk chunk;
    try {
      chunk = decide(sample_strategy, sampler, window, prior ? &*prior : nullptr,
                     policy.h, decision_rng);
    } catch (const DivergenceError&) {
      result.diverged = true;
      break;
    }
    const std::int64_t birth = t;
    if (ensemble) {
      std::erase_if(buffer, [&](const TimedChunk& tc) {
        return t - tc.birth_time >= static_cast<std::int64_t>(tc.chunk.rows());
      });
      buffer.push_back({chunk, birth});
    }
    for (int k = 0; k < policy.h && !done && s.step_index < env.max_steps; ++k) {
      Vec2 a;
      if (ensemble) {
        const auto avg = temporal_ensemble(buffer, t, strategy.ensemble_decay);
        a = {avg[0], avg[1]};
      } else {
        a = {chunk(k, 0), chunk(k, 1)};
      }
      auto step = env_step(s, a, env, obs_rng);
      s = step.state;
      history.push_back(std::move(step.observation));
      if (history.size() > static_cast<std::size_t>(policy.c)) history.pop_front();
      modes.observe(s, env.env_id);
      ++t;
      done = is_success(s, env) || s.collided;
    }
    prior = PriorChunk{std::move(chunk), birth};
  }

  result.success = is_success(s, env);
  result.steps_used = s.step_index;
  result.final_goal_distance = env.env_id == EnvId::kMaze
                                   ? distance(s.agent_pos, s.goal_pos)
                                   : distance(s.object_pos, s.goal_pos);
  result.mode_switches = modes.switches();
  return result;
}

EpisodeResult rollout(const Checkpoint& ck, const EnvConfig& env,
                      const PolicyConfig& policy, const StrategyConfig& strategy,
                      const SigmaSchedule& schedule, std::uint64_t seed) {
  DiffusionSampler sampler(ck, schedule);
  return rollout(sampler, env, policy, strategy, seed);
}

WilsonInterval wilson_interval(int successes, int n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double nn = n;
  const double p = successes / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
  // Rounding can push an endpoint past p at k = 0 or k = n.
  return {std::min(p, std::max(0.0, center - half)), std::max(p, std::min(1.0, center + half))};
}

ResultRow summarize(const std::vector<EpisodeResult>& episodes) {
  ResultRow r;
  r.n_episodes = static_cast<int>(episodes.size());
  double steps = 0.0, switches = 0.0;
  for (const auto& e : episodes) {
    r.successes += e.success ? 1 : 0;
    steps += e.steps_used;
    switches += e.mode_switches;
  }
  if (r.n_episodes > 0) {
    r.success_rate = static_cast<double>(r.successes) / r.n_episodes;
    r.mean_steps = steps / r.n_episodes;
    r.mean_mode_switches = switches / r.n_episodes;
  }
  const auto w = wilson_interval(r.successes, r.n_episodes);
  r.wilson_lo = std::min(w.lo, r.success_rate);
  r.wilson_hi = std::max(w.hi, r.success_rate);
  return r;
}

std::vector<Cell> SweepSpec::cells() const {
  std::vector<Cell> out;
  for (const auto& preset : presets) {
    for (double speed : goal_speeds) {
      for (int h : horizons) {
        for (int n : n_samples) {
          for (StrategyKind kind : strategies) {
            const std::vector<double> bs =
                kind == StrategyKind::kSelfGuided ? betas
                                                  : std::vector<double>{betas.empty() ? 0.0 : betas.front()};
            for (double beta : bs) {
              for (double noise : obs_noise) {
                out.push_back({preset, speed, h, n, kind, beta, noise});
              }
            }
          }
        }
      }
    }
  }
  return out;
}

namespace {

struct CellSetup {
  EnvConfig env;
  PolicyConfig policy;
  StrategyConfig strategy;
  const Checkpoint* ck;
};

CellSetup setup_cell(const SweepSpec& spec, const Cell& cell,
                     const CheckpointSet& checkpoints) {
  const auto it = checkpoints.find(cell.preset);
  if (it == checkpoints.end() || it->second == nullptr) {
    throw InvalidConfig("sweep: no checkpoint for cell (preset=" + cell.preset +
                        ", h=" + std::to_string(cell.h) + ", strategy=" +
                        to_string(cell.strategy) + ")");
  }
  CellSetup s{apply_preset(spec.env, variance_preset(cell.preset)), it->second->policy,
              spec.strategy, it->second};
  s.env.goal_speed = cell.goal_speed;
  s.env.obs_noise_sigma = cell.obs_noise_sigma;
  s.policy.h = cell.h;
  s.strategy.kind = cell.strategy;
  s.strategy.n_samples = cell.n_samples;
  s.strategy.guidance.beta = cell.strategy == StrategyKind::kSelfGuided ? cell.beta : 0.0;
  s.policy.validate();
  return s;
}

ResultRow label(ResultRow r, const SweepSpec& spec, const Cell& cell) {
  r.env_id = to_string(spec.env.env_id);
  r.preset = cell.preset;
  r.goal_speed = cell.goal_speed;
  r.h = cell.h;
  r.n_samples = cell.n_samples;
  r.strategy = to_string(cell.strategy);
  r.beta = cell.strategy == StrategyKind::kSelfGuided ? cell.beta : 0.0;
  r.obs_noise_sigma = cell.obs_noise_sigma;
  return r;
}

}  // namespace

std::vector<ResultRow> sweep_cells(const SweepSpec& spec, const std::vector<Cell>& cells,
                                   const CheckpointSet& checkpoints) {
  if (spec.episodes < 1) throw InvalidConfig("sweep.episodes must be >= 1");
  std::vector<CellSetup> setups;
  for (const auto& c : cells) setups.push_back(setup_cell(spec, c, checkpoints));
  const std::size_t per = static_cast<std::size_t>(spec.episodes);
  std::vector<EpisodeResult> results(cells.size() * per);
  const auto total = static_cast<long>(results.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long job = 0; job < total; ++job) {
    try {
      const auto ci = static_cast<std::size_t>(job) / per;
      const auto ei = static_cast<std::size_t>(job) % per;
      const auto& s = setups[ci];
      results[static_cast<std::size_t>(job)] =
          rollout(*s.ck, s.env, s.policy, s.strategy, spec.schedule, spec.base_seed + ei);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<ResultRow> rows;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    std::vector<EpisodeResult> eps(results.begin() + ci * per, results.begin() + (ci + 1) * per);
    rows.push_back(label(summarize(eps), spec, cells[ci]));
  }
  return rows;
}

ResultRow evaluate_cell(const SweepSpec& spec, const Cell& cell,
                        const CheckpointSet& checkpoints) {
  return sweep_cells(spec, {cell}, checkpoints).front();
}

std::vector<ResultRow> sweep(const SweepSpec& spec, const CheckpointSet& checkpoints) {
  return sweep_cells(spec, spec.cells(), checkpoints);
}

BetaCurve tune_beta(const Checkpoint& ck, const SweepSpec& spec, const Cell& base,
                    const std::vector<double>& beta_grid) {
  if (beta_grid.empty()) throw InvalidConfig("tune_beta: beta grid is empty");
  std::vector<Cell> cells;
  for (double b : beta_grid) {
    Cell c = base;
    c.strategy = StrategyKind::kSelfGuided;
    c.beta = b;
    cells.push_back(c);
  }
  const CheckpointSet set = {{base.preset, &ck}};
  BetaCurve curve;
  curve.rows = sweep_cells(spec, cells, set);
  int best = -1;
  for (const auto& r : curve.rows) {
    if (r.successes > best || (r.successes == best && r.beta < curve.best_beta)) {
      best = r.successes;
      curve.best_beta = r.beta;
    }
  }
  return curve;
}

namespace {

constexpr const char* kCsvHeader =
    "env_id,preset,goal_speed,h,n_samples,strategy,beta,obs_noise_sigma,n_episodes,"
    "successes,success_rate,wilson_lo,wilson_hi,mean_steps,mean_mode_switches";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string csv_text(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += r.env_id + "," + r.preset + "," + fmt(r.goal_speed) + "," + std::to_string(r.h) +
           "," + std::to_string(r.n_samples) + "," + r.strategy + "," + fmt(r.beta) + "," +
           fmt(r.obs_noise_sigma) + "," + std::to_string(r.n_episodes) + "," +
           std::to_string(r.successes) + "," + fmt(r.success_rate) + "," + fmt(r.wilson_lo) +
           "," + fmt(r.wilson_hi) + "," + fmt(r.mean_steps) + "," +
           fmt(r.mean_mode_switches) + "\n";
  }
  return out;
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << csv_text(rows);
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ResultRow> parse_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ParseError("unexpected CSV header", 0);
  }
  std::vector<ResultRow> rows;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 15) throw ParseError("CSV row has wrong field count", offset);
    try {
      ResultRow r;
      r.env_id = f[0];
      r.preset = f[1];
      r.goal_speed = std::stod(f[2]);
      r.h = std::stoi(f[3]);
      r.n_samples = std::stoi(f[4]);
      r.strategy = f[5];
      r.beta = std::stod(f[6]);
      r.obs_noise_sigma = std::stod(f[7]);
      r.n_episodes = std::stoi(f[8]);
      r.successes = std::stoi(f[9]);
      r.success_rate = std::stod(f[10]);
      r.wilson_lo = std::stod(f[11]);
      r.wilson_hi = std::stod(f[12]);
      r.mean_steps = std::stod(f[13]);
      r.mean_mode_switches = std::stod(f[14]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError("CSV field is not a number", offset);
    }
    offset += line.size() + 1;
  }
  return rows;
}

std::vector<ResultRow> parse_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv_text(ss.str());
}

}  // namespace sgad

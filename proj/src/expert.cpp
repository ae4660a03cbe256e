#include "sgad/expert.hpp"

#include <algorithm>
#include <cmath>

#include "sgad/errors.hpp"

namespace sgad {
namespace {

constexpr double kGain = 4.0;           // 1/s
constexpr double kSwitchRadius = 0.06;  // waypoint capture radius
constexpr double kMazeDetour = 0.3;     // lateral waypoint distance

Vec2 sub(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
double norm(const Vec2& v) { return std::hypot(v[0], v[1]); }

Vec2 track(const Vec2& from, const Vec2& to, double a_max) {
  Vec2 v = {kGain * (to[0] - from[0]), kGain * (to[1] - from[1])};
  const double n = norm(v);
  if (n > a_max) {
    v[0] *= a_max / n;
    v[1] *= a_max / n;
  }
  return v;
}

// Distance from point p to segment ab.
double segment_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = sub(b, a);
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1];
  double t = len2 > 0 ? ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm({a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]});
}

}  // namespace

void VariancePreset::validate() const {
  if (start_jitter < 0 || waypoint_offset_scale < 0 || goal_offset_var < 0) {
    throw InvalidConfig("preset scales must be >= 0");
  }
  if (!(mode_mix >= 0 && mode_mix <= 1)) {
    throw InvalidConfig("preset.mode_mix must lie in [0, 1]");
  }
}

VariancePreset variance_preset(const std::string& name) {
  double scale;
  if (name == "low") {
    scale = 1.0;
  } else if (name == "medium") {
    scale = 2.0;
  } else if (name == "high") {
    scale = 3.0;
  } else {
    throw InvalidConfig("preset: unknown variance preset '" + name + "'");
  }
  return {name, 0.02 * scale, 0.03 * scale, 0.02 * scale, 0.5};
}

EnvConfig apply_preset(EnvConfig cfg, const VariancePreset& preset) {
  cfg.start_jitter = preset.start_jitter;
  cfg.goal_jitter = preset.goal_offset_var;
  return cfg;
}

ExpertController::ExpertController(EnvId env, LatentMode mode, Vec2 waypoint_offset)
    : env_(env), mode_(mode), offset_(waypoint_offset) {}

Vec2 ExpertController::act(const EnvState& s, const EnvConfig& cfg) {
  return env_ == EnvId::kMaze ? act_maze(s, cfg) : act_push(s, cfg);
}

Vec2 ExpertController::act_maze(const EnvState& s, const EnvConfig& cfg) {
  namespace g = geometry;
  const double side = mode_ == LatentMode::kLeft ? -1.0 : 1.0;
  const Vec2 detour = {g::kMazeObstacle[0] + side * kMazeDetour + offset_[0],
                       g::kMazeObstacle[1] + offset_[1]};
  if (phase_ == 0 && norm(sub(s.agent_pos, detour)) < kSwitchRadius) phase_ = 1;
  return track(s.agent_pos, phase_ == 0 ? detour : s.goal_pos, cfg.a_max);
}

Vec2 ExpertController::act_push(const EnvState& s, const EnvConfig& cfg) {
  namespace g = geometry;
  const double contact = g::kPushObjectRadius + g::kPushAgentRadius;
  Vec2 u = sub(s.goal_pos, s.object_pos);
  const double dist = norm(u);
  if (dist < 1e-9) return {0.0, 0.0};
  u = {u[0] / dist, u[1] / dist};
  const Vec2 normal = {-u[1], u[0]};  // left of the push direction
  const Vec2 rel = sub(s.agent_pos, s.object_pos);
  const double along = rel[0] * u[0] + rel[1] * u[1];
  const double lateral = rel[0] * normal[0] + rel[1] * normal[1];

  const bool behind = along < -(contact - 0.012) && std::abs(lateral) < 0.025;
  if (behind) {
    phase_ = 2;
    const Vec2 target = {s.object_pos[0] - u[0] * (contact - 0.03),
                         s.object_pos[1] - u[1] * (contact - 0.03)};
    return track(s.agent_pos, target, cfg.a_max);
  }
  const Vec2 pre = {s.object_pos[0] - u[0] * (contact + 0.02),
                    s.object_pos[1] - u[1] * (contact + 0.02)};
  if (phase_ == 0) {
    const double side = mode_ == LatentMode::kLeft ? 1.0 : -1.0;
    // Lateral detour around the object on the mode's side.
    const double reach = contact + 0.05;
    const Vec2 detour = {s.object_pos[0] + side * normal[0] * reach + offset_[0],
                         s.object_pos[1] + side * normal[1] * reach + offset_[1]};
    const bool blocked = segment_distance(s.agent_pos, pre, s.object_pos) < contact + 0.01;
    if (blocked && norm(sub(s.agent_pos, detour)) > 0.03) {
      return track(s.agent_pos, detour, cfg.a_max);
    }
    phase_ = 1;
  }
  return track(s.agent_pos, pre, cfg.a_max);
}

Demo generate_demo(const EnvConfig& base_cfg, const VariancePreset& preset,
                   Rng& rng) {
  preset.validate();
  const EnvConfig cfg = apply_preset(base_cfg, preset);
  cfg.validate();
  for (int attempt = 0; attempt < kDemoAttempts; ++attempt) {
    EnvState s = env_reset(cfg, rng);
    const LatentMode mode =
        rng.uniform() < preset.mode_mix ? LatentMode::kLeft : LatentMode::kRight;
    const Vec2 offset = {rng.uniform(-1.0, 1.0) * preset.waypoint_offset_scale,
                         rng.uniform(-1.0, 1.0) * preset.waypoint_offset_scale};
    ExpertController expert(cfg.env_id, mode, offset);
    Demo demo;
    demo.mode = mode;
    Trajectory& tr = demo.trajectory;
    tr.obs_dim = obs_dim(cfg.env_id);
    tr.action_dim = kActionDim;
    while (s.step_index < cfg.max_steps && !s.collided && !is_success(s, cfg)) {
      const auto f = features(s, cfg);
      const Vec2 a = expert.act(s, cfg);
      for (double v : f) tr.states.push_back(static_cast<float>(v));
      tr.actions.push_back(static_cast<float>(a[0]));
      tr.actions.push_back(static_cast<float>(a[1]));
      s = advance(s, a, cfg);
    }
    if (is_success(s, cfg) && tr.length() > 0) return demo;
  }
  throw GenerationError("expert failed " + std::to_string(kDemoAttempts) +
                        " attempts under preset '" + preset.name + "'");
}

std::vector<Demo> build_demos(int n, const EnvConfig& cfg,
                              const VariancePreset& preset, std::uint64_t seed) {
  if (n < 1) throw InvalidConfig("dataset size n must be >= 1");
  std::vector<Demo> demos(static_cast<std::size_t>(n));
  const Rng root(seed);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      Rng rng = root.fork(static_cast<std::uint64_t>(i));
      demos[static_cast<std::size_t>(i)] = generate_demo(cfg, preset, rng);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return demos;
}

Dataset build_dataset(int n, const EnvConfig& cfg, const VariancePreset& preset,
                      std::uint64_t seed) {
  Dataset d;
  for (auto& demo : build_demos(n, cfg, preset, seed)) {
    d.trajectories.push_back(std::move(demo.trajectory));
  }
  d.meta = {to_string(cfg.env_id), preset.name, seed};
  return d;
}

EnvState state_from_features(std::span<const double> obs, const EnvConfig& cfg) {
  if (static_cast<int>(obs.size()) != obs_dim(cfg.env_id)) {
    throw InvalidInput("observation width does not match environment");
  }
  EnvState s;
  s.agent_pos = {obs[0], obs[1]};
  if (cfg.env_id == EnvId::kMaze) {
    s.object_pos = geometry::kMazeObstacle;
    s.goal_pos = {obs[2], obs[3]};
  } else {
    s.object_pos = {obs[2], obs[3]};
    s.goal_pos = {obs[4], obs[5]};
  }
  return s;
}

LatentMode classify_side(const Trajectory& tr) {
  const auto first = tr.state(0);
  const auto last = tr.state(tr.length() - 1);
  const Vec2 a = {first[0], first[1]};
  const Vec2 b = {last[0], last[1]};
  double area = 0.0;
  for (std::size_t t = 0; t < tr.length(); ++t) {
    const auto p = tr.state(t);
    area += side_of(a, b, {p[0], p[1]});
  }
  return area > 0 ? LatentMode::kLeft : LatentMode::kRight;
}

}  // namespace sgad

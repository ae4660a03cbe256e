#include "sgad/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sgad/errors.hpp"

namespace sgad {
namespace {

double norm(const Vec2& v) { return std::hypot(v[0], v[1]); }

Vec2 clamp_to(const Bounds& b, Vec2 p, double margin = 0.0) {
  p[0] = std::clamp(p[0], b.xmin + margin, b.xmax - margin);
  p[1] = std::clamp(p[1], b.ymin + margin, b.ymax - margin);
  return p;
}

Vec2 jitter(const Vec2& p, double half_width, Rng& rng) {
  if (half_width <= 0.0) return p;
  return {p[0] + rng.uniform(-half_width, half_width),
          p[1] + rng.uniform(-half_width, half_width)};
}

void reflect_axis(double& pos, double& vel, double lo, double hi) {
  if (pos < lo) {
    pos = 2.0 * lo - pos;
    vel = -vel;
  } else if (pos > hi) {
    pos = 2.0 * hi - pos;
    vel = -vel;
  }
}

}  // namespace

std::string to_string(EnvId id) { return id == EnvId::kMaze ? "maze" : "push"; }

EnvId env_id_from_string(const std::string& name) {
  if (name == "maze") return EnvId::kMaze;
  if (name == "push") return EnvId::kPush;
  throw InvalidConfig("env: unknown environment '" + name + "'");
}

double Bounds::diagonal() const { return std::hypot(xmax - xmin, ymax - ymin); }

bool Bounds::contains(const Vec2& p) const {
  return p[0] >= xmin && p[0] <= xmax && p[1] >= ymin && p[1] <= ymax;
}

void EnvConfig::validate() const {
  if (!(bounds.xmax > bounds.xmin && bounds.ymax > bounds.ymin)) {
    throw InvalidConfig("env.bounds must be a non-empty rectangle");
  }
  if (!(dt > 0)) throw InvalidConfig("env.dt must be > 0");
  if (!(goal_speed >= 0)) throw InvalidConfig("env.goal_speed must be >= 0");
  if (!(goal_radius > 0)) throw InvalidConfig("env.goal_radius must be > 0");
  if (max_steps < 1) throw InvalidConfig("env.max_steps must be >= 1");
  if (!(obs_noise_sigma >= 0)) throw InvalidConfig("env.obs_noise_sigma must be >= 0");
  if (!(a_max > 0)) throw InvalidConfig("env.a_max must be > 0");
  if (!(start_jitter >= 0) || !(goal_jitter >= 0)) {
    throw InvalidConfig("env jitter must be >= 0");
  }
}

EnvConfig default_env_config(EnvId id) {
  EnvConfig cfg;
  cfg.env_id = id;
  if (id == EnvId::kPush) {
    cfg.max_steps = 200;
    cfg.goal_radius = 0.06;
  }
  return cfg;
}

int obs_dim(EnvId id) { return id == EnvId::kMaze ? 4 : 6; }

EnvState env_reset(const EnvConfig& cfg, Rng& rng) {
  cfg.validate();
  namespace g = geometry;
  EnvState s;
  if (cfg.env_id == EnvId::kMaze) {
    s.agent_pos = jitter(g::kMazeStart, cfg.start_jitter, rng);
    s.goal_pos = jitter(g::kMazeGoal, cfg.goal_jitter, rng);
    s.object_pos = g::kMazeObstacle;
  } else {
    s.agent_pos = jitter(g::kPushAgentStart, cfg.start_jitter, rng);
    s.object_pos = jitter(g::kPushObjectStart, cfg.start_jitter, rng);
    // Push goals cover a region so the learned policy is goal-conditioned.
    const Vec2 region_center = {
        g::kPushGoal[0] + rng.uniform(-g::kPushGoalRegion, g::kPushGoalRegion),
        g::kPushGoal[1] + rng.uniform(-0.5 * g::kPushGoalRegion,
                                      0.5 * g::kPushGoalRegion)};
    s.goal_pos = jitter(region_center, cfg.goal_jitter, rng);
  }
  s.agent_pos = clamp_to(cfg.bounds, s.agent_pos);
  s.object_pos = clamp_to(cfg.bounds, s.object_pos);
  s.goal_pos = clamp_to(cfg.bounds, s.goal_pos);
  if (cfg.goal_speed > 0) {
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const double speed = cfg.goal_speed * cfg.speed_unit();
    s.goal_vel = {speed * std::cos(theta), speed * std::sin(theta)};
  }
  return s;
}

std::vector<double> features(const EnvState& s, const EnvConfig& cfg) {
  if (cfg.env_id == EnvId::kMaze) {
    return {s.agent_pos[0], s.agent_pos[1], s.goal_pos[0], s.goal_pos[1]};
  }
  return {s.agent_pos[0],  s.agent_pos[1], s.object_pos[0],
          s.object_pos[1], s.goal_pos[0],  s.goal_pos[1]};
}

std::vector<double> observe(const EnvState& s, const EnvConfig& cfg, Rng& rng) {
  auto f = features(s, cfg);
  if (cfg.obs_noise_sigma > 0) {
    for (auto& v : f) v += cfg.obs_noise_sigma * rng.normal();
  }
  return f;
}

EnvState advance(const EnvState& s, const Vec2& action, const EnvConfig& cfg) {
  namespace g = geometry;
  if (!std::isfinite(action[0]) || !std::isfinite(action[1])) {
    throw InvalidInput("env_step: non-finite action");
  }
  EnvState n = s;
  Vec2 v = action;
  const double speed = norm(v);
  if (speed > cfg.a_max) {
    v[0] *= cfg.a_max / speed;
    v[1] *= cfg.a_max / speed;
  }
  n.agent_vel = v;
  n.agent_pos = clamp_to(cfg.bounds, {s.agent_pos[0] + v[0] * cfg.dt,
                                      s.agent_pos[1] + v[1] * cfg.dt});

  if (cfg.env_id == EnvId::kMaze) {
    const Vec2 d = {n.agent_pos[0] - g::kMazeObstacle[0],
                    n.agent_pos[1] - g::kMazeObstacle[1]};
    if (norm(d) < g::kMazeObstacleRadius) n.collided = true;
  } else {
    // Quasi-static contact: the disk is pushed out along the agent->object
    // axis by the penetration depth.
    const double contact = g::kPushObjectRadius + g::kPushAgentRadius;
    Vec2 d = {n.object_pos[0] - n.agent_pos[0], n.object_pos[1] - n.agent_pos[1]};
    double dist = norm(d);
    if (dist < contact) {
      if (dist < 1e-12) {
        d = speed > 0 ? v : Vec2{0.0, 1.0};
        dist = norm(d);
      }
      const double push = contact - dist;
      n.object_pos = clamp_to(cfg.bounds, {n.object_pos[0] + d[0] / dist * push,
                                           n.object_pos[1] + d[1] / dist * push});
    }
  }

  n.goal_pos = {s.goal_pos[0] + s.goal_vel[0], s.goal_pos[1] + s.goal_vel[1]};
  reflect_axis(n.goal_pos[0], n.goal_vel[0], cfg.bounds.xmin, cfg.bounds.xmax);
  reflect_axis(n.goal_pos[1], n.goal_vel[1], cfg.bounds.ymin, cfg.bounds.ymax);
  n.goal_pos = clamp_to(cfg.bounds, n.goal_pos);
  n.step_index = s.step_index + 1;
  return n;
}

StepResult env_step(const EnvState& s, const Vec2& action, const EnvConfig& cfg,
                    Rng& rng) {
  if (s.step_index >= cfg.max_steps) {
    throw ContractViolation("env_step called on a terminated episode");
  }
  StepResult r{advance(s, action, cfg), {}};
  r.observation = observe(r.state, cfg, rng);
  return r;
}

bool is_success(const EnvState& s, const EnvConfig& cfg) {
  if (cfg.env_id == EnvId::kMaze) {
    if (s.collided) return false;
    return norm({s.agent_pos[0] - s.goal_pos[0], s.agent_pos[1] - s.goal_pos[1]}) <=
           cfg.goal_radius;
  }
  return norm({s.object_pos[0] - s.goal_pos[0], s.object_pos[1] - s.goal_pos[1]}) <=
         cfg.goal_radius;
}

double side_of(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
}

}  // namespace sgad

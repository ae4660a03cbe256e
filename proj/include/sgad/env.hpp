#pragma once

#include <array>
#include <string>
#include <vector>

#include "sgad/rng.hpp"

namespace sgad {

using Vec2 = std::array<double, 2>;

enum class EnvId { kMaze, kPush };

std::string to_string(EnvId id);
EnvId env_id_from_string(const std::string& name);

struct Bounds {
  double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;
  double diagonal() const;
  bool contains(const Vec2& p) const;
};

struct EnvConfig {
  EnvId env_id = EnvId::kMaze;
  Bounds bounds;
  double dt = 0.1;
  // Goal speed in multiples of speed_unit(); 0 keeps the goal static.
  double goal_speed = 0.0;
  double goal_radius = 0.05;
  int max_steps = 120;
  double obs_noise_sigma = 0.0;
  // Velocity command limit in world units per second.
  double a_max = 0.2;
  // Reset jitter half-widths in world units.
  double start_jitter = 0.02;
  double goal_jitter = 0.02;

  // 0.25% of the arena diagonal per step.
  double speed_unit() const { return 0.0025 * bounds.diagonal(); }
  void validate() const;
};

// Defaults for each environment.
EnvConfig default_env_config(EnvId id);

// Fixed geometry of the two arenas.
namespace geometry {
inline constexpr Vec2 kMazeStart{0.5, 0.1};
inline constexpr Vec2 kMazeGoal{0.5, 0.9};
inline constexpr Vec2 kMazeObstacle{0.5, 0.5};
inline constexpr double kMazeObstacleRadius = 0.18;

inline constexpr Vec2 kPushAgentStart{0.5, 0.62};
inline constexpr Vec2 kPushObjectStart{0.5, 0.45};
inline constexpr Vec2 kPushGoal{0.5, 0.8};
inline constexpr double kPushObjectRadius = 0.05;
inline constexpr double kPushAgentRadius = 0.015;
inline constexpr double kPushGoalRegion = 0.15;
}  // namespace geometry

struct EnvState {
  Vec2 agent_pos{};
  Vec2 agent_vel{};
  Vec2 object_pos{};  // push only
  Vec2 goal_pos{};
  Vec2 goal_vel{};    // world units per step
  int step_index = 0;
  bool collided = false;  // maze: latched once the agent enters the obstacle

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

int obs_dim(EnvId id);
inline constexpr int kActionDim = 2;

EnvState env_reset(const EnvConfig& cfg, Rng& rng);

// Noiseless observation features.
std::vector<double> features(const EnvState& s, const EnvConfig& cfg);
// Features plus Gaussian noise of scale cfg.obs_noise_sigma (no draws when 0).
std::vector<double> observe(const EnvState& s, const EnvConfig& cfg, Rng& rng);

struct StepResult {
  EnvState state;
  std::vector<double> observation;
};

StepResult env_step(const EnvState& s, const Vec2& action, const EnvConfig& cfg,
                    Rng& rng);

// Deterministic part of a step (no observation); used by planners.
EnvState advance(const EnvState& s, const Vec2& action, const EnvConfig& cfg);

bool is_success(const EnvState& s, const EnvConfig& cfg);

// Signed side of p relative to the directed line a->b (positive = left).
double side_of(const Vec2& a, const Vec2& b, const Vec2& p);

}  // namespace sgad

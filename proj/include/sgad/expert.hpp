#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgad/core.hpp"
#include "sgad/env.hpp"
#include "sgad/rng.hpp"

namespace sgad {

struct VariancePreset {
  std::string name;
  double start_jitter = 0.0;
  double waypoint_offset_scale = 0.0;
  double goal_offset_var = 0.0;
  double mode_mix = 0.5;  // probability of the left mode

  void validate() const;
};

// "low", "medium" or "high".
VariancePreset variance_preset(const std::string& name);

// Copies the preset's reset jitter into an env config.
EnvConfig apply_preset(EnvConfig cfg, const VariancePreset& preset);

enum class LatentMode { kLeft, kRight };

// Waypoint-following proportional controller. Copyable so planners can roll
// it forward without disturbing the original.
class ExpertController {
 public:
  ExpertController(EnvId env, LatentMode mode, Vec2 waypoint_offset);

  Vec2 act(const EnvState& s, const EnvConfig& cfg);
  LatentMode mode() const { return mode_; }

 private:
  Vec2 act_maze(const EnvState& s, const EnvConfig& cfg);
  Vec2 act_push(const EnvState& s, const EnvConfig& cfg);

  EnvId env_;
  LatentMode mode_;
  Vec2 offset_;
  int phase_ = 0;
};

struct Demo {
  Trajectory trajectory;
  LatentMode mode = LatentMode::kLeft;
};

inline constexpr int kDemoAttempts = 50;

// Rolls the expert under a sampled latent mode; only successful rollouts are
// returned. Throws GenerationError after kDemoAttempts failures.
Demo generate_demo(const EnvConfig& cfg, const VariancePreset& preset, Rng& rng);

// n successful demos; trajectory i draws from stream i of the seed.
Dataset build_dataset(int n, const EnvConfig& cfg, const VariancePreset& preset,
                      std::uint64_t seed);
// Same, also returning each demo's mode.
std::vector<Demo> build_demos(int n, const EnvConfig& cfg,
                              const VariancePreset& preset, std::uint64_t seed);

// Rebuilds the planner-visible part of an EnvState from observation features.
EnvState state_from_features(std::span<const double> obs, const EnvConfig& cfg);

// Signed-area side of a path relative to the start->goal line
// (positive = left of the line).
LatentMode classify_side(const Trajectory& tr);

}  // namespace sgad

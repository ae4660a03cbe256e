#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sgad/env.hpp"
#include "sgad/expert.hpp"
#include "sgad/infer.hpp"
#include "sgad/model.hpp"

namespace sgad {

struct EpisodeResult {
  bool success = false;
  int steps_used = 0;
  double final_goal_distance = 0.0;
  int mode_switches = 0;
  std::uint64_t seed = 0;
  bool diverged = false;

  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

// Replays the scripted expert as a chunk sampler (an upper-bound policy).
class ExpertSampler : public ChunkSampler {
 public:
  ExpertSampler(EnvConfig env, VariancePreset preset, PolicyConfig policy);
  const PolicyConfig& policy() const override { return policy_; }
  void begin_episode(Rng& rng) override;
  std::vector<ActionChunk> sample(std::span<const double> obs_window, int n,
                                  Rng& rng, const GuidanceRequest* guidance) override;

 private:
  EnvConfig env_;
  VariancePreset preset_;
  PolicyConfig policy_;
  ExpertController controller_;
};

// One closed-loop episode. policy.h sets the execution horizon; the
// sampler's c, l and obs_dim must agree with policy.
EpisodeResult rollout(ChunkSampler& sampler, const EnvConfig& env,
                      const PolicyConfig& policy, const StrategyConfig& strategy,
                      std::uint64_t seed);
// Checkpoint convenience: builds a DiffusionSampler with the given schedule.
EpisodeResult rollout(const Checkpoint& ck, const EnvConfig& env,
                      const PolicyConfig& policy, const StrategyConfig& strategy,
                      const SigmaSchedule& schedule, std::uint64_t seed);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 0.0;
};
WilsonInterval wilson_interval(int successes, int n, double z = 1.959963984540054);

struct ResultRow {
  std::string env_id;
  std::string preset;
  double goal_speed = 0.0;
  int h = 1;
  int n_samples = 1;
  std::string strategy;
  double beta = 0.0;
  double obs_noise_sigma = 0.0;
  int n_episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  double mean_steps = 0.0;
  double mean_mode_switches = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

ResultRow summarize(const std::vector<EpisodeResult>& episodes);

// One evaluation cell of a sweep.
struct Cell {
  std::string preset = "low";
  double goal_speed = 0.0;
  int h = 1;
  int n_samples = 1;
  StrategyKind strategy = StrategyKind::kRandom;
  double beta = 0.0;
  double obs_noise_sigma = 0.0;
};

struct SweepSpec {
  EnvConfig env;  // base config; preset jitter, speed and noise are per cell
  StrategyConfig strategy;  // guidance decay, cadence, ensemble decay
  SigmaSchedule schedule;
  std::vector<std::string> presets = {"low"};
  std::vector<double> goal_speeds = {0.0};
  std::vector<int> horizons = {1};
  std::vector<int> n_samples = {1};
  std::vector<StrategyKind> strategies = {StrategyKind::kRandom};
  std::vector<double> betas = {0.0};
  std::vector<double> obs_noise = {0.0};
  int episodes = 200;
  std::uint64_t base_seed = 0;

  // Cartesian product in a fixed axis order. beta only varies for selfgad
  // cells; other strategies take the first beta.
  std::vector<Cell> cells() const;
};

// Checkpoints keyed by preset name.
using CheckpointSet = std::map<std::string, const Checkpoint*>;

ResultRow evaluate_cell(const SweepSpec& spec, const Cell& cell,
                        const CheckpointSet& checkpoints);
std::vector<ResultRow> sweep(const SweepSpec& spec, const CheckpointSet& checkpoints);
// Same, over an explicit cell list (any order).
std::vector<ResultRow> sweep_cells(const SweepSpec& spec, const std::vector<Cell>& cells,
                                   const CheckpointSet& checkpoints);

struct BetaCurve {
  double best_beta = 0.0;
  std::vector<ResultRow> rows;  // one per beta, in grid order
};

// Argmax success over the grid; ties go to the smaller beta.
BetaCurve tune_beta(const Checkpoint& ck, const SweepSpec& spec, const Cell& base,
                    const std::vector<double>& beta_grid);

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::string csv_text(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& path);
std::vector<ResultRow> parse_csv_text(const std::string& text);

struct PlotStatus {
  std::vector<std::string> files;
  bool warning = false;  // no rows to plot
};

PlotStatus emit_plots(const std::string& csv_path, const std::string& out_dir);

}  // namespace sgad

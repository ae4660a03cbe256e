#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgad/core.hpp"
#include "sgad/model.hpp"
#include "sgad/rng.hpp"

namespace sgad {

struct SigmaSchedule {
  double sigma_max = 80.0;
  double sigma_min = 0.002;
  int n_steps = 18;
  double rho = 7.0;
  std::vector<double> grid;  // n_steps + 1 values, descending, terminal 0
};

SigmaSchedule build_schedule(double sigma_max, double sigma_min, int n_steps,
                             double rho);

enum class GradTarget { kNoisyIterate, kDenoisedEstimate };

struct GuidanceConfig {
  double beta = 0.0;
  double decay = 0.5;
  bool apply_every_step = true;
  int last_k = 0;  // steps guided when apply_every_step is false
  GradTarget target = GradTarget::kNoisyIterate;

  void validate() const;
  bool active_at(int step, int n_steps) const;
};

enum class StrategyKind { kRandom, kCoherence, kEnsemble, kSelfGuided };

std::string to_string(StrategyKind k);
StrategyKind strategy_from_string(const std::string& name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kRandom;
  int n_samples = 1;
  GuidanceConfig guidance;
  double ensemble_decay = 0.5;

  void validate() const;
};

// (D(x) - x) / sigma^2.
Matrix score(const DenoiserParams& p, const Matrix& x, double sigma,
             std::span<const double> obs);

// Weighted squared deviation over the overlap with a prior born h steps ago.
double guidance_loss(const ActionChunk& current, const PriorChunk& prior, int h,
                     double decay);
// Gradient of guidance_loss with respect to current; rows outside the
// overlap are zero.
Matrix guidance_grad(const ActionChunk& current, const PriorChunk& prior, int h,
                     double decay);
// Descent step x <- x - beta * |step_size| * grad. No-op for beta == 0 or an
// empty overlap.
void apply_guidance(Matrix& x, const PriorChunk& prior, const GuidanceConfig& cfg,
                    int h, double sigma, double step_size);

// Guidance anchor expressed in the sampler's (normalized) space.
struct GuidanceRequest {
  GuidanceConfig config;
  PriorChunk prior;
  int h = 1;
};

// Euler integration of the probability-flow ODE in normalized space for a
// batch of candidates. Candidate i draws its initial noise from rng.fork(i).
// obs is the normalized observation window. Throws DivergenceError.
std::vector<Matrix> ode_sample_normalized(const DenoiserParams& p,
                                          std::span<const double> obs,
                                          const SigmaSchedule& schedule, Rng& rng,
                                          int n_candidates,
                                          const GuidanceRequest* guidance = nullptr);

// World-unit wrapper: normalizes the observation window and prior, samples
// one chunk and maps it back.
ActionChunk ode_sample(const Checkpoint& ck, std::span<const double> obs_window,
                       const SigmaSchedule& schedule, Rng& rng,
                       const std::optional<std::pair<GuidanceConfig, PriorChunk>>&
                           guidance = std::nullopt,
                       int h = 1);

std::size_t select_random(std::span<const ActionChunk> candidates, Rng& rng);
// Index minimizing guidance_loss against prior; ties go to the lowest index.
// With an empty overlap it falls back to select_random.
std::size_t select_coherent(std::span<const ActionChunk> candidates,
                            const PriorChunk& prior, int h, double decay, Rng& rng);

struct TimedChunk {
  ActionChunk chunk;
  std::int64_t birth_time = 0;
};

// Weighted average (weight decay^age) of every buffered prediction for
// absolute timestep t.
std::vector<double> temporal_ensemble(std::span<const TimedChunk> buffer,
                                      std::int64_t t, double decay);

// Source of candidate chunks in world units.
class ChunkSampler {
 public:
  virtual ~ChunkSampler() = default;
  virtual const PolicyConfig& policy() const = 0;
  virtual void begin_episode(Rng& /*rng*/) {}
  // guidance, when set, holds the prior in world units.
  virtual std::vector<ActionChunk> sample(std::span<const double> obs_window, int n,
                                          Rng& rng,
                                          const GuidanceRequest* guidance) = 0;
};

class DiffusionSampler : public ChunkSampler {
 public:
  DiffusionSampler(const Checkpoint& ck, SigmaSchedule schedule);
  const PolicyConfig& policy() const override { return policy_; }
  std::vector<ActionChunk> sample(std::span<const double> obs_window, int n,
                                  Rng& rng, const GuidanceRequest* guidance) override;
  void set_horizon(int h) { policy_.h = h; }

 private:
  const Checkpoint& ck_;
  PolicyConfig policy_;
  SigmaSchedule schedule_;
};

// One replanning decision for the random / coherence / self-guided
// strategies. prior is null at the first decision.
ActionChunk decide(const StrategyConfig& strategy, ChunkSampler& sampler,
                   std::span<const double> obs_window, const PriorChunk* prior,
                   int h, Rng& rng);

}  // namespace sgad

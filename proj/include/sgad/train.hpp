#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "sgad/core.hpp"
#include "sgad/model.hpp"
#include "sgad/rng.hpp"

namespace sgad {

struct TrainConfig {
  int batch_size = 64;
  int steps = 8000;
  double learning_rate = 3e-4;
  double p_mean = -1.2;
  double p_std = 1.2;
  double sigma_data = 0.5;
  std::uint64_t seed = 0;
  double eval_fraction = 0.1;
  int eval_interval = 500;
  std::vector<int> hidden = {256, 256, 256};

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);

// sigma = exp(p_mean + p_std * z), z standard normal.
double sample_sigma(const TrainConfig& cfg, Rng& rng);

// Sliding-window (observation window, chunk) pairs in world units. Windows
// before the first state repeat it; chunk rows past the end repeat the last
// action (and state).
struct ChunkSet {
  Matrix obs;     // N x (c * obs_dim)
  Matrix chunks;  // N x (l * chunk_width)
};

ChunkSet make_chunks(const Dataset& d, const PolicyConfig& policy);
ChunkSet make_chunks(std::span<const Trajectory> trajectories,
                     const PolicyConfig& policy);

// Per-column statistics over the trajectories' actions (and states for
// predicted-state channels) and observations.
Normalizer fit_normalizer(std::span<const Trajectory> trajectories,
                          const PolicyConfig& policy, double target_std);

// Mean over batch of lambda(sigma) * mean_j (denoised - clean)^2, and its
// gradient with respect to the denoised outputs.
struct WeightedLoss {
  double loss = 0.0;
  Matrix grad;  // d loss / d denoised
};
WeightedLoss weighted_denoising_loss(const Matrix& denoised, const Matrix& clean,
                                     std::span<const double> sigmas,
                                     const Preconditioning& pc);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grads;  // parameter gradient, flat layout
};

// Loss with explicit noise levels and noise draws.
LossResult denoising_loss_fixed(const DenoiserParams& p, const Matrix& obs,
                                const Matrix& clean, std::span<const double> sigmas,
                                const Matrix& noise, bool want_grads = true);

// Draws sigma and noise per sample from rng.
LossResult denoising_loss(const DenoiserParams& p, const Matrix& obs,
                          const Matrix& clean, Rng& rng, const TrainConfig& cfg,
                          bool want_grads = true);

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

void adam_update(std::vector<double>& params, std::span<const double> grads,
                 AdamState& state, double lr);

// Full training run. The returned checkpoint's weights are already rounded
// to their float32 storage values.
Checkpoint train(const Dataset& dataset, const PolicyConfig& policy,
                 const TrainConfig& cfg);

}  // namespace sgad

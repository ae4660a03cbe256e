#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgad/core.hpp"

namespace sgad {

enum class Activation { kSilu, kIdentity };

struct DenoiserDims {
  int chunk_len = 8;    // l
  int chunk_width = 2;  // action_dim (+ obs_dim with predicted states)
  int context = 1;      // c
  int obs_dim = 4;
  std::vector<int> hidden = {256, 256, 256};
  int emb_dim = 16;
  Activation activation = Activation::kSilu;

  int chunk_size() const { return chunk_len * chunk_width; }
  int obs_size() const { return context * obs_dim; }
  int input_dim() const { return chunk_size() + obs_size() + emb_dim; }
  int output_dim() const { return chunk_size(); }
  void validate() const;

  friend bool operator==(const DenoiserDims&, const DenoiserDims&) = default;
};

DenoiserDims dims_for(const PolicyConfig& policy, std::vector<int> hidden);

// Input/output scalings that keep the network's regression target at unit
// scale for every noise level.
struct Preconditioning {
  double sigma_data = 0.5;

  double c_skip(double sigma) const;
  double c_out(double sigma) const;
  double c_in(double sigma) const;
  static double c_noise(double sigma);
  // Loss weight 1 / c_out^2.
  double loss_weight(double sigma) const;

  friend bool operator==(const Preconditioning&, const Preconditioning&) = default;
};

// One dense layer's slice of the flat parameter vector.
struct LayerView {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;  // in x out, transposed
  std::size_t bias_offset = 0;

  friend bool operator==(const LayerView&, const LayerView&) = default;
};

class DenoiserParams {
 public:
  DenoiserParams() = default;
  DenoiserParams(DenoiserDims dims, double sigma_data);

  const DenoiserDims& dims() const { return dims_; }
  const Preconditioning& precond() const { return precond_; }
  const std::vector<LayerView>& layers() const { return layers_; }
  std::vector<double>& flat() { return flat_; }
  const std::vector<double>& flat() const { return flat_; }
  std::size_t size() const { return flat_.size(); }

  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> weights(std::size_t layer);
  std::span<double> bias(std::size_t layer);

  bool all_finite() const;

  friend bool operator==(const DenoiserParams&, const DenoiserParams&) = default;

 private:
  DenoiserDims dims_;
  Preconditioning precond_;
  std::vector<LayerView> layers_;
  std::vector<double> flat_;
};

// Fan-in scaled uniform weights, zero biases.
DenoiserParams init_params(std::uint64_t seed, const DenoiserDims& dims,
                           double sigma_data = 0.5);

// Sinusoidal features of c_noise.
void noise_embedding(double c_noise, std::span<double> out);

// Activations retained by the forward pass for backpropagation.
struct ForwardCache {
  std::size_t batch = 0;
  std::vector<std::vector<double>> inputs;  // per layer, batch x in
  std::vector<std::vector<double>> pre;     // per hidden layer, batch x out
  std::vector<double> sigmas;
};

// Batched D(x; sigma, obs). x is batch x chunk_size, obs is batch x obs_size,
// one sigma per row.
Matrix denoise_batch(const DenoiserParams& p, const Matrix& x,
                     std::span<const double> sigmas, const Matrix& obs,
                     ForwardCache* cache = nullptr);

struct DenoiserGrads {
  std::vector<double> params;  // same layout as DenoiserParams::flat()
  Matrix input;                // batch x chunk_size
};

// Reverse pass for a cached forward pass; upstream is dL/dD, batch x
// chunk_size. Parameter gradients are summed over the batch.
DenoiserGrads denoise_backward_batch(const DenoiserParams& p,
                                     const ForwardCache& cache,
                                     const Matrix& upstream);

// Single-sample convenience wrappers. x has chunk_len rows.
Matrix denoise(const DenoiserParams& p, const Matrix& x, double sigma,
               std::span<const double> obs);
DenoiserGrads denoise_backward(const DenoiserParams& p, const Matrix& x,
                               double sigma, std::span<const double> obs,
                               const Matrix& upstream);

// Per-dimension affine map to zero mean and standard deviation sigma_data.
struct Normalizer {
  std::vector<double> chunk_mean, chunk_std;  // per chunk column
  std::vector<double> obs_mean, obs_std;      // per observation feature
  double target_std = 1.0;

  double normalize_chunk(double v, std::size_t col) const {
    return (v - chunk_mean[col]) / chunk_std[col] * target_std;
  }
  double denormalize_chunk(double v, std::size_t col) const {
    return v / target_std * chunk_std[col] + chunk_mean[col];
  }
  double normalize_obs(double v, std::size_t col) const {
    return (v - obs_mean[col]) / obs_std[col];
  }
  Matrix normalize(const ActionChunk& chunk) const;
  ActionChunk denormalize(const Matrix& chunk) const;
  std::vector<double> normalize_window(std::span<const double> window) const;

  static Normalizer identity(int chunk_width, int obs_dim, double target_std);

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

struct Checkpoint {
  PolicyConfig policy;
  DenoiserParams params;
  Normalizer normalizer;
  nlohmann::json train_meta;  // config echo and loss curves
};

inline constexpr char kCheckpointMagic[] = "SGADCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Weights are stored as float32; reading back yields the rounded values.
void checkpoint_write(const Checkpoint& c, const std::string& path);
Checkpoint checkpoint_read(const std::string& path);
// Rounds every weight to float32 so an in-memory checkpoint matches its file.
void round_to_storage(DenoiserParams& p);

}  // namespace sgad

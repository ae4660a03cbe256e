#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sgad {

// Dense row-major matrix of doubles. Used for action chunks and batches.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return values_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }
  std::span<double> row(std::size_t r) {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// l rows of chunk_width columns. The first action_dim columns are actions;
// optional predicted-state channels follow.
using ActionChunk = Matrix;

struct PolicyConfig {
  int c = 1;  // context length
  int l = 8;  // prediction length
  int h = 1;  // execution horizon
  int action_dim = 2;
  int obs_dim = 4;
  // Append predicted future states to each chunk row.
  bool predict_states = false;

  int chunk_width() const { return action_dim + (predict_states ? obs_dim : 0); }
  void validate() const;

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

// A chunk and the timestep at which it was generated.
struct PriorChunk {
  ActionChunk chunk;
  std::int64_t birth_time = 0;
};

struct Trajectory {
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<float> states;   // T x obs_dim
  std::vector<float> actions;  // T x action_dim

  std::size_t length() const {
    return obs_dim > 0 ? states.size() / static_cast<std::size_t>(obs_dim) : 0;
  }
  std::span<const float> state(std::size_t t) const {
    return {states.data() + t * obs_dim, static_cast<std::size_t>(obs_dim)};
  }
  std::span<const float> action(std::size_t t) const {
    return {actions.data() + t * action_dim,
            static_cast<std::size_t>(action_dim)};
  }
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct DatasetMeta {
  std::string env_id;
  std::string preset;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  DatasetMeta meta;

  int obs_dim() const;
  int action_dim() const;
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Weights decay^k for the l - h overlapping timesteps between a chunk born
// h steps ago and the current one. Empty when h == l.
std::vector<double> overlap_weights(int l, int h, double decay = 0.5);

struct Overlap {
  Matrix prior;    // prior rows h .. l-1
  Matrix current;  // current rows 0 .. l-h-1
};

// Rows of both chunks that cover the same absolute timesteps, assuming the
// prior was born exactly h steps before the current chunk.
Overlap extract_overlap(const PriorChunk& prior, const ActionChunk& current,
                        int h);

// Throws ContractViolation unless now - prior.birth_time == h.
void check_prior_age(const PriorChunk& prior, std::int64_t now, int h);

}  // namespace sgad

#include "sgad/core.hpp"

#include <cmath>

#include "sgad/errors.hpp"

namespace sgad {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw InvalidInput("matrix payload does not match its shape");
  }
}

bool Matrix::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void PolicyConfig::validate() const {
  if (c < 1) throw InvalidConfig("policy.c must be >= 1");
  if (l < 1) throw InvalidConfig("policy.l must be >= 1");
  if (h < 1 || h > l) throw InvalidConfig("policy.h must lie in [1, l]");
  if (action_dim < 1) throw InvalidConfig("policy.action_dim must be >= 1");
  if (obs_dim < 1) throw InvalidConfig("policy.obs_dim must be >= 1");
}

void Trajectory::validate() const {
  if (obs_dim < 1 || action_dim < 1) {
    throw InvalidInput("trajectory dimensions must be positive");
  }
  if (states.size() % obs_dim != 0 || actions.size() % action_dim != 0) {
    throw InvalidInput("trajectory payload is not a whole number of rows");
  }
  const std::size_t t = states.size() / obs_dim;
  if (t == 0 || actions.size() / action_dim != t) {
    throw InvalidInput("trajectory states and actions must have equal length >= 1");
  }
  for (float v : states) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite trajectory state");
  }
  for (float v : actions) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite trajectory action");
  }
}

int Dataset::obs_dim() const {
  return trajectories.empty() ? 0 : trajectories.front().obs_dim;
}

int Dataset::action_dim() const {
  return trajectories.empty() ? 0 : trajectories.front().action_dim;
}

void Dataset::validate() const {
  if (trajectories.empty()) throw InvalidInput("dataset is empty");
  for (const auto& tr : trajectories) {
    tr.validate();
    if (tr.obs_dim != obs_dim() || tr.action_dim != action_dim()) {
      throw InvalidInput("trajectories disagree on obs_dim/action_dim");
    }
  }
}

std::vector<double> overlap_weights(int l, int h, double decay) {
  if (h < 1 || h > l) throw InvalidConfig("overlap requires 1 <= h <= l");
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw InvalidConfig("overlap decay must lie in (0, 1]");
  }
  std::vector<double> w(static_cast<std::size_t>(l - h));
  double v = 1.0;
  for (auto& x : w) {
    x = v;
    v *= decay;
  }
  return w;
}

Overlap extract_overlap(const PriorChunk& prior, const ActionChunk& current,
                        int h) {
  const ActionChunk& p = prior.chunk;
  if (p.rows() != current.rows() || p.cols() != current.cols()) {
    throw InvalidInput("prior and current chunks differ in shape");
  }
  const auto l = static_cast<int>(current.rows());
  if (h < 1 || h > l) throw InvalidInput("overlap requires 1 <= h <= l");
  const std::size_t n = static_cast<std::size_t>(l - h);
  Overlap out{Matrix(n, p.cols()), Matrix(n, p.cols())};
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      out.prior(k, j) = p(k + h, j);
      out.current(k, j) = current(k, j);
    }
  }
  return out;
}

void check_prior_age(const PriorChunk& prior, std::int64_t now, int h) {
  if (now - prior.birth_time != h) {
    throw ContractViolation("prior chunk age " +
                            std::to_string(now - prior.birth_time) +
                            " differs from execution horizon " +
                            std::to_string(h));
  }
}

}  // namespace sgad

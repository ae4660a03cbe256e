#include "sgad/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgad/errors.hpp"

namespace sgad {

using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidConfig("train.batch_size must be >= 1");
  if (steps < 0) throw InvalidConfig("train.steps must be >= 0");
  if (!(learning_rate > 0)) throw InvalidConfig("train.learning_rate must be > 0");
  if (!(p_std > 0)) throw InvalidConfig("train.p_std must be > 0");
  if (!(sigma_data > 0)) throw InvalidConfig("train.sigma_data must be > 0");
  if (!(eval_fraction > 0 && eval_fraction < 0.5)) {
    throw InvalidConfig("train.eval_fraction must lie in (0, 0.5)");
  }
  if (eval_interval < 1) throw InvalidConfig("train.eval_interval must be >= 1");
  for (int w : hidden) {
    if (w < 1) throw InvalidConfig("train.hidden widths must be >= 1");
  }
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},       {"steps", c.steps},
          {"learning_rate", c.learning_rate}, {"p_mean", c.p_mean},
          {"p_std", c.p_std},                 {"sigma_data", c.sigma_data},
          {"seed", c.seed},                   {"eval_fraction", c.eval_fraction},
          {"eval_interval", c.eval_interval}, {"hidden", c.hidden}};
}

double sample_sigma(const TrainConfig& cfg, Rng& rng) {
  return std::exp(cfg.p_mean + cfg.p_std * rng.normal());
}

ChunkSet make_chunks(std::span<const Trajectory> trajectories,
                     const PolicyConfig& policy) {
  policy.validate();
  std::size_t total = 0;
  for (const auto& tr : trajectories) {
    if (tr.obs_dim != policy.obs_dim || tr.action_dim != policy.action_dim) {
      throw InvalidConfig("dataset dims do not match policy config");
    }
    total += tr.length();
  }
  if (total == 0) throw InvalidConfig("dataset yields no training chunks");
  const auto width = static_cast<std::size_t>(policy.chunk_width());
  const auto obs_dim = static_cast<std::size_t>(policy.obs_dim);
  ChunkSet set{Matrix(total, policy.c * obs_dim), Matrix(total, policy.l * width)};
  std::size_t n = 0;
  for (const auto& tr : trajectories) {
    const auto len = static_cast<long>(tr.length());
    for (long t = 0; t < len; ++t, ++n) {
      auto obs = set.obs.row(n);
      for (int k = 0; k < policy.c; ++k) {
        const long src = std::max(0L, t - policy.c + 1 + k);
        const auto s = tr.state(static_cast<std::size_t>(src));
        std::copy(s.begin(), s.end(), obs.begin() + k * obs_dim);
      }
      auto chunk = set.chunks.row(n);
      for (int k = 0; k < policy.l; ++k) {
        const auto src = static_cast<std::size_t>(std::min(len - 1, t + k));
        const auto a = tr.action(src);
        std::copy(a.begin(), a.end(), chunk.begin() + k * width);
        if (policy.predict_states) {
          const auto s = tr.state(static_cast<std::size_t>(std::min(len - 1, t + k + 1)));
          std::copy(s.begin(), s.end(), chunk.begin() + k * width + policy.action_dim);
        }
      }
    }
  }
  return set;
}

ChunkSet make_chunks(const Dataset& d, const PolicyConfig& policy) {
  return make_chunks(std::span<const Trajectory>(d.trajectories), policy);
}

namespace {

void mean_std(const std::vector<double>& sum, const std::vector<double>& sq,
              double count, std::vector<double>& mean, std::vector<double>& stdev) {
  mean.resize(sum.size());
  stdev.resize(sum.size());
  for (std::size_t k = 0; k < sum.size(); ++k) {
    mean[k] = sum[k] / count;
    const double var = std::max(0.0, sq[k] / count - mean[k] * mean[k]);
    const double s = std::sqrt(var);
    stdev[k] = s > 1e-6 ? s : 1.0;
  }
}

}  // namespace

Normalizer fit_normalizer(std::span<const Trajectory> trajectories,
                          const PolicyConfig& policy, double target_std) {
  const auto ad = static_cast<std::size_t>(policy.action_dim);
  const auto od = static_cast<std::size_t>(policy.obs_dim);
  std::vector<double> asum(ad), asq(ad), osum(od), osq(od);
  double count = 0;
  for (const auto& tr : trajectories) {
    for (std::size_t t = 0; t < tr.length(); ++t) {
      const auto a = tr.action(t);
      const auto s = tr.state(t);
      for (std::size_t k = 0; k < ad; ++k) {
        asum[k] += a[k];
        asq[k] += static_cast<double>(a[k]) * a[k];
      }
      for (std::size_t k = 0; k < od; ++k) {
        osum[k] += s[k];
        osq[k] += static_cast<double>(s[k]) * s[k];
      }
      count += 1;
    }
  }
  if (count == 0) throw InvalidConfig("cannot fit normalizer on an empty dataset");
  Normalizer n;
  n.target_std = target_std;
  mean_std(asum, asq, count, n.chunk_mean, n.chunk_std);
  mean_std(osum, osq, count, n.obs_mean, n.obs_std);
  if (policy.predict_states) {
    n.chunk_mean.insert(n.chunk_mean.end(), n.obs_mean.begin(), n.obs_mean.end());
    n.chunk_std.insert(n.chunk_std.end(), n.obs_std.begin(), n.obs_std.end());
  }
  return n;
}

WeightedLoss weighted_denoising_loss(const Matrix& denoised, const Matrix& clean,
                                     std::span<const double> sigmas,
                                     const Preconditioning& pc) {
  if (denoised.rows() != clean.rows() || denoised.cols() != clean.cols() ||
      sigmas.size() != clean.rows() || clean.rows() == 0) {
    throw InvalidInput("denoising loss: shape mismatch or empty batch");
  }
  const double batch = static_cast<double>(clean.rows());
  const double width = static_cast<double>(clean.cols());
  WeightedLoss out{0.0, Matrix(clean.rows(), clean.cols())};
  for (std::size_t b = 0; b < clean.rows(); ++b) {
    const double lambda = pc.loss_weight(sigmas[b]);
    double sq = 0.0;
    for (std::size_t j = 0; j < clean.cols(); ++j) {
      const double d = denoised(b, j) - clean(b, j);
      sq += d * d;
      out.grad(b, j) = 2.0 * lambda * d / (width * batch);
    }
    out.loss += lambda * sq / width;
  }
  out.loss /= batch;
  return out;
}

LossResult denoising_loss_fixed(const DenoiserParams& p, const Matrix& obs,
                                const Matrix& clean, std::span<const double> sigmas,
                                const Matrix& noise, bool want_grads) {
  if (!clean.all_finite() || !obs.all_finite()) {
    throw NumericInput("denoising loss: non-finite batch");
  }
  Matrix noisy = clean;
  for (std::size_t k = 0; k < noisy.size(); ++k) noisy.flat()[k] += noise.flat()[k];
  ForwardCache cache;
  const Matrix denoised = denoise_batch(p, noisy, sigmas, obs, want_grads ? &cache : nullptr);
  auto wl = weighted_denoising_loss(denoised, clean, sigmas, p.precond());
  LossResult r{wl.loss, {}};
  if (want_grads) r.grads = denoise_backward_batch(p, cache, wl.grad).params;
  return r;
}

LossResult denoising_loss(const DenoiserParams& p, const Matrix& obs,
                          const Matrix& clean, Rng& rng, const TrainConfig& cfg,
                          bool want_grads) {
  if (clean.rows() == 0) throw InvalidInput("denoising loss: empty batch");
  std::vector<double> sigmas(clean.rows());
  Matrix noise(clean.rows(), clean.cols());
  for (std::size_t b = 0; b < clean.rows(); ++b) {
    sigmas[b] = sample_sigma(cfg, rng);
    for (double& v : noise.row(b)) v = sigmas[b] * rng.normal();
  }
  return denoising_loss_fixed(p, obs, clean, sigmas, noise, want_grads);
}

void adam_update(std::vector<double>& params, std::span<const double> grads,
                 AdamState& state, double lr) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = kBeta1 * state.m[k] + (1 - kBeta1) * grads[k];
    state.v[k] = kBeta2 * state.v[k] + (1 - kBeta2) * grads[k] * grads[k];
    params[k] -= lr * (state.m[k] / c1) / (std::sqrt(state.v[k] / c2) + kEps);
  }
}

namespace {

struct Split {
  std::vector<Trajectory> train, eval;
};

Split split_dataset(const Dataset& d, double eval_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(d.trajectories.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, 0x5EED);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  auto n_eval = static_cast<std::size_t>(std::floor(eval_fraction * order.size()));
  if (order.size() >= 2) n_eval = std::max<std::size_t>(1, n_eval);
  Split s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_eval ? s.eval : s.train).push_back(d.trajectories[order[i]]);
  }
  if (s.eval.empty()) s.eval = s.train;
  return s;
}

void normalize_set(ChunkSet& set, const Normalizer& n) {
  const std::size_t width = n.chunk_mean.size();
  for (std::size_t r = 0; r < set.chunks.rows(); ++r) {
    auto row = set.chunks.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = n.normalize_chunk(row[k], k % width);
    auto obs = set.obs.row(r);
    const auto win = n.normalize_window(obs);
    std::copy(win.begin(), win.end(), obs.begin());
  }
}

Matrix gather(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto src = m.row(idx[b]);
    std::copy(src.begin(), src.end(), out.row(b).begin());
  }
  return out;
}

}  // namespace

Checkpoint train(const Dataset& dataset, const PolicyConfig& policy,
                 const TrainConfig& cfg) {
  cfg.validate();
  policy.validate();
  dataset.validate();
  const Split split = split_dataset(dataset, cfg.eval_fraction, cfg.seed);

  Checkpoint ck;
  ck.policy = policy;
  ck.normalizer = fit_normalizer(split.train, policy, cfg.sigma_data);
  ChunkSet train_set = make_chunks(split.train, policy);
  ChunkSet eval_set = make_chunks(split.eval, policy);
  normalize_set(train_set, ck.normalizer);
  normalize_set(eval_set, ck.normalizer);

  ck.params = init_params(cfg.seed, dims_for(policy, cfg.hidden), cfg.sigma_data);

  // Fixed evaluation batch: same pairs, noise levels and draws every time.
  Rng eval_rng(cfg.seed, 0xE7A1);
  const std::size_t n_eval = std::min<std::size_t>(512, eval_set.chunks.rows());
  std::vector<std::size_t> eval_idx(n_eval);
  for (auto& i : eval_idx) i = eval_rng.uniform_index(eval_set.chunks.rows());
  const Matrix eval_obs = gather(eval_set.obs, eval_idx);
  const Matrix eval_clean = gather(eval_set.chunks, eval_idx);
  std::vector<double> eval_sigmas(n_eval);
  Matrix eval_noise(n_eval, eval_clean.cols());
  for (std::size_t b = 0; b < n_eval; ++b) {
    eval_sigmas[b] = sample_sigma(cfg, eval_rng);
    for (double& v : eval_noise.row(b)) v = eval_sigmas[b] * eval_rng.normal();
  }
  auto eval_loss = [&] {
    return denoising_loss_fixed(ck.params, eval_obs, eval_clean, eval_sigmas,
                                eval_noise, false)
        .loss;
  };

  json eval_curve = json::array();
  json train_curve = json::array();  // mean train loss per 100-step window
  eval_curve.push_back({0, eval_loss()});

  Rng rng(cfg.seed, 0x7A1);
  AdamState adam;
  std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.batch_size));
  double window_sum = 0.0;
  int window_count = 0;
  for (int step = 1; step <= cfg.steps; ++step) {
    for (auto& i : idx) i = rng.uniform_index(train_set.chunks.rows());
    const Matrix obs = gather(train_set.obs, idx);
    const Matrix clean = gather(train_set.chunks, idx);
    const LossResult r = denoising_loss(ck.params, obs, clean, rng, cfg);
    if (!std::isfinite(r.loss)) {
      throw NumericInput("training loss became non-finite at step " + std::to_string(step));
    }
    adam_update(ck.params.flat(), r.grads, adam, cfg.learning_rate);
    window_sum += r.loss;
    if (++window_count == 100 || step == cfg.steps) {
      train_curve.push_back(window_sum / window_count);
      window_sum = 0.0;
      window_count = 0;
    }
    if (step % cfg.eval_interval == 0 || step == cfg.steps) {
      eval_curve.push_back({step, eval_loss()});
    }
  }
  round_to_storage(ck.params);

  ck.train_meta = {{"config", to_json(cfg)},
                   {"dataset", {{"env_id", dataset.meta.env_id},
                                {"preset", dataset.meta.preset},
                                {"seed", dataset.meta.seed},
                                {"trajectories", dataset.trajectories.size()}}},
                   {"train_pairs", train_set.chunks.rows()},
                   {"eval_pairs", eval_set.chunks.rows()},
                   {"eval_loss", eval_curve},
                   {"train_loss_per_100", train_curve}};
  return ck;
}

}  // namespace sgad

#include "sgad/infer.hpp"

#include <cmath>
#include <limits>

#include "sgad/errors.hpp"

namespace sgad {

SigmaSchedule build_schedule(double sigma_max, double sigma_min, int n_steps,
                             double rho) {
  if (!(sigma_max > sigma_min && sigma_min > 0)) {
    throw InvalidConfig("schedule requires sigma_max > sigma_min > 0");
  }
  if (n_steps < 2) throw InvalidConfig("schedule.n_steps must be >= 2");
  if (!(rho > 0)) throw InvalidConfig("schedule.rho must be > 0");
  SigmaSchedule s{sigma_max, sigma_min, n_steps, rho, {}};
  const double a = std::pow(sigma_max, 1.0 / rho);
  const double b = std::pow(sigma_min, 1.0 / rho);
  for (int i = 0; i < n_steps; ++i) {
    const double frac = static_cast<double>(i) / (n_steps - 1);
    s.grid.push_back(std::pow(a + frac * (b - a), rho));
  }
  s.grid.front() = sigma_max;
  s.grid[n_steps - 1] = sigma_min;
  s.grid.push_back(0.0);
  return s;
}

void GuidanceConfig::validate() const {
  if (!(beta >= 0)) throw InvalidConfig("guidance.beta must be >= 0");
  if (!(decay > 0 && decay <= 1)) throw InvalidConfig("guidance.decay must lie in (0, 1]");
  if (last_k < 0) throw InvalidConfig("guidance.last_k must be >= 0");
}

bool GuidanceConfig::active_at(int step, int n_steps) const {
  return apply_every_step || step >= n_steps - last_k;
}

std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::kRandom: return "random";
    case StrategyKind::kCoherence: return "coherence";
    case StrategyKind::kEnsemble: return "ensemble";
    case StrategyKind::kSelfGuided: return "selfgad";
  }
  return "?";
}

StrategyKind strategy_from_string(const std::string& name) {
  if (name == "random") return StrategyKind::kRandom;
  if (name == "coherence") return StrategyKind::kCoherence;
  if (name == "ensemble") return StrategyKind::kEnsemble;
  if (name == "selfgad") return StrategyKind::kSelfGuided;
  throw InvalidConfig("strategy: unknown kind '" + name + "'");
}

void StrategyConfig::validate() const {
  if (n_samples < 1) throw InvalidConfig("strategy.n_samples must be >= 1");
  guidance.validate();
  if (!(ensemble_decay > 0 && ensemble_decay <= 1)) {
    throw InvalidConfig("strategy.ensemble_decay must lie in (0, 1]");
  }
}

Matrix score(const DenoiserParams& p, const Matrix& x, double sigma,
             std::span<const double> obs) {
  if (!(sigma > 0)) throw InvalidInput("score: sigma must be > 0");
  Matrix d = denoise(p, x, sigma, obs);
  const double inv = 1.0 / (sigma * sigma);
  for (std::size_t k = 0; k < d.size(); ++k) {
    d.flat()[k] = (d.flat()[k] - x.flat()[k]) * inv;
  }
  return d;
}

namespace {

void require_overlap(const ActionChunk& current, int h) {
  if (h >= static_cast<int>(current.rows())) {
    throw InvalidInput("guidance: empty overlap (h == l); skip guidance");
  }
}

}  // namespace

double guidance_loss(const ActionChunk& current, const PriorChunk& prior, int h,
                     double decay) {
  require_overlap(current, h);
  const Overlap ov = extract_overlap(prior, current, h);
  const auto w = overlap_weights(static_cast<int>(current.rows()), h, decay);
  double loss = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    double sq = 0.0;
    for (std::size_t j = 0; j < current.cols(); ++j) {
      const double d = ov.current(k, j) - ov.prior(k, j);
      sq += d * d;
    }
    loss += w[k] * sq;
  }
  return loss;
}

Matrix guidance_grad(const ActionChunk& current, const PriorChunk& prior, int h,
                     double decay) {
  require_overlap(current, h);
  const Overlap ov = extract_overlap(prior, current, h);
  const auto w = overlap_weights(static_cast<int>(current.rows()), h, decay);
  Matrix g(current.rows(), current.cols());
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (std::size_t j = 0; j < current.cols(); ++j) {
      g(k, j) = 2.0 * w[k] * (ov.current(k, j) - ov.prior(k, j));
    }
  }
  return g;
}

void apply_guidance(Matrix& x, const PriorChunk& prior, const GuidanceConfig& cfg,
                    int h, double /*sigma*/, double step_size) {
  if (cfg.beta == 0.0 || h >= static_cast<int>(x.rows())) return;
  const Matrix g = guidance_grad(x, prior, h, cfg.decay);
  const double scale = cfg.beta * std::abs(step_size);
  for (std::size_t k = 0; k < x.size(); ++k) x.flat()[k] -= scale * g.flat()[k];
}

std::vector<Matrix> ode_sample_normalized(const DenoiserParams& p,
                                          std::span<const double> obs,
                                          const SigmaSchedule& schedule, Rng& rng,
                                          int n_candidates,
                                          const GuidanceRequest* guidance) {
  const auto& dims = p.dims();
  const auto rows = static_cast<std::size_t>(dims.chunk_len);
  const auto cols = static_cast<std::size_t>(dims.chunk_width);
  const std::size_t chunk = rows * cols;
  if (obs.size() != static_cast<std::size_t>(dims.obs_size())) {
    throw InvalidInput("ode_sample: observation window has the wrong width");
  }
  if (n_candidates < 1) throw InvalidInput("ode_sample: need at least one candidate");
  if (schedule.grid.size() != static_cast<std::size_t>(schedule.n_steps) + 1) {
    throw InvalidConfig("ode_sample: malformed schedule");
  }
  const auto n = static_cast<std::size_t>(n_candidates);

  Matrix x(n, chunk);
  for (std::size_t b = 0; b < n; ++b) {
    Rng child = rng.fork(b);
    for (double& v : x.row(b)) v = schedule.sigma_max * child.normal();
  }
  Matrix obs_batch(n, obs.size());
  for (std::size_t b = 0; b < n; ++b) std::copy(obs.begin(), obs.end(), obs_batch.row(b).begin());

  const bool guided = guidance != nullptr && guidance->config.beta != 0.0 &&
                      guidance->h < dims.chunk_len;
  std::vector<double> sig(n);
  Matrix row_chunk(rows, cols);
  auto guide_rows = [&](Matrix& m, double step) {
    for (std::size_t b = 0; b < n; ++b) {
      std::copy(m.row(b).begin(), m.row(b).end(), row_chunk.flat().begin());
      apply_guidance(row_chunk, guidance->prior, guidance->config, guidance->h, 0.0, step);
      std::copy(row_chunk.flat().begin(), row_chunk.flat().end(), m.row(b).begin());
    }
  };

  for (int i = 0; i < schedule.n_steps; ++i) {
    const double s0 = schedule.grid[i];
    const double s1 = schedule.grid[i + 1];
    std::fill(sig.begin(), sig.end(), s0);
    Matrix d = denoise_batch(p, x, sig, obs_batch);
    const bool guide_now = guided && guidance->config.active_at(i, schedule.n_steps);
    if (guide_now && guidance->config.target == GradTarget::kDenoisedEstimate) {
      guide_rows(d, s1 - s0);
    }
    const double ratio = (s1 - s0) / s0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      x.flat()[k] += ratio * (x.flat()[k] - d.flat()[k]);
    }
    if (guide_now && guidance->config.target == GradTarget::kNoisyIterate) {
      guide_rows(x, s1 - s0);
    }
    if (!x.all_finite()) throw DivergenceError("non-finite sampler iterate", i);
  }

  std::vector<Matrix> out;
  out.reserve(n);
  for (std::size_t b = 0; b < n; ++b) {
    out.emplace_back(rows, cols, std::vector<double>(x.row(b).begin(), x.row(b).end()));
  }
  return out;
}

namespace {

GuidanceRequest normalized_request(const GuidanceRequest& g, const Normalizer& n) {
  return {g.config, {n.normalize(g.prior.chunk), g.prior.birth_time}, g.h};
}

}  // namespace

ActionChunk ode_sample(const Checkpoint& ck, std::span<const double> obs_window,
                       const SigmaSchedule& schedule, Rng& rng,
                       const std::optional<std::pair<GuidanceConfig, PriorChunk>>& guidance,
                       int h) {
  const auto obs = ck.normalizer.normalize_window(obs_window);
  std::optional<GuidanceRequest> req;
  if (guidance) {
    req = normalized_request({guidance->first, guidance->second, h}, ck.normalizer);
  }
  auto out = ode_sample_normalized(ck.params, obs, schedule, rng, 1,
                                   req ? &*req : nullptr);
  return ck.normalizer.denormalize(out.front());
}

std::size_t select_random(std::span<const ActionChunk> candidates, Rng& rng) {
  if (candidates.empty()) throw InvalidInput("select_random: no candidates");
  if (candidates.size() == 1) return 0;
  return rng.uniform_index(candidates.size());
}

std::size_t select_coherent(std::span<const ActionChunk> candidates,
                            const PriorChunk& prior, int h, double decay, Rng& rng) {
  if (candidates.empty()) throw InvalidInput("select_coherent: no candidates");
  if (h >= static_cast<int>(candidates.front().rows())) {
    return select_random(candidates, rng);
  }
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double loss = guidance_loss(candidates[i], prior, h, decay);
    if (loss < best_loss) {
      best_loss = loss;
      best = i;
    }
  }
  return best;
}

std::vector<double> temporal_ensemble(std::span<const TimedChunk> buffer,
                                      std::int64_t t, double decay) {
  std::vector<double> acc;
  double total = 0.0;
  for (const auto& tc : buffer) {
    const std::int64_t age = t - tc.birth_time;
    if (age < 0 || age >= static_cast<std::int64_t>(tc.chunk.rows())) continue;
    const double w = std::pow(decay, static_cast<double>(age));
    const auto row = tc.chunk.row(static_cast<std::size_t>(age));
    if (acc.empty()) acc.assign(row.size(), 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) acc[j] += w * row[j];
    total += w;
  }
  if (acc.empty()) {
    throw InvalidState("temporal_ensemble: no buffered chunk covers timestep " +
                       std::to_string(t));
  }
  for (double& v : acc) v /= total;
  return acc;
}

DiffusionSampler::DiffusionSampler(const Checkpoint& ck, SigmaSchedule schedule)
    : ck_(ck), policy_(ck.policy), schedule_(std::move(schedule)) {}

std::vector<ActionChunk> DiffusionSampler::sample(std::span<const double> obs_window,
                                                  int n, Rng& rng,
                                                  const GuidanceRequest* guidance) {
  const auto obs = ck_.normalizer.normalize_window(obs_window);
  std::optional<GuidanceRequest> req;
  if (guidance) req = normalized_request(*guidance, ck_.normalizer);
  auto raw = ode_sample_normalized(ck_.params, obs, schedule_, rng, n,
                                   req ? &*req : nullptr);
  std::vector<ActionChunk> out;
  out.reserve(raw.size());
  for (const auto& m : raw) out.push_back(ck_.normalizer.denormalize(m));
  return out;
}

ActionChunk decide(const StrategyConfig& strategy, ChunkSampler& sampler,
                   std::span<const double> obs_window, const PriorChunk* prior,
                   int h, Rng& rng) {
  const int l = sampler.policy().l;
  const bool has_overlap = prior != nullptr && h < l;
  const bool guide = strategy.kind == StrategyKind::kSelfGuided && has_overlap;
  std::optional<GuidanceRequest> req;
  if (guide) req = GuidanceRequest{strategy.guidance, *prior, h};
  Rng sample_rng = rng.fork(0);
  Rng select_rng = rng.fork(1);
  auto candidates =
      sampler.sample(obs_window, strategy.n_samples, sample_rng, req ? &*req : nullptr);
  std::size_t pick;
  const bool coherent = has_overlap && (strategy.kind == StrategyKind::kCoherence ||
                                        strategy.kind == StrategyKind::kSelfGuided);
  if (coherent) {
    pick = select_coherent(candidates, *prior, h, strategy.guidance.decay, select_rng);
  } else {
    pick = select_random(candidates, select_rng);
  }
  return std::move(candidates[pick]);
}

}  // namespace sgad

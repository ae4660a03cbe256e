#include "sgad/model.hpp"

#include <cmath>

#include "sgad/binio.hpp"
#include "sgad/errors.hpp"
#include "sgad/kernels.hpp"
#include "sgad/rng.hpp"

namespace sgad {

using nlohmann::json;

void DenoiserDims::validate() const {
  if (chunk_len < 1 || chunk_width < 1 || context < 1 || obs_dim < 1) {
    throw InvalidConfig("denoiser dimensions must be positive");
  }
  if (emb_dim < 2 || emb_dim % 2 != 0) {
    throw InvalidConfig("noise embedding width must be a positive even number");
  }
  for (int w : hidden) {
    if (w < 1) throw InvalidConfig("model.hidden widths must be >= 1");
  }
}

DenoiserDims dims_for(const PolicyConfig& policy, std::vector<int> hidden) {
  DenoiserDims d;
  d.chunk_len = policy.l;
  d.chunk_width = policy.chunk_width();
  d.context = policy.c;
  d.obs_dim = policy.obs_dim;
  d.hidden = std::move(hidden);
  return d;
}

double Preconditioning::c_skip(double sigma) const {
  const double sd2 = sigma_data * sigma_data;
  return sd2 / (sigma * sigma + sd2);
}

double Preconditioning::c_out(double sigma) const {
  return sigma * sigma_data / std::sqrt(sigma * sigma + sigma_data * sigma_data);
}

double Preconditioning::c_in(double sigma) const {
  return 1.0 / std::sqrt(sigma * sigma + sigma_data * sigma_data);
}

double Preconditioning::c_noise(double sigma) { return std::log(sigma) / 4.0; }

double Preconditioning::loss_weight(double sigma) const {
  const double denom = sigma * sigma_data;
  return (sigma * sigma + sigma_data * sigma_data) / (denom * denom);
}

DenoiserParams::DenoiserParams(DenoiserDims dims, double sigma_data)
    : dims_(std::move(dims)), precond_{sigma_data} {
  dims_.validate();
  if (!(sigma_data > 0)) throw InvalidConfig("model.sigma_data must be > 0");
  std::vector<int> widths;
  widths.push_back(dims_.input_dim());
  widths.insert(widths.end(), dims_.hidden.begin(), dims_.hidden.end());
  widths.push_back(dims_.output_dim());
  std::size_t offset = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    LayerView v;
    v.in = widths[i];
    v.out = widths[i + 1];
    v.weight_offset = offset;
    offset += static_cast<std::size_t>(v.in) * v.out;
    v.bias_offset = offset;
    offset += static_cast<std::size_t>(v.out);
    layers_.push_back(v);
  }
  flat_.assign(offset, 0.0);
}

std::span<const double> DenoiserParams::weights(std::size_t layer) const {
  const auto& v = layers_[layer];
  return {flat_.data() + v.weight_offset, static_cast<std::size_t>(v.in) * v.out};
}
std::span<const double> DenoiserParams::bias(std::size_t layer) const {
  const auto& v = layers_[layer];
  return {flat_.data() + v.bias_offset, static_cast<std::size_t>(v.out)};
}
std::span<double> DenoiserParams::weights(std::size_t layer) {
  const auto& v = layers_[layer];
  return {flat_.data() + v.weight_offset, static_cast<std::size_t>(v.in) * v.out};
}
std::span<double> DenoiserParams::bias(std::size_t layer) {
  const auto& v = layers_[layer];
  return {flat_.data() + v.bias_offset, static_cast<std::size_t>(v.out)};
}

bool DenoiserParams::all_finite() const {
  for (double v : flat_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

DenoiserParams init_params(std::uint64_t seed, const DenoiserDims& dims,
                           double sigma_data) {
  DenoiserParams p(dims, sigma_data);
  Rng rng(seed, 0x1417);
  for (std::size_t i = 0; i < p.layers().size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.layers()[i].in));
    for (double& w : p.weights(i)) w = rng.uniform(-bound, bound);
  }
  return p;
}

void noise_embedding(double c_noise, std::span<double> out) {
  const std::size_t half = out.size() / 2;
  for (std::size_t k = 0; k < half; ++k) {
    // Frequencies 1 .. 16, geometrically spaced.
    const double freq =
        half > 1 ? std::pow(16.0, static_cast<double>(k) / (half - 1)) : 1.0;
    out[k] = std::sin(freq * c_noise);
    out[half + k] = std::cos(freq * c_noise);
  }
}

Matrix denoise_batch(const DenoiserParams& p, const Matrix& x,
                     std::span<const double> sigmas, const Matrix& obs,
                     ForwardCache* cache) {
  const auto& dims = p.dims();
  const std::size_t batch = x.rows();
  const auto chunk = static_cast<std::size_t>(dims.chunk_size());
  const auto obs_size = static_cast<std::size_t>(dims.obs_size());
  if (x.cols() != chunk || obs.rows() != batch || obs.cols() != obs_size ||
      sigmas.size() != batch) {
    throw InvalidInput("denoise: input shapes do not match the model");
  }
  for (double s : sigmas) {
    if (!(s > 0) || !std::isfinite(s)) throw NumericInput("denoise: sigma must be finite and > 0");
  }
  if (!x.all_finite() || !obs.all_finite()) {
    throw NumericInput("denoise: non-finite input");
  }
  const auto& pc = p.precond();
  const auto in_dim = static_cast<std::size_t>(dims.input_dim());

  std::vector<double> act(batch * in_dim);
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = act.data() + b * in_dim;
    const double c_in = pc.c_in(sigmas[b]);
    for (std::size_t j = 0; j < chunk; ++j) row[j] = c_in * x(b, j);
    for (std::size_t j = 0; j < obs_size; ++j) row[chunk + j] = obs(b, j);
    noise_embedding(Preconditioning::c_noise(sigmas[b]),
                    {row + chunk + obs_size, static_cast<std::size_t>(dims.emb_dim)});
  }
  if (cache) {
    cache->batch = batch;
    cache->inputs.clear();
    cache->pre.clear();
    cache->sigmas.assign(sigmas.begin(), sigmas.end());
  }

  const auto& layers = p.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& v = layers[li];
    const kernels::DenseShape shape{batch, static_cast<std::size_t>(v.in),
                                    static_cast<std::size_t>(v.out)};
    std::vector<double> y(batch * v.out);
    kernels::dense_forward(shape, act, p.weights(li), p.bias(li), y);
    const bool hidden = li + 1 < layers.size();
    if (cache) cache->inputs.push_back(std::move(act));
    if (hidden) {
      std::vector<double> a(y.size());
      if (dims.activation == Activation::kSilu) {
        kernels::silu_forward(y, a);
      } else {
        a = y;
      }
      if (cache) cache->pre.push_back(std::move(y));
      act = std::move(a);
    } else {
      act = std::move(y);
    }
  }

  Matrix out(batch, chunk);
  for (std::size_t b = 0; b < batch; ++b) {
    const double cs = pc.c_skip(sigmas[b]);
    const double co = pc.c_out(sigmas[b]);
    for (std::size_t j = 0; j < chunk; ++j) {
      out(b, j) = cs * x(b, j) + co * act[b * chunk + j];
    }
  }
  return out;
}

DenoiserGrads denoise_backward_batch(const DenoiserParams& p,
                                     const ForwardCache& cache,
                                     const Matrix& upstream) {
  const auto& dims = p.dims();
  const std::size_t batch = cache.batch;
  const auto chunk = static_cast<std::size_t>(dims.chunk_size());
  if (upstream.rows() != batch || upstream.cols() != chunk) {
    throw InvalidInput("denoise_backward: upstream gradient shape mismatch");
  }
  if (!upstream.all_finite()) throw NumericInput("denoise_backward: non-finite upstream");
  const auto& pc = p.precond();
  const auto& layers = p.layers();

  DenoiserGrads g{std::vector<double>(p.size(), 0.0), Matrix(batch, chunk)};
  std::vector<double> grad(batch * chunk);
  for (std::size_t b = 0; b < batch; ++b) {
    const double co = pc.c_out(cache.sigmas[b]);
    for (std::size_t j = 0; j < chunk; ++j) grad[b * chunk + j] = co * upstream(b, j);
  }

  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& v = layers[li];
    const kernels::DenseShape shape{batch, static_cast<std::size_t>(v.in),
                                    static_cast<std::size_t>(v.out)};
    std::vector<double> dx(batch * v.in);
    std::span<double> dwt(g.params.data() + v.weight_offset,
                          static_cast<std::size_t>(v.in) * v.out);
    std::span<double> db(g.params.data() + v.bias_offset, static_cast<std::size_t>(v.out));
    kernels::dense_backward(shape, cache.inputs[li], p.weights(li), grad, dwt, db, dx);
    if (li > 0 && dims.activation == Activation::kSilu) {
      kernels::silu_backward(cache.pre[li - 1], dx);
    }
    grad = std::move(dx);
  }

  const auto in_dim = static_cast<std::size_t>(dims.input_dim());
  for (std::size_t b = 0; b < batch; ++b) {
    const double cs = pc.c_skip(cache.sigmas[b]);
    const double ci = pc.c_in(cache.sigmas[b]);
    for (std::size_t j = 0; j < chunk; ++j) {
      g.input(b, j) = cs * upstream(b, j) + ci * grad[b * in_dim + j];
    }
  }
  return g;
}

namespace {

Matrix as_row(const Matrix& x) { return Matrix(1, x.size(), x.values()); }

Matrix obs_row(std::span<const double> obs) {
  return Matrix(1, obs.size(), std::vector<double>(obs.begin(), obs.end()));
}

}  // namespace

Matrix denoise(const DenoiserParams& p, const Matrix& x, double sigma,
               std::span<const double> obs) {
  const double s[1] = {sigma};
  Matrix out = denoise_batch(p, as_row(x), s, obs_row(obs));
  return Matrix(x.rows(), x.cols(), out.values());
}

DenoiserGrads denoise_backward(const DenoiserParams& p, const Matrix& x,
                               double sigma, std::span<const double> obs,
                               const Matrix& upstream) {
  const double s[1] = {sigma};
  ForwardCache cache;
  denoise_batch(p, as_row(x), s, obs_row(obs), &cache);
  auto g = denoise_backward_batch(p, cache, as_row(upstream));
  g.input = Matrix(x.rows(), x.cols(), g.input.values());
  return g;
}

Matrix Normalizer::normalize(const ActionChunk& chunk) const {
  Matrix out(chunk.rows(), chunk.cols());
  for (std::size_t r = 0; r < chunk.rows(); ++r) {
    for (std::size_t c = 0; c < chunk.cols(); ++c) out(r, c) = normalize_chunk(chunk(r, c), c);
  }
  return out;
}

ActionChunk Normalizer::denormalize(const Matrix& chunk) const {
  ActionChunk out(chunk.rows(), chunk.cols());
  for (std::size_t r = 0; r < chunk.rows(); ++r) {
    for (std::size_t c = 0; c < chunk.cols(); ++c) out(r, c) = denormalize_chunk(chunk(r, c), c);
  }
  return out;
}

std::vector<double> Normalizer::normalize_window(std::span<const double> window) const {
  const std::size_t d = obs_mean.size();
  std::vector<double> out(window.size());
  for (std::size_t k = 0; k < window.size(); ++k) out[k] = normalize_obs(window[k], k % d);
  return out;
}

Normalizer Normalizer::identity(int chunk_width, int obs_dim, double target_std) {
  Normalizer n;
  n.chunk_mean.assign(chunk_width, 0.0);
  n.chunk_std.assign(chunk_width, 1.0);
  n.obs_mean.assign(obs_dim, 0.0);
  n.obs_std.assign(obs_dim, 1.0);
  n.target_std = target_std;
  return n;
}

void round_to_storage(DenoiserParams& p) {
  for (double& v : p.flat()) v = static_cast<float>(v);
}

namespace {

json policy_to_json(const PolicyConfig& p) {
  return {{"c", p.c},
          {"l", p.l},
          {"h", p.h},
          {"action_dim", p.action_dim},
          {"obs_dim", p.obs_dim},
          {"predict_states", p.predict_states}};
}

PolicyConfig policy_from_json(const json& j) {
  PolicyConfig p;
  p.c = j.at("c").get<int>();
  p.l = j.at("l").get<int>();
  p.h = j.at("h").get<int>();
  p.action_dim = j.at("action_dim").get<int>();
  p.obs_dim = j.at("obs_dim").get<int>();
  p.predict_states = j.at("predict_states").get<bool>();
  return p;
}

}  // namespace

void checkpoint_write(const Checkpoint& c, const std::string& path) {
  const auto& d = c.params.dims();
  json header;
  header["format"] = "sgad-checkpoint";
  header["policy"] = policy_to_json(c.policy);
  header["dims"] = {{"chunk_len", d.chunk_len},
                    {"chunk_width", d.chunk_width},
                    {"context", d.context},
                    {"obs_dim", d.obs_dim},
                    {"hidden", d.hidden},
                    {"emb_dim", d.emb_dim},
                    {"activation", d.activation == Activation::kSilu ? "silu" : "identity"}};
  header["sigma_data"] = c.params.precond().sigma_data;
  header["normalizer"] = {{"chunk_mean", c.normalizer.chunk_mean},
                          {"chunk_std", c.normalizer.chunk_std},
                          {"obs_mean", c.normalizer.obs_mean},
                          {"obs_std", c.normalizer.obs_std},
                          {"target_std", c.normalizer.target_std}};
  header["param_count"] = c.params.size();
  header["train"] = c.train_meta;
  std::vector<float> payload(c.params.flat().begin(), c.params.flat().end());
  binio::write_container(path, std::string_view(kCheckpointMagic, 8),
                         kCheckpointVersion, header, payload);
}

Checkpoint checkpoint_read(const std::string& path) {
  auto cont = binio::read_container(path, std::string_view(kCheckpointMagic, 8),
                                    kCheckpointVersion);
  Checkpoint c;
  try {
    const auto& h = cont.header;
    c.policy = policy_from_json(h.at("policy"));
    const auto& jd = h.at("dims");
    DenoiserDims d;
    d.chunk_len = jd.at("chunk_len").get<int>();
    d.chunk_width = jd.at("chunk_width").get<int>();
    d.context = jd.at("context").get<int>();
    d.obs_dim = jd.at("obs_dim").get<int>();
    d.hidden = jd.at("hidden").get<std::vector<int>>();
    d.emb_dim = jd.at("emb_dim").get<int>();
    d.activation = jd.at("activation").get<std::string>() == "silu" ? Activation::kSilu
                                                                    : Activation::kIdentity;
    c.params = DenoiserParams(d, h.at("sigma_data").get<double>());
    const auto& jn = h.at("normalizer");
    c.normalizer.chunk_mean = jn.at("chunk_mean").get<std::vector<double>>();
    c.normalizer.chunk_std = jn.at("chunk_std").get<std::vector<double>>();
    c.normalizer.obs_mean = jn.at("obs_mean").get<std::vector<double>>();
    c.normalizer.obs_std = jn.at("obs_std").get<std::vector<double>>();
    c.normalizer.target_std = jn.at("target_std").get<double>();
    c.train_meta = h.value("train", json::object());
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), 16);
  }
  if (cont.payload.size() != c.params.size()) {
    throw ParseError("checkpoint payload size does not match dims",
                     cont.payload_offset + 4 * cont.payload.size());
  }
  std::copy(cont.payload.begin(), cont.payload.end(), c.params.flat().begin());
  if (c.policy.l != c.params.dims().chunk_len ||
      c.policy.chunk_width() != c.params.dims().chunk_width) {
    throw InvalidInput("checkpoint policy config disagrees with model dims");
  }
  return c;
}

}  // namespace sgad

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sgad/env.hpp"
#include "sgad/errors.hpp"
#include "sgad/expert.hpp"
#include "sgad/train.hpp"

using namespace sgad;

namespace {

Trajectory ramp(int T, int obs_dim, int action_dim) {
  Trajectory tr;
  tr.obs_dim = obs_dim;
  tr.action_dim = action_dim;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < obs_dim; ++k) tr.states.push_back(static_cast<float>(100 * t + k));
    for (int k = 0; k < action_dim; ++k) tr.actions.push_back(static_cast<float>(-10 * t - k));
  }
  return tr;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.flat()) v = scale * rng.normal();
  return m;
}

DenoiserDims tiny_dims() {
  DenoiserDims d;
  d.chunk_len = 2;
  d.chunk_width = 2;
  d.context = 1;
  d.obs_dim = 3;
  d.hidden = {10, 8};
  return d;
}

}  // namespace

TEST_CASE("sigma sampling") {
  TrainConfig cfg;
  Rng rng(1);
  std::vector<double> draws(100000);
  for (double& s : draws) {
    s = sample_sigma(cfg, rng);
    REQUIRE(s > 0);
  }
  std::nth_element(draws.begin(), draws.begin() + draws.size() / 2, draws.end());
  const double median = draws[draws.size() / 2];
  CHECK(std::abs(median / std::exp(-1.2) - 1.0) < 0.03);

  cfg.p_std = 0.0;
  for (int i = 0; i < 10; ++i) CHECK(sample_sigma(cfg, rng) == std::exp(-1.2));
  Rng a(5), b(5);
  CHECK(sample_sigma(TrainConfig{}, a) == sample_sigma(TrainConfig{}, b));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.p_std = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = TrainConfig{};
  cfg.eval_fraction = 0.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

TEST_CASE("chunking pads both ends and keeps every timestep") {
  Dataset d;
  d.trajectories = {ramp(4, 2, 1), ramp(2, 2, 1)};
  PolicyConfig p;
  p.c = 2;
  p.l = 3;
  p.h = 1;
  p.obs_dim = 2;
  p.action_dim = 1;
  const auto set = make_chunks(d, p);
  REQUIRE(set.obs.rows() == 6);
  REQUIRE(set.obs.cols() == 4);
  REQUIRE(set.chunks.cols() == 3);
  // t = 0: window repeats the first state, chunk is actions 0,1,2.
  CHECK(std::vector<double>(set.obs.row(0).begin(), set.obs.row(0).end()) ==
        std::vector<double>{0, 1, 0, 1});
  CHECK(std::vector<double>(set.chunks.row(0).begin(), set.chunks.row(0).end()) ==
        std::vector<double>{0, -10, -20});
  // t = 3: window is states 2,3; chunk repeats the last action.
  CHECK(std::vector<double>(set.obs.row(3).begin(), set.obs.row(3).end()) ==
        std::vector<double>{200, 201, 300, 301});
  CHECK(std::vector<double>(set.chunks.row(3).begin(), set.chunks.row(3).end()) ==
        std::vector<double>{-30, -30, -30});
  // Second trajectory, t = 1.
  CHECK(std::vector<double>(set.chunks.row(5).begin(), set.chunks.row(5).end()) ==
        std::vector<double>{-10, -10, -10});

  p.predict_states = true;
  const auto with_states = make_chunks(d, p);
  REQUIRE(with_states.chunks.cols() == 9);
  // Row k of the t = 0 chunk carries state k + 1.
  CHECK(with_states.chunks(0, 0) == 0);
  CHECK(with_states.chunks(0, 1) == 100);
  CHECK(with_states.chunks(0, 2) == 101);
  CHECK(with_states.chunks(0, 3) == -10);
  CHECK(with_states.chunks(0, 4) == 200);
}

TEST_CASE("normalizer statistics match brute force") {
  const Dataset d = build_dataset(20, default_env_config(EnvId::kMaze), variance_preset("low"), 3);
  PolicyConfig p;
  const auto n = fit_normalizer(d.trajectories, p, 0.5);
  for (int k = 0; k < 2; ++k) {
    double s = 0, s2 = 0, c = 0;
    for (const auto& tr : d.trajectories) {
      for (std::size_t t = 0; t < tr.length(); ++t) {
        s += tr.action(t)[k];
        s2 += static_cast<double>(tr.action(t)[k]) * tr.action(t)[k];
        c += 1;
      }
    }
    const double mean = s / c;
    CHECK(n.chunk_mean[k] == doctest::Approx(mean));
    CHECK(n.chunk_std[k] == doctest::Approx(std::sqrt(s2 / c - mean * mean)));
  }
  CHECK(n.target_std == 0.5);
  // Maze goal x is constant under a static goal with no goal jitter.
  EnvConfig cfg = default_env_config(EnvId::kMaze);
  VariancePreset fixed_goal = variance_preset("low");
  fixed_goal.goal_offset_var = 0.0;
  const Dataset still = build_dataset(5, cfg, fixed_goal, 1);
  CHECK(fit_normalizer(still.trajectories, p, 0.5).obs_std[2] == 1.0);
}

TEST_CASE("weighted loss closed form") {
  const Preconditioning pc{0.5};
  Matrix d(2, 2, {1.0, 2.0, 0.0, -1.0});
  Matrix y(2, 2, {0.5, 2.0, 1.0, 1.0});
  const std::vector<double> sig{0.3, 2.0};
  const auto wl = weighted_denoising_loss(d, y, sig, pc);
  const double l0 = pc.loss_weight(0.3) * (0.25 + 0.0) / 2;
  const double l1 = pc.loss_weight(2.0) * (1.0 + 4.0) / 2;
  CHECK(wl.loss == doctest::Approx((l0 + l1) / 2).epsilon(1e-14));
  CHECK(wl.grad(0, 0) == doctest::Approx(2 * pc.loss_weight(0.3) * 0.5 / 4));
  CHECK(weighted_denoising_loss(y, y, sig, pc).loss == 0.0);
}

TEST_CASE("loss with a zero network at huge sigma matches the closed form") {
  auto p = init_params(2, tiny_dims());
  for (double& w : p.weights(2)) w = 0.0;
  Rng rng(3);
  const auto obs = random_matrix(1, 3, rng);
  const auto clean = random_matrix(1, 4, rng, 0.5);
  const double sigma = 1e4;
  const auto noise = random_matrix(1, 4, rng, sigma);
  const std::vector<double> sig{sigma};
  const auto r = denoising_loss_fixed(p, obs, clean, sig, noise, false);
  const auto& pc = p.precond();
  double sq = 0;
  for (int j = 0; j < 4; ++j) {
    const double e = pc.c_skip(sigma) * (clean.flat()[j] + noise.flat()[j]) - clean.flat()[j];
    sq += e * e;
  }
  CHECK(r.loss == doctest::Approx(pc.loss_weight(sigma) * sq / 4).epsilon(1e-6));
}

TEST_CASE("loss gradient matches finite differences on a two-sample batch") {
  auto p = init_params(4, tiny_dims());
  Rng rng(5);
  for (double& v : p.flat()) v += 0.05 * rng.normal();
  const auto obs = random_matrix(2, 3, rng);
  const auto clean = random_matrix(2, 4, rng, 0.5);
  const std::vector<double> sig{0.2, 1.7};
  Matrix noise = random_matrix(2, 4, rng);
  for (int j = 0; j < 4; ++j) noise(1, j) *= 1.7, noise(0, j) *= 0.2;
  const auto r = denoising_loss_fixed(p, obs, clean, sig, noise, true);
  const double eps = 1e-6;
  double worst = 0;
  for (int probe = 0; probe < 100; ++probe) {
    const auto idx = rng.uniform_index(p.size());
    auto plus = p, minus = p;
    plus.flat()[idx] += eps;
    minus.flat()[idx] -= eps;
    const double fd = (denoising_loss_fixed(plus, obs, clean, sig, noise, false).loss -
                       denoising_loss_fixed(minus, obs, clean, sig, noise, false).loss) /
                      (2 * eps);
    const double a = r.grads[idx];
    worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-4}));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("init loss is order one across sigma deciles") {
  const Dataset d = build_dataset(40, default_env_config(EnvId::kMaze), variance_preset("low"), 8);
  PolicyConfig pol;
  TrainConfig cfg;
  auto set = make_chunks(d, pol);
  const auto n = fit_normalizer(d.trajectories, pol, cfg.sigma_data);
  for (std::size_t r = 0; r < set.chunks.rows(); ++r) {
    auto row = set.chunks.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = n.normalize_chunk(row[k], k % 2);
    const auto w = n.normalize_window(set.obs.row(r));
    std::copy(w.begin(), w.end(), set.obs.row(r).begin());
  }
  const auto p = init_params(1, dims_for(pol, cfg.hidden));
  Rng rng(9);
  // Decile edges of the log-normal sigma distribution.
  const double z[] = {-1.2816, -0.8416, -0.5244, -0.2533, 0.0, 0.2533, 0.5244, 0.8416, 1.2816};
  for (double zi : z) {
    const double sigma = std::exp(cfg.p_mean + cfg.p_std * zi);
    const std::size_t B = 256;
    Matrix obs(B, set.obs.cols()), clean(B, set.chunks.cols()), noise(B, set.chunks.cols());
    for (std::size_t b = 0; b < B; ++b) {
      const auto i = rng.uniform_index(set.chunks.rows());
      std::copy(set.obs.row(i).begin(), set.obs.row(i).end(), obs.row(b).begin());
      std::copy(set.chunks.row(i).begin(), set.chunks.row(i).end(), clean.row(b).begin());
      for (double& v : noise.row(b)) v = sigma * rng.normal();
    }
    const std::vector<double> sig(B, sigma);
    const double loss = denoising_loss_fixed(p, obs, clean, sig, noise, false).loss;
    CHECK_MESSAGE(loss >= 0.5, "sigma " << sigma);
    CHECK_MESSAGE(loss <= 2.0, "sigma " << sigma);
  }
}

TEST_CASE("adam update matches a hand-computed first step") {
  std::vector<double> params{1.0, -2.0};
  const std::vector<double> grads{0.5, -4.0};
  AdamState st;
  adam_update(params, grads, st, 0.1);
  // Bias-corrected first step moves each parameter by lr * sign(grad).
  CHECK(params[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(params[1] == doctest::Approx(-1.9).epsilon(1e-6));
  CHECK(st.step == 1);
}

TEST_CASE("training is deterministic, reduces loss and steps=0 keeps the initialization") {
  const Dataset d = build_dataset(30, default_env_config(EnvId::kMaze), variance_preset("low"), 2);
  PolicyConfig pol;
  TrainConfig cfg;
  cfg.hidden = {32, 32};
  cfg.steps = 300;
  cfg.eval_interval = 100;
  cfg.seed = 4;
  const auto a = train(d, pol, cfg);
  const auto b = train(d, pol, cfg);
  CHECK(a.params == b.params);
  const auto& curve = a.train_meta["eval_loss"];
  CHECK(curve.size() == 4);
  CHECK(curve.back()[1].get<double>() < curve.front()[1].get<double>());
  CHECK(a.train_meta["train_loss_per_100"].size() == 3);

  cfg.steps = 0;
  const auto z = train(d, pol, cfg);
  auto init = init_params(cfg.seed, dims_for(pol, cfg.hidden));
  round_to_storage(init);
  CHECK(z.params == init);

  const Dataset push = build_dataset(5, default_env_config(EnvId::kPush), variance_preset("low"), 1);
  CHECK_THROWS_AS(train(push, pol, cfg), InvalidConfig);
}

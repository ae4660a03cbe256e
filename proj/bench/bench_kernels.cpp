// Serial vs OpenMP dense kernels and a full denoiser training step.

#include <chrono>
#include <cstdio>
#include <vector>

#include "sgad/kernels.hpp"
#include "sgad/model.hpp"
#include "sgad/rng.hpp"
#include "sgad/train.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(int reps, F&& f) {
  f();
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) f();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / reps;
}

}  // namespace

int main() {
  namespace k = sgad::kernels;
  sgad::Rng rng(1);
  std::printf("threads: %d\n", k::max_threads());
  for (std::size_t batch : {1u, 16u, 64u, 256u}) {
    const k::DenseShape s{batch, 256, 256};
    std::vector<double> x(batch * s.in), wt(s.in * s.out), b(s.out), y(batch * s.out);
    std::vector<double> dy(y.size()), dwt(wt.size()), db(b.size()), dx(x.size());
    for (auto* v : {&x, &wt, &b, &dy}) {
      for (double& e : *v) e = rng.uniform(-1, 1);
    }
    const int reps = batch >= 64 ? 50 : 400;
    const double fs = time_ms(reps, [&] { k::dense_forward_serial(s, x, wt, b, y); });
    const double fp = time_ms(reps, [&] { k::dense_forward_parallel(s, x, wt, b, y); });
    const double bs = time_ms(reps, [&] { k::dense_backward_serial(s, x, wt, dy, dwt, db, dx); });
    const double bp = time_ms(reps, [&] { k::dense_backward_parallel(s, x, wt, dy, dwt, db, dx); });
    const double gflop = 2.0 * batch * s.in * s.out * 1e-6;
    std::printf("batch %4zu  forward serial %8.3f ms (%5.2f GFLOP/s)  parallel %8.3f ms | "
                "backward serial %8.3f ms  parallel %8.3f ms\n",
                batch, fs, gflop / fs, fp, bs, bp);
  }

  sgad::DenoiserDims dims;
  dims.chunk_len = 16;
  dims.obs_dim = 6;
  dims.context = 2;
  const auto params = sgad::init_params(3, dims);
  sgad::Matrix obs(64, dims.obs_size()), clean(64, dims.chunk_size());
  for (double& v : obs.flat()) v = rng.normal();
  for (double& v : clean.flat()) v = 0.5 * rng.normal();
  sgad::TrainConfig cfg;
  const double step = time_ms(20, [&] {
    sgad::Rng r(5);
    sgad::denoising_loss(params, obs, clean, r, cfg);
  });
  std::printf("denoiser loss+grad, batch 64, push dims: %.3f ms\n", step);
  return 0;
}

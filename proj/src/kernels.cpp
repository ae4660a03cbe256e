#include "sgad/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sgad::kernels {
namespace {

constexpr std::size_t kParallelWork = 1u << 15;

inline void forward_row(const DenseShape& s, const double* x, const double* wt,
                        const double* bias, double* y) {
  for (std::size_t o = 0; o < s.out; ++o) y[o] = bias[o];
  for (std::size_t i = 0; i < s.in; ++i) {
    const double xi = x[i];
    const double* w = wt + i * s.out;
    for (std::size_t o = 0; o < s.out; ++o) y[o] += xi * w[o];
  }
}

// dwt row i: sum over the batch in ascending order.
inline void weight_grad_row(const DenseShape& s, std::size_t i, const double* x,
                            const double* dy, double* dwt_row) {
  for (std::size_t b = 0; b < s.batch; ++b) {
    const double xbi = x[b * s.in + i];
    const double* g = dy + b * s.out;
    for (std::size_t o = 0; o < s.out; ++o) dwt_row[o] += xbi * g[o];
  }
}

// Four fixed partial sums, combined in a fixed order.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

inline void input_grad_row(const DenseShape& s, const double* wt,
                           const double* dy_row, double* dx_row) {
  for (std::size_t i = 0; i < s.in; ++i) dx_row[i] = dot(wt + i * s.out, dy_row, s.out);
}

inline void bias_grad(const DenseShape& s, std::size_t o, const double* dy,
                      double* db) {
  double acc = db[o];
  for (std::size_t b = 0; b < s.batch; ++b) acc += dy[b * s.out + o];
  db[o] = acc;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void dense_forward_serial(DenseShape s, std::span<const double> x,
                          std::span<const double> wt, std::span<const double> bias,
                          std::span<double> y) {
  for (std::size_t b = 0; b < s.batch; ++b) {
    forward_row(s, x.data() + b * s.in, wt.data(), bias.data(), y.data() + b * s.out);
  }
}

void dense_forward_parallel(DenseShape s, std::span<const double> x,
                            std::span<const double> wt,
                            std::span<const double> bias, std::span<double> y) {
  const auto n = static_cast<long>(s.batch);
#pragma omp parallel for schedule(static)
  for (long b = 0; b < n; ++b) {
    forward_row(s, x.data() + b * s.in, wt.data(), bias.data(), y.data() + b * s.out);
  }
}

void dense_backward_serial(DenseShape s, std::span<const double> x,
                           std::span<const double> wt, std::span<const double> dy,
                           std::span<double> dwt, std::span<double> db,
                           std::span<double> dx) {
  for (std::size_t i = 0; i < s.in; ++i) {
    weight_grad_row(s, i, x.data(), dy.data(), dwt.data() + i * s.out);
  }
  for (std::size_t o = 0; o < s.out; ++o) bias_grad(s, o, dy.data(), db.data());
  if (!dx.empty()) {
    for (std::size_t b = 0; b < s.batch; ++b) {
      input_grad_row(s, wt.data(), dy.data() + b * s.out, dx.data() + b * s.in);
    }
  }
}

void dense_backward_parallel(DenseShape s, std::span<const double> x,
                             std::span<const double> wt,
                             std::span<const double> dy, std::span<double> dwt,
                             std::span<double> db, std::span<double> dx) {
  const auto in = static_cast<long>(s.in);
  const auto out = static_cast<long>(s.out);
  const auto batch = static_cast<long>(s.batch);
  const bool want_dx = !dx.empty();
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (long i = 0; i < in; ++i) {
      weight_grad_row(s, static_cast<std::size_t>(i), x.data(), dy.data(),
                      dwt.data() + i * s.out);
    }
#pragma omp for schedule(static) nowait
    for (long o = 0; o < out; ++o) {
      bias_grad(s, static_cast<std::size_t>(o), dy.data(), db.data());
    }
    if (want_dx) {
#pragma omp for schedule(static)
      for (long b = 0; b < batch; ++b) {
        input_grad_row(s, wt.data(), dy.data() + b * s.out, dx.data() + b * s.in);
      }
    }
  }
}

void dense_forward(DenseShape s, std::span<const double> x,
                   std::span<const double> wt, std::span<const double> bias,
                   std::span<double> y) {
  if (max_threads() > 1 && s.batch > 1 && s.batch * s.in * s.out >= kParallelWork) {
    dense_forward_parallel(s, x, wt, bias, y);
  } else {
    dense_forward_serial(s, x, wt, bias, y);
  }
}

void dense_backward(DenseShape s, std::span<const double> x,
                    std::span<const double> wt, std::span<const double> dy,
                    std::span<double> dwt, std::span<double> db,
                    std::span<double> dx) {
  if (max_threads() > 1 && s.batch * s.in * s.out >= kParallelWork) {
    dense_backward_parallel(s, x, wt, dy, dwt, db, dx);
  } else {
    dense_backward_serial(s, x, wt, dy, dwt, db, dx);
  }
}

void silu_forward(std::span<const double> pre, std::span<double> out) {
  for (std::size_t k = 0; k < pre.size(); ++k) {
    const double v = pre[k];
    out[k] = v / (1.0 + std::exp(-v));
  }
}

void silu_backward(std::span<const double> pre, std::span<double> grad) {
  for (std::size_t k = 0; k < pre.size(); ++k) {
    const double sig = 1.0 / (1.0 + std::exp(-pre[k]));
    grad[k] *= sig * (1.0 + pre[k] * (1.0 - sig));
  }
}

}  // namespace sgad::kernels

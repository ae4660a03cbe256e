#pragma once

// Batched dense-layer kernels. Each op has a serial reference and an OpenMP
// version; both evaluate every output element with the same summation order,
// so their results are bit-identical for any thread count.
//
// Shapes (row-major): X is B x in, Wt is in x out (transposed weights),
// bias and db have out entries, Y/dY are B x out, dX is B x in.

#include <cstddef>
#include <span>

namespace sgad::kernels {

struct DenseShape {
  std::size_t batch;
  std::size_t in;
  std::size_t out;
};

void dense_forward_serial(DenseShape s, std::span<const double> x,
                          std::span<const double> wt, std::span<const double> bias,
                          std::span<double> y);
void dense_forward_parallel(DenseShape s, std::span<const double> x,
                            std::span<const double> wt,
                            std::span<const double> bias, std::span<double> y);

// Accumulates into dwt and db; overwrites dx unless it is empty.
void dense_backward_serial(DenseShape s, std::span<const double> x,
                           std::span<const double> wt, std::span<const double> dy,
                           std::span<double> dwt, std::span<double> db,
                           std::span<double> dx);
void dense_backward_parallel(DenseShape s, std::span<const double> x,
                             std::span<const double> wt,
                             std::span<const double> dy, std::span<double> dwt,
                             std::span<double> db, std::span<double> dx);

// Dispatch to the parallel kernel when the work is large enough to pay for a
// parallel region.
void dense_forward(DenseShape s, std::span<const double> x,
                   std::span<const double> wt, std::span<const double> bias,
                   std::span<double> y);
void dense_backward(DenseShape s, std::span<const double> x,
                    std::span<const double> wt, std::span<const double> dy,
                    std::span<double> dwt, std::span<double> db,
                    std::span<double> dx);

// x * sigmoid(x) and its derivative, elementwise.
void silu_forward(std::span<const double> pre, std::span<double> out);
// grad <- grad * silu'(pre)
void silu_backward(std::span<const double> pre, std::span<double> grad);

// Number of threads the parallel kernels will use.
int max_threads();

}  // namespace sgad::kernels

#pragma once

#include <cstddef>
#include <span>

// Dense row-major kernels used by the autodiff tape and the evaluation metrics.
//
// Every kernel comes in two flavours: the default one parallelises the outer
// loop with OpenMP, the one in `serial` is the plain reference loop. Each output
// element is produced by exactly one thread with the same summation order as
// the reference, so both flavours return bit-identical results for any thread
// count.
namespace ofp::kernels {

// c[n x m] = a[n x k] * b[k x m]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t n, std::size_t k, std::size_t m);

// c[k x m] = a^T * b, with a[n x k] and b[n x m]
void matmul_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t n, std::size_t k, std::size_t m);

// c[n x k] = a * b^T, with a[n x m] and b[k x m]
void matmul_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t n, std::size_t m, std::size_t k);

// Mean Euclidean distance over all (i, j) pairs of rows of x[nx x dim] and y[ny x dim].
double mean_pairwise_distance(std::span<const double> x, std::size_t nx,
                              std::span<const double> y, std::size_t ny, std::size_t dim);

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t n, std::size_t k, std::size_t m);
void matmul_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t n, std::size_t k, std::size_t m);
void matmul_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t n, std::size_t m, std::size_t k);
double mean_pairwise_distance(std::span<const double> x, std::size_t nx,
                              std::span<const double> y, std::size_t ny, std::size_t dim);

}  // namespace serial
}  // namespace ofp::kernels

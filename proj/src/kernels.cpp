#include "ofp/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace ofp::kernels {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1 << 15;

inline void matmul_row(const double* a, const double* b, double* c, std::size_t k,
                       std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) c[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p];
    const double* brow = b + p * m;
    for (std::size_t j = 0; j < m; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_at_b_row(const double* a, const double* b, double* c, std::size_t n,
                            std::size_t k, std::size_t m, std::size_t p) {
  for (std::size_t j = 0; j < m; ++j) c[j] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double av = a[i * k + p];
    const double* brow = b + i * m;
    for (std::size_t j = 0; j < m; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_a_bt_row(const double* a, const double* b, double* c, std::size_t m,
                            std::size_t k) {
  for (std::size_t q = 0; q < k; ++q) {
    const double* brow = b + q * m;
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += a[j] * brow[j];
    c[q] = acc;
  }
}

inline double row_distance_sum(const double* xi, const double* y, std::size_t ny,
                               std::size_t dim) {
  double acc = 0.0;
  for (std::size_t j = 0; j < ny; ++j) {
    const double* yj = y + j * dim;
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = xi[d] - yj[d];
      sq += diff * diff;
    }
    acc += std::sqrt(sq);
  }
  return acc;
}

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t n, std::size_t k, std::size_t m) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    matmul_row(a.data() + i * k, b.data(), c.data() + i * m, k, m);
  }
}

void matmul_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t n, std::size_t k, std::size_t m) {
  const auto rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::int64_t p = 0; p < rows; ++p) {
    matmul_at_b_row(a.data(), b.data(), c.data() + p * m, n, k, m, static_cast<std::size_t>(p));
  }
}

void matmul_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t n, std::size_t m, std::size_t k) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    matmul_a_bt_row(a.data() + i * m, b.data(), c.data() + i * k, m, k);
  }
}

double mean_pairwise_distance(std::span<const double> x, std::size_t nx,
                              std::span<const double> y, std::size_t ny, std::size_t dim) {
  std::vector<double> row_sums(nx);
  const auto rows = static_cast<std::int64_t>(nx);
#pragma omp parallel for schedule(static) if (nx * ny * dim > kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    row_sums[i] = row_distance_sum(x.data() + i * dim, y.data(), ny, dim);
  }
  double total = 0.0;
  for (double s : row_sums) total += s;
  return total / (static_cast<double>(nx) * static_cast<double>(ny));
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      c[i * m + j] = acc;
    }
  }
}

void matmul_at_b(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += a[i * k + p] * b[i * m + j];
      c[p * m + j] = acc;
    }
  }
}

void matmul_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t n, std::size_t m, std::size_t k) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < k; ++q) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += a[i * m + j] * b[q * m + j];
      c[i * k + q] = acc;
    }
  }
}

double mean_pairwise_distance(std::span<const double> x, std::size_t nx,
                              std::span<const double> y, std::size_t ny, std::size_t dim) {
  double total = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < ny; ++j) {
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = x[i * dim + d] - y[j * dim + d];
        sq += diff * diff;
      }
      row += std::sqrt(sq);
    }
    total += row;
  }
  return total / (static_cast<double>(nx) * static_cast<double>(ny));
}

}  // namespace serial
}  // namespace ofp::kernels

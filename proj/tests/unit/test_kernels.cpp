#include <doctest.h>

#include <cmath>
#include <vector>

#include "ofp/kernels.hpp"
#include "ofp/rng.hpp"

using namespace ofp;

namespace {

std::vector<double> random(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  rng.fill_normal(v);
  return v;
}

}  // namespace

TEST_CASE("matmul kernels agree bit for bit with the serial reference") {
  for (std::size_t n : {1u, 7u, 64u, 150u}) {
    const std::size_t k = n + 3, m = 2 * n + 1;
    const auto a = random(n * k, n), b = random(k * m, n + 1);
    std::vector<double> c1(n * m), c2(n * m);
    kernels::matmul(a, b, c1, n, k, m);
    kernels::serial::matmul(a, b, c2, n, k, m);
    CHECK(c1 == c2);

    // Straight triple loop.
    for (std::size_t i = 0; i < n; i += 5) {
      for (std::size_t j = 0; j < m; j += 3) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * m + j];
        CHECK(c1[i * m + j] == doctest::Approx(s).epsilon(1e-12));
      }
    }

    const auto x = random(n * k, 7 * n), y = random(n * m, 7 * n + 1);
    std::vector<double> d1(k * m), d2(k * m);
    kernels::matmul_at_b(x, y, d1, n, k, m);
    kernels::serial::matmul_at_b(x, y, d2, n, k, m);
    CHECK(d1 == d2);

    const auto p = random(n * m, 3 * n), q = random(k * m, 3 * n + 1);
    std::vector<double> e1(n * k), e2(n * k);
    kernels::matmul_a_bt(p, q, e1, n, m, k);
    kernels::serial::matmul_a_bt(p, q, e2, n, m, k);
    CHECK(e1 == e2);
  }
}

TEST_CASE("mean pairwise distance matches the reference and a direct sum") {
  const std::size_t nx = 301, ny = 257, dim = 3;
  const auto x = random(nx * dim, 11), y = random(ny * dim, 12);
  const double par = kernels::mean_pairwise_distance(x, nx, y, ny, dim);
  const double ser = kernels::serial::mean_pairwise_distance(x, nx, y, ny, dim);
  CHECK(par == ser);
  double s = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) d2 += std::pow(x[i * dim + c] - y[j * dim + c], 2);
      s += std::sqrt(d2);
    }
  }
  CHECK(par == doctest::Approx(s / (nx * ny)).epsilon(1e-12));
}

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ofp::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Row-major block of 64-bit reals. Most of the library works with 2-D
// (rows x cols) tensors; reductions produce shape {1}.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values, bool requires_grad = false);

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor row(std::vector<double> values);
  static Tensor scalar(double v);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  std::span<double> row_span(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data.data() + r * cols(), cols()};
  }
  double item() const;
};

}  // namespace ofp::ad

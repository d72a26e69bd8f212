#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ofp/autodiff/tensor.hpp"

namespace ofp::ad {

// Elementary operations recorded on the tape.
enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kScale,
  kMul,
  kScaleRows,
  kMatmul,
  kAffine,
  kTanh,
  kSilu,
  kSum,
  kMean,
  kSse,
  kMse,
  kConcatCols,
  kSliceCols,
  kSliceRows,
  kStopGradient,
};

const char* op_name(Op op);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

// Raised when an op receives incompatible shapes. Carries the id the rejected
// node would have received.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(int node_id, const std::string& what);
  int node_id() const { return node_id_; }

 private:
  int node_id_;
};

// Result of a backward pass: one gradient buffer per node that needed one.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<std::vector<double>> grads) : grads_(std::move(grads)) {}

  bool has(Var v) const;
  // Gradient w.r.t. v's value; all zeros when nothing flowed into v.
  std::vector<double> of(Var v) const;
  std::span<const double> view(Var v) const;

 private:
  std::vector<std::vector<double>> grads_;
};

// Append-only computation graph. Values are computed eagerly as nodes are
// appended, so building the graph is the forward evaluation; inputs always
// precede the nodes that consume them.
class Tape {
 public:
  Tape() = default;
  // Replays recorded stop-gradient outputs instead of recomputing them. Used by
  // the finite-difference oracle to hold stop-gradient branches fixed.
  explicit Tape(std::vector<Tensor> stop_gradient_replay);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor t);  // tracked iff t.requires_grad
  Var constant(Tensor t);
  Var param(Tensor t);
  // Leaf over caller-owned storage (parameters); storage must outlive the tape.
  Var view(std::span<const double> values, Shape shape, bool requires_grad);

  std::span<const double> data(Var v) const;
  const Shape& shape(Var v) const;
  Tensor value(Var v) const;
  double scalar(Var v) const;
  bool needs_grad(Var v) const;
  Op op(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar output; each node is visited once.
  Gradients backward(Var output) const;

  // Outputs of every stop_gradient node in creation order.
  const std::vector<Tensor>& stop_gradient_values() const { return sg_values_; }

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::vector<int> inputs;
    Shape shape;
    std::vector<double> value;
    const double* external = nullptr;  // view leaves
    bool needs_grad = false;
    double scalar = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::vector<double> saved;
  };

  const Node& node(Var v) const;
  const double* ptr(int id) const;
  Var push(Node n);
  int next_id() const { return static_cast<int>(nodes_.size()); }

  std::vector<Node> nodes_;
  std::vector<Tensor> sg_values_;
  std::vector<Tensor> sg_replay_;
  bool replaying_ = false;

  friend struct OpBuilder;
  friend Var add(Var, Var);
  friend Var sub(Var, Var);
  friend Var scale(Var, double);
  friend Var mul(Var, Var);
  friend Var scale_rows(Var, std::span<const double>);
  friend Var matmul(Var, Var);
  friend Var affine(Var, Var, Var);
  friend Var tanh(Var);
  friend Var silu(Var);
  friend Var sum(Var);
  friend Var mean(Var);
  friend Var sse(Var, Var);
  friend Var mse(Var, Var);
  friend Var concat_cols(const std::vector<Var>&);
  friend Var slice_cols(Var, std::size_t, std::size_t);
  friend Var slice_rows(Var, std::size_t, std::size_t);
  friend Var stop_gradient(Var);
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var mul(Var a, Var b);
// Multiplies row i of a 2-D tensor by s[i]; s is a constant.
Var scale_rows(Var a, std::span<const double> s);
Var matmul(Var a, Var b);
// x[n x k] * w[k x m] + b, with b broadcast over rows.
Var affine(Var x, Var w, Var b);
Var tanh(Var a);
Var silu(Var a);
Var sum(Var a);
Var mean(Var a);
// Sum of squared differences.
Var sse(Var a, Var b);
// Mean of squared differences.
Var mse(Var a, Var b);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
// Forward identity; contributes nothing to the gradient of its ancestors.
Var stop_gradient(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace ofp::ad

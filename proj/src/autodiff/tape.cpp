#include "ofp/autodiff/tape.hpp"

#include <cmath>
#include <sstream>

#include "ofp/kernels.hpp"

namespace ofp::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kScale: return "scale";
    case Op::kMul: return "mul";
    case Op::kScaleRows: return "scale_rows";
    case Op::kMatmul: return "matmul";
    case Op::kAffine: return "affine";
    case Op::kTanh: return "tanh";
    case Op::kSilu: return "silu";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSse: return "sse";
    case Op::kMse: return "mse";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
    case Op::kSliceRows: return "slice_rows";
    case Op::kStopGradient: return "stop_gradient";
  }
  return "?";
}

ShapeError::ShapeError(int node_id, const std::string& what)
    : std::invalid_argument("node " + std::to_string(node_id) + ": " + what), node_id_(node_id) {}

bool Gradients::has(Var v) const {
  return v.id >= 0 && static_cast<std::size_t>(v.id) < grads_.size() && !grads_[v.id].empty();
}

std::vector<double> Gradients::of(Var v) const {
  if (has(v)) return grads_[v.id];
  return std::vector<double>(shape_size(v.tape->shape(v)), 0.0);
}

std::span<const double> Gradients::view(Var v) const {
  if (!has(v)) return {};
  return grads_[v.id];
}

Tape::Tape(std::vector<Tensor> stop_gradient_replay)
    : sg_replay_(std::move(stop_gradient_replay)), replaying_(true) {}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::invalid_argument("variable does not belong to this tape");
  }
  return nodes_[v.id];
}

const double* Tape::ptr(int id) const {
  const Node& n = nodes_[id];
  return n.external ? n.external : n.value.data();
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor t) {
  Node n;
  n.op = Op::kLeaf;
  n.needs_grad = t.requires_grad;
  n.shape = std::move(t.shape);
  n.value = std::move(t.data);
  return push(std::move(n));
}

Var Tape::constant(Tensor t) {
  t.requires_grad = false;
  return leaf(std::move(t));
}

Var Tape::param(Tensor t) {
  t.requires_grad = true;
  return leaf(std::move(t));
}

Var Tape::view(std::span<const double> values, Shape shape, bool requires_grad) {
  if (values.size() != shape_size(shape)) {
    throw ShapeError(next_id(), "view of " + std::to_string(values.size()) +
                                    " values cannot have shape " + shape_string(shape));
  }
  Node n;
  n.op = Op::kLeaf;
  n.needs_grad = requires_grad;
  n.shape = std::move(shape);
  n.external = values.data();
  return push(std::move(n));
}

std::span<const double> Tape::data(Var v) const {
  const Node& n = node(v);
  return {ptr(v.id), shape_size(n.shape)};
}

const Shape& Tape::shape(Var v) const { return node(v).shape; }

Tensor Tape::value(Var v) const {
  auto d = data(v);
  return Tensor(node(v).shape, std::vector<double>(d.begin(), d.end()));
}

double Tape::scalar(Var v) const {
  auto d = data(v);
  if (d.size() != 1) throw std::logic_error("scalar() on non-scalar node");
  return d[0];
}

bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

Op Tape::op(Var v) const { return node(v).op; }

// ---------------------------------------------------------------------------
// Forward construction

struct OpBuilder {
  static Tape& tape_of(Var a) {
    if (a.tape == nullptr) throw std::invalid_argument("variable is not bound to a tape");
    return *a.tape;
  }

  static Tape& common(Var a, Var b) {
    if (a.tape != b.tape) throw std::invalid_argument("variables from different tapes");
    return tape_of(a);
  }

  static std::size_t rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
  static std::size_t cols_of(const Shape& s) { return s.size() == 2 ? s[1] : s[0]; }

  static bool is_matrix(const Shape& s) { return s.size() == 2; }

  static Tape::Node unary(Tape& t, Op op, Var a) {
    Tape::Node n;
    n.op = op;
    n.inputs = {a.id};
    n.shape = t.nodes_[a.id].shape;
    n.needs_grad = t.nodes_[a.id].needs_grad;
    return n;
  }

  static Tape::Node binary_same(Tape& t, Op op, Var a, Var b) {
    const auto& sa = t.nodes_[a.id].shape;
    const auto& sb = t.nodes_[b.id].shape;
    if (sa != sb) {
      throw ShapeError(t.next_id(), std::string(op_name(op)) + " shape mismatch " +
                                        shape_string(sa) + " vs " + shape_string(sb));
    }
    Tape::Node n;
    n.op = op;
    n.inputs = {a.id, b.id};
    n.shape = sa;
    n.needs_grad = t.nodes_[a.id].needs_grad || t.nodes_[b.id].needs_grad;
    return n;
  }

  template <typename F>
  static Var elementwise2(Op op, Var a, Var b, F f) {
    Tape& t = common(a, b);
    Tape::Node n = binary_same(t, op, a, b);
    const std::size_t len = shape_size(n.shape);
    const double* pa = t.ptr(a.id);
    const double* pb = t.ptr(b.id);
    n.value.resize(len);
    for (std::size_t i = 0; i < len; ++i) n.value[i] = f(pa[i], pb[i]);
    return t.push(std::move(n));
  }

  static Var reduce_pair(Op op, Var a, Var b) {
    Tape& t = common(a, b);
    Tape::Node n = binary_same(t, op, a, b);
    const std::size_t len = shape_size(n.shape);
    const double* pa = t.ptr(a.id);
    const double* pb = t.ptr(b.id);
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double d = pa[i] - pb[i];
      acc += d * d;
    }
    if (op == Op::kMse) acc /= static_cast<double>(len);
    n.shape = {1};
    n.value = {acc};
    return t.push(std::move(n));
  }

  static Var matmul(Var a, Var b, const Var* bias) {
    Tape& t = common(a, b);
    const auto& sa = t.nodes_[a.id].shape;
    const auto& sb = t.nodes_[b.id].shape;
    const Op op = bias ? Op::kAffine : Op::kMatmul;
    if (!is_matrix(sa) || !is_matrix(sb) || sa[1] != sb[0]) {
      throw ShapeError(t.next_id(), std::string(op_name(op)) + " cannot multiply " +
                                        shape_string(sa) + " by " + shape_string(sb));
    }
    const std::size_t n_rows = sa[0], inner = sa[1], m = sb[1];
    Tape::Node n;
    n.op = op;
    n.inputs = {a.id, b.id};
    n.shape = {n_rows, m};
    n.needs_grad = t.nodes_[a.id].needs_grad || t.nodes_[b.id].needs_grad;
    if (bias) {
      if (bias->tape != &t) throw std::invalid_argument("variables from different tapes");
      const auto& sbias = t.nodes_[bias->id].shape;
      if (shape_size(sbias) != m || (sbias.size() == 2 && sbias[0] != 1)) {
        throw ShapeError(t.next_id(), "affine bias " + shape_string(sbias) +
                                          " does not match output width " + std::to_string(m));
      }
      n.inputs.push_back(bias->id);
      n.needs_grad = n.needs_grad || t.nodes_[bias->id].needs_grad;
    }
    n.value.resize(n_rows * m);
    kernels::matmul({t.ptr(a.id), n_rows * inner}, {t.ptr(b.id), inner * m}, n.value, n_rows,
                    inner, m);
    if (bias) {
      const double* pb = t.ptr(bias->id);
      for (std::size_t i = 0; i < n_rows; ++i) {
        for (std::size_t j = 0; j < m; ++j) n.value[i * m + j] += pb[j];
      }
    }
    return t.push(std::move(n));
  }
};

Var add(Var a, Var b) {
  return OpBuilder::elementwise2(Op::kAdd, a, b, [](double x, double y) { return x + y; });
}

Var sub(Var a, Var b) {
  return OpBuilder::elementwise2(Op::kSub, a, b, [](double x, double y) { return x - y; });
}

Var mul(Var a, Var b) {
  return OpBuilder::elementwise2(Op::kMul, a, b, [](double x, double y) { return x * y; });
}

Var scale(Var a, double s) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n = OpBuilder::unary(t, Op::kScale, a);
  n.scalar = s;
  const double* pa = t.ptr(a.id);
  n.value.resize(shape_size(n.shape));
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = s * pa[i];
  return t.push(std::move(n));
}

Var scale_rows(Var a, std::span<const double> s) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n = OpBuilder::unary(t, Op::kScaleRows, a);
  if (!OpBuilder::is_matrix(n.shape) || n.shape[0] != s.size()) {
    throw ShapeError(t.next_id(), "scale_rows needs one factor per row of " +
                                      shape_string(n.shape) + ", got " +
                                      std::to_string(s.size()));
  }
  const std::size_t rows = n.shape[0], cols = n.shape[1];
  const double* pa = t.ptr(a.id);
  n.saved.assign(s.begin(), s.end());
  n.value.resize(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) n.value[i * cols + j] = s[i] * pa[i * cols + j];
  }
  return t.push(std::move(n));
}

Var matmul(Var a, Var b) { return OpBuilder::matmul(a, b, nullptr); }

Var affine(Var x, Var w, Var b) { return OpBuilder::matmul(x, w, &b); }

Var tanh(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n = OpBuilder::unary(t, Op::kTanh, a);
  const double* pa = t.ptr(a.id);
  n.value.resize(shape_size(n.shape));
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::tanh(pa[i]);
  return t.push(std::move(n));
}

Var silu(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n = OpBuilder::unary(t, Op::kSilu, a);
  const double* pa = t.ptr(a.id);
  const std::size_t len = shape_size(n.shape);
  n.value.resize(len);
  n.saved.resize(len);  // sigmoid(x)
  for (std::size_t i = 0; i < len; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-pa[i]));
    n.saved[i] = s;
    n.value[i] = pa[i] * s;
  }
  return t.push(std::move(n));
}

Var sum(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n = OpBuilder::unary(t, Op::kSum, a);
  const double* pa = t.ptr(a.id);
  double acc = 0.0;
  for (std::size_t i = 0, len = shape_size(n.shape); i < len; ++i) acc += pa[i];
  n.shape = {1};
  n.value = {acc};
  return t.push(std::move(n));
}

Var mean(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n = OpBuilder::unary(t, Op::kMean, a);
  const std::size_t len = shape_size(n.shape);
  if (len == 0) throw ShapeError(t.next_id(), "mean of empty tensor");
  const double* pa = t.ptr(a.id);
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) acc += pa[i];
  n.scalar = static_cast<double>(len);
  n.shape = {1};
  n.value = {acc / static_cast<double>(len)};
  return t.push(std::move(n));
}

Var sse(Var a, Var b) { return OpBuilder::reduce_pair(Op::kSse, a, b); }

Var mse(Var a, Var b) { return OpBuilder::reduce_pair(Op::kMse, a, b); }

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols of nothing");
  Tape& t = OpBuilder::tape_of(parts.front());
  std::size_t rows = 0, cols = 0;
  Tape::Node n;
  n.op = Op::kConcatCols;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].tape != &t) throw std::invalid_argument("variables from different tapes");
    const auto& s = t.nodes_[parts[p].id].shape;
    if (!OpBuilder::is_matrix(s) || (p > 0 && s[0] != rows)) {
      throw ShapeError(t.next_id(), "concat_cols part " + std::to_string(p) + " has shape " +
                                        shape_string(s) + ", expected " +
                                        std::to_string(rows) + " rows");
    }
    rows = s[0];
    cols += s[1];
    n.inputs.push_back(parts[p].id);
    n.needs_grad = n.needs_grad || t.nodes_[parts[p].id].needs_grad;
  }
  n.shape = {rows, cols};
  n.value.resize(rows * cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const std::size_t pc = t.nodes_[p.id].shape[1];
    const double* src = t.ptr(p.id);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < pc; ++j) n.value[i * cols + offset + j] = src[i * pc + j];
    }
    offset += pc;
  }
  return t.push(std::move(n));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n = OpBuilder::unary(t, Op::kSliceCols, a);
  if (!OpBuilder::is_matrix(n.shape) || begin > end || end > n.shape[1]) {
    throw ShapeError(t.next_id(), "slice_cols [" + std::to_string(begin) + ", " +
                                      std::to_string(end) + ") out of range for " +
                                      shape_string(n.shape));
  }
  const std::size_t rows = n.shape[0], cols = n.shape[1], w = end - begin;
  const double* pa = t.ptr(a.id);
  n.begin = begin;
  n.end = end;
  n.shape = {rows, w};
  n.value.resize(rows * w);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < w; ++j) n.value[i * w + j] = pa[i * cols + begin + j];
  }
  return t.push(std::move(n));
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n = OpBuilder::unary(t, Op::kSliceRows, a);
  if (!OpBuilder::is_matrix(n.shape) || begin > end || end > n.shape[0]) {
    throw ShapeError(t.next_id(), "slice_rows [" + std::to_string(begin) + ", " +
                                      std::to_string(end) + ") out of range for " +
                                      shape_string(n.shape));
  }
  const std::size_t cols = n.shape[1];
  const double* pa = t.ptr(a.id);
  n.begin = begin;
  n.end = end;
  n.shape = {end - begin, cols};
  n.value.assign(pa + begin * cols, pa + end * cols);
  return t.push(std::move(n));
}

Var stop_gradient(Var a) {
  Tape& t = OpBuilder::tape_of(a);
  Tape::Node n = OpBuilder::unary(t, Op::kStopGradient, a);
  n.needs_grad = false;
  if (t.replaying_) {
    const std::size_t k = t.sg_values_.size();
    if (k >= t.sg_replay_.size() || t.sg_replay_[k].shape != n.shape) {
      throw ShapeError(t.next_id(), "stop_gradient replay does not match graph");
    }
    n.value = t.sg_replay_[k].data;
  } else {
    auto d = t.data(a);
    n.value.assign(d.begin(), d.end());
  }
  t.sg_values_.emplace_back(n.shape, n.value);
  return t.push(std::move(n));
}

// ---------------------------------------------------------------------------
// Reverse sweep

Gradients Tape::backward(Var output) const {
  const Node& out = node(output);
  if (shape_size(out.shape) != 1) {
    throw std::invalid_argument("backward from non-scalar node " + std::to_string(output.id) +
                                " of shape " + shape_string(out.shape));
  }
  std::vector<std::vector<double>> g(nodes_.size());
  if (!out.needs_grad) return Gradients(std::move(g));
  g[output.id] = {1.0};

  auto grad_buf = [&](int id) -> std::vector<double>* {
    if (!nodes_[id].needs_grad) return nullptr;
    auto& buf = g[id];
    if (buf.empty()) buf.assign(shape_size(nodes_[id].shape), 0.0);
    return &buf;
  };

  for (int id = output.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (!n.needs_grad || g[id].empty() || n.op == Op::kLeaf) continue;
    const std::vector<double>& gy = g[id];
    const std::size_t len = gy.size();

    switch (n.op) {
      case Op::kAdd:
      case Op::kSub: {
        if (auto* ga = grad_buf(n.inputs[0])) {
          for (std::size_t i = 0; i < len; ++i) (*ga)[i] += gy[i];
        }
        if (auto* gb = grad_buf(n.inputs[1])) {
          const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
          for (std::size_t i = 0; i < len; ++i) (*gb)[i] += sign * gy[i];
        }
        break;
      }
      case Op::kScale: {
        if (auto* ga = grad_buf(n.inputs[0])) {
          for (std::size_t i = 0; i < len; ++i) (*ga)[i] += n.scalar * gy[i];
        }
        break;
      }
      case Op::kMul: {
        const double* pa = ptr(n.inputs[0]);
        const double* pb = ptr(n.inputs[1]);
        if (auto* ga = grad_buf(n.inputs[0])) {
          for (std::size_t i = 0; i < len; ++i) (*ga)[i] += gy[i] * pb[i];
        }
        if (auto* gb = grad_buf(n.inputs[1])) {
          for (std::size_t i = 0; i < len; ++i) (*gb)[i] += gy[i] * pa[i];
        }
        break;
      }
      case Op::kScaleRows: {
        if (auto* ga = grad_buf(n.inputs[0])) {
          const std::size_t cols = n.shape[1];
          for (std::size_t i = 0; i < n.shape[0]; ++i) {
            for (std::size_t j = 0; j < cols; ++j) (*ga)[i * cols + j] += n.saved[i] * gy[i * cols + j];
          }
        }
        break;
      }
      case Op::kMatmul:
      case Op::kAffine: {
        const auto& sa = nodes_[n.inputs[0]].shape;
        const std::size_t rows = sa[0], inner = sa[1], m = n.shape[1];
        if (auto* ga = grad_buf(n.inputs[0])) {
          std::vector<double> tmp(rows * inner);
          kernels::matmul_a_bt(gy, {ptr(n.inputs[1]), inner * m}, tmp, rows, m, inner);
          for (std::size_t i = 0; i < tmp.size(); ++i) (*ga)[i] += tmp[i];
        }
        if (auto* gw = grad_buf(n.inputs[1])) {
          std::vector<double> tmp(inner * m);
          kernels::matmul_at_b({ptr(n.inputs[0]), rows * inner}, gy, tmp, rows, inner, m);
          for (std::size_t i = 0; i < tmp.size(); ++i) (*gw)[i] += tmp[i];
        }
        if (n.op == Op::kAffine) {
          if (auto* gb = grad_buf(n.inputs[2])) {
            for (std::size_t i = 0; i < rows; ++i) {
              for (std::size_t j = 0; j < m; ++j) (*gb)[j] += gy[i * m + j];
            }
          }
        }
        break;
      }
      case Op::kTanh: {
        if (auto* ga = grad_buf(n.inputs[0])) {
          for (std::size_t i = 0; i < len; ++i) (*ga)[i] += gy[i] * (1.0 - n.value[i] * n.value[i]);
        }
        break;
      }
      case Op::kSilu: {
        if (auto* ga = grad_buf(n.inputs[0])) {
          const double* px = ptr(n.inputs[0]);
          for (std::size_t i = 0; i < len; ++i) {
            const double s = n.saved[i];
            (*ga)[i] += gy[i] * s * (1.0 + px[i] * (1.0 - s));
          }
        }
        break;
      }
      case Op::kSum:
      case Op::kMean: {
        if (auto* ga = grad_buf(n.inputs[0])) {
          const double v = n.op == Op::kSum ? gy[0] : gy[0] / n.scalar;
          for (double& x : *ga) x += v;
        }
        break;
      }
      case Op::kSse:
      case Op::kMse: {
        const std::size_t in_len = shape_size(nodes_[n.inputs[0]].shape);
        const double factor =
            2.0 * gy[0] / (n.op == Op::kMse ? static_cast<double>(in_len) : 1.0);
        const double* pa = ptr(n.inputs[0]);
        const double* pb = ptr(n.inputs[1]);
        if (auto* ga = grad_buf(n.inputs[0])) {
          for (std::size_t i = 0; i < in_len; ++i) (*ga)[i] += factor * (pa[i] - pb[i]);
        }
        if (auto* gb = grad_buf(n.inputs[1])) {
          for (std::size_t i = 0; i < in_len; ++i) (*gb)[i] -= factor * (pa[i] - pb[i]);
        }
        break;
      }
      case Op::kConcatCols: {
        const std::size_t rows = n.shape[0], cols = n.shape[1];
        std::size_t offset = 0;
        for (int in : n.inputs) {
          const std::size_t pc = nodes_[in].shape[1];
          if (auto* gi = grad_buf(in)) {
            for (std::size_t i = 0; i < rows; ++i) {
              for (std::size_t j = 0; j < pc; ++j) (*gi)[i * pc + j] += gy[i * cols + offset + j];
            }
          }
          offset += pc;
        }
        break;
      }
      case Op::kSliceCols: {
        if (auto* ga = grad_buf(n.inputs[0])) {
          const std::size_t rows = n.shape[0], w = n.shape[1];
          const std::size_t cols = nodes_[n.inputs[0]].shape[1];
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < w; ++j) (*ga)[i * cols + n.begin + j] += gy[i * w + j];
          }
        }
        break;
      }
      case Op::kSliceRows: {
        if (auto* ga = grad_buf(n.inputs[0])) {
          const std::size_t cols = n.shape[1];
          for (std::size_t i = 0; i < len; ++i) (*ga)[n.begin * cols + i] += gy[i];
        }
        break;
      }
      case Op::kStopGradient:
      case Op::kLeaf:
        break;
    }
  }
  return Gradients(std::move(g));
}

}  // namespace ofp::ad

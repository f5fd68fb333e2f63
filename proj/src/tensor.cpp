#include "gbml/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace gbml::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

bool is_single(const Tensor& t) { return t.size() == 1; }

void require_rank2(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected rank-2 tensor, got " +
                     to_string(t.shape()));
  }
}

Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() == b.shape()) return a.shape();
  if (is_single(b)) return a.shape();
  if (is_single(a)) return b.shape();
  throw ShapeError(std::string(what) + ": incompatible shapes " + to_string(a.shape()) +
                   " and " + to_string(b.shape()));
}

template <typename F>
std::vector<double> zip(const Tensor& a, const Tensor& b, const Shape& out, F f) {
  std::vector<double> r(element_count(out));
  const auto ad = a.data();
  const auto bd = b.data();
  const bool sa = ad.size() == 1 && r.size() != 1;
  const bool sb = bd.size() == 1 && r.size() != 1;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = f(sa ? ad[0] : ad[i], sb ? bd[0] : bd[i]);
  }
  return r;
}

}  // namespace

namespace detail {

struct Access {
  static Tensor record(Op op, Tensor value, std::vector<Tensor> inputs, double scalar = 0.0,
                       std::size_t axis = 0, std::size_t extent = 0) {
    Tape* tape = nullptr;
    for (const auto& in : inputs) {
      if (!in.tape_) continue;
      if (tape && tape != in.tape_) {
        throw TapeError("operation mixes tensors from different tapes");
      }
      tape = in.tape_;
      tape->check_owned(in);
    }
    if (!tape) return value;
    Tape::Node node;
    node.op = op;
    node.inputs = std::move(inputs);
    node.shape = value.shape_;
    node.scalar = scalar;
    node.axis = axis;
    node.extent = extent;
    tape->nodes_.push_back(std::move(node));
    value.tape_ = tape;
    value.node_ = tape->nodes_.size() - 1;
    value.generation_ = tape->generation_;
    return value;
  }

  static Tensor leaf(Tape& tape, const Tensor& value) {
    Tape::Node node;
    node.op = Op::Leaf;
    node.shape = value.shape_;
    tape.nodes_.push_back(std::move(node));
    Tensor out = value.detach();
    out.tape_ = &tape;
    out.node_ = tape.nodes_.size() - 1;
    out.generation_ = tape.generation_;
    return out;
  }

  static const Tape::Node& node(const Tape& tape, std::size_t i) { return tape.nodes_[i]; }
  static std::size_t generation(const Tensor& t) { return t.generation_; }
};

}  // namespace detail

using detail::Access;

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  if (element_count(shape_) != data.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " does not hold " +
                     std::to_string(data.size()) + " elements");
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  require_rank2(*this, "rows");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  require_rank2(*this, "cols");
  return shape_[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape_));
  }
  return (*data_)[0];
}

Tensor Tensor::detach() const {
  Tensor t;
  t.data_ = data_;
  t.shape_ = shape_;
  return t;
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::variable(const Tensor& value) { return Access::leaf(*this, value); }

void Tape::clear() {
  nodes_.clear();
  ++generation_;
}

std::vector<Op> Tape::op_trace() const {
  std::vector<Op> ops;
  ops.reserve(nodes_.size());
  for (const auto& n : nodes_) ops.push_back(n.op);
  return ops;
}

void Tape::check_owned(const Tensor& t) const {
  if (t.tape() != this) throw TapeError("tensor belongs to a different tape");
  if (Access::generation(t) != generation_ || t.node() >= nodes_.size()) {
    throw TapeError("tensor refers to a cleared tape generation");
  }
}

// ---------------------------------------------------------------------------
// Operations

Tensor add(const Tensor& a, const Tensor& b) {
  auto shape = broadcast_shape(a, b, "add");
  auto v = zip(a, b, shape, [](double x, double y) { return x + y; });
  return Access::record(Op::Add, Tensor(std::move(shape), std::move(v)), {a, b});
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto shape = broadcast_shape(a, b, "sub");
  auto v = zip(a, b, shape, [](double x, double y) { return x - y; });
  return Access::record(Op::Sub, Tensor(std::move(shape), std::move(v)), {a, b});
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto shape = broadcast_shape(a, b, "mul");
  auto v = zip(a, b, shape, [](double x, double y) { return x * y; });
  return Access::record(Op::Mul, Tensor(std::move(shape), std::move(v)), {a, b});
}

Tensor neg(const Tensor& a) {
  std::vector<double> v(a.data().begin(), a.data().end());
  for (auto& x : v) x = -x;
  return Access::record(Op::Neg, Tensor(a.shape(), std::move(v)), {a});
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> v(a.data().begin(), a.data().end());
  for (auto& x : v) x *= factor;
  return Access::record(Op::Scale, Tensor(a.shape(), std::move(v)), {a}, factor);
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = transpose_a ? a.cols() : a.rows();
  const std::size_t k = transpose_a ? a.rows() : a.cols();
  const std::size_t kb = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ for " + to_string(a.shape()) +
                     (transpose_a ? "^T" : "") + " and " + to_string(b.shape()) +
                     (transpose_b ? "^T" : ""));
  }
  std::vector<double> out(m * n, 0.0);
  if (m && n && k) {
    ConstMap am(a.data().data(), static_cast<Eigen::Index>(a.rows()),
                static_cast<Eigen::Index>(a.cols()));
    ConstMap bm(b.data().data(), static_cast<Eigen::Index>(b.rows()),
                static_cast<Eigen::Index>(b.cols()));
    MutMap om(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    if (!transpose_a && !transpose_b) {
      om.noalias() = am * bm;
    } else if (!transpose_a) {
      om.noalias() = am * bm.transpose();
    } else if (!transpose_b) {
      om.noalias() = am.transpose() * bm;
    } else {
      om.noalias() = am.transpose() * bm.transpose();
    }
  }
  const std::size_t flags = (transpose_a ? 1u : 0u) | (transpose_b ? 2u : 0u);
  return Access::record(Op::MatMul, Tensor({m, n}, std::move(out)), {a, b}, 0.0, flags);
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const auto r = a.rows();
  const auto c = a.cols();
  std::vector<double> v(r * c);
  const auto d = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j * r + i] = d[i * c + j];
  return Access::record(Op::Transpose, Tensor({c, r}, std::move(v)), {a});
}

Tensor relu(const Tensor& a) {
  std::vector<double> v(a.data().begin(), a.data().end());
  for (auto& x : v) x = x > 0.0 ? x : 0.0;
  return Access::record(Op::Relu, Tensor(a.shape(), std::move(v)), {a});
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return Access::record(Op::Sum, Tensor::scalar(s), {a});
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of empty tensor " + to_string(a.shape()));
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  require_rank2(a, "sum_axis");
  if (axis > 1) throw ShapeError("sum_axis: axis must be 0 or 1");
  const auto r = a.rows();
  const auto c = a.cols();
  const auto d = a.data();
  std::vector<double> v(axis == 0 ? c : r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[axis == 0 ? j : i] += d[i * c + j];
  const auto n = v.size();
  return Access::record(Op::SumAxis, Tensor({n}, std::move(v)), {a}, 0.0, axis);
}

Tensor broadcast_axis(const Tensor& v, std::size_t axis, std::size_t count) {
  if (v.rank() != 1) {
    throw ShapeError("broadcast_axis: expected rank-1 tensor, got " + to_string(v.shape()));
  }
  if (axis > 1) throw ShapeError("broadcast_axis: axis must be 0 or 1");
  const auto n = v.size();
  const auto d = v.data();
  Shape shape = axis == 0 ? Shape{count, n} : Shape{n, count};
  std::vector<double> out(count * n);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (axis == 0) {
        out[i * n + j] = d[j];
      } else {
        out[j * count + i] = d[j];
      }
    }
  return Access::record(Op::BroadcastAxis, Tensor(std::move(shape), std::move(out)), {v}, 0.0,
                        axis, count);
}

Tensor expand(const Tensor& a, const Shape& shape) {
  if (!is_single(a)) {
    throw ShapeError("expand: source must hold one element, got " + to_string(a.shape()));
  }
  return Access::record(Op::Expand, Tensor::full(shape, a[0]), {a});
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (element_count(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " +
                     to_string(shape));
  }
  std::vector<double> v(a.data().begin(), a.data().end());
  return Access::record(Op::Reshape, Tensor(shape, std::move(v)), {a});
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts differ for " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const auto r = a.rows();
  const auto p = a.cols();
  const auto q = b.cols();
  std::vector<double> v(r * (p + q));
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(ad.begin() + static_cast<std::ptrdiff_t>(i * p), p, v.begin() + i * (p + q));
    std::copy_n(bd.begin() + static_cast<std::ptrdiff_t>(i * q), q,
                v.begin() + i * (p + q) + p);
  }
  return Access::record(Op::ConcatCols, Tensor({r, p + q}, std::move(v)), {a, b});
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_rank2(a, "slice_cols");
  if (start + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " +
                     to_string(a.shape()));
  }
  const auto r = a.rows();
  const auto c = a.cols();
  std::vector<double> v(r * count);
  const auto d = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) v[i * count + j] = d[i * c + start + j];
  return Access::record(Op::SliceCols, Tensor({r, count}, std::move(v)), {a}, 0.0, start,
                        count);
}

// ---------------------------------------------------------------------------
// Backward

namespace {

// Folds a gradient of the broadcast result back onto an operand's shape.
Tensor unbroadcast(const Tensor& g, const Shape& shape) {
  if (g.shape() == shape) return g;
  return reshape(sum(g), shape);
}

Tensor relu_mask(const Tensor& x) {
  std::vector<double> m(x.size());
  const auto d = x.data();
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = d[i] > 0.0 ? 1.0 : 0.0;
  return Tensor(x.shape(), std::move(m));
}

}  // namespace

std::vector<Tensor> backward(const Tensor& output, const std::vector<Tensor>& wrt,
                             bool create_graph) {
  if (output.size() != 1) {
    throw ShapeError("backward: output must be a scalar, got " + to_string(output.shape()));
  }
  if (!output.is_taped()) throw TapeError("backward: output is not on a tape");
  Tape& tape = *output.tape();
  for (const auto& w : wrt) {
    if (!w.is_taped()) throw TapeError("backward: a wrt tensor is not on the tape");
    tape.check_owned(w);
  }
  tape.check_owned(output);

  const std::size_t top = output.node();
  std::vector<std::optional<Tensor>> grads(top + 1);
  grads[top] = Tensor::full(output.shape(), 1.0);

  // Only nodes lying on a path from some wrt tensor to the output matter.
  std::size_t first = top + 1;
  std::vector<char> on_path(top + 1, 0);
  for (const auto& w : wrt) {
    if (w.node() <= top) {
      on_path[w.node()] = 1;
      first = std::min(first, w.node());
    }
  }
  for (std::size_t i = first; i <= top; ++i) {
    if (on_path[i]) continue;
    for (const auto& in : Access::node(tape, i).inputs) {
      if (in.is_taped() && in.node() >= first && on_path[in.node()]) {
        on_path[i] = 1;
        break;
      }
    }
  }

  for (std::size_t idx = top + 1; idx-- > 0;) {
    if (idx < first) break;
    if (!grads[idx] || !on_path[idx]) continue;
    // Copy: recording gradient ops may grow the node list.
    const auto node = Access::node(tape, idx);
    if (node.op == Op::Leaf) continue;
    const Tensor g = create_graph ? *grads[idx] : grads[idx]->detach();

    auto input = [&](std::size_t k) {
      return create_graph ? node.inputs[k] : node.inputs[k].detach();
    };
    auto wants = [&](std::size_t k) {
      const Tensor& in = node.inputs[k];
      return in.is_taped() && in.node() >= first && on_path[in.node()];
    };
    auto push = [&](std::size_t k, const Tensor& contribution) {
      if (!wants(k)) return;
      auto& slot = grads[node.inputs[k].node()];
      slot = slot ? add(*slot, contribution) : contribution;
    };
    bool any_wanted = false;
    for (std::size_t k = 0; k < node.inputs.size(); ++k) any_wanted = any_wanted || wants(k);
    if (!any_wanted) continue;

    switch (node.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        if (wants(0)) push(0, unbroadcast(g, node.inputs[0].shape()));
        if (wants(1)) push(1, unbroadcast(g, node.inputs[1].shape()));
        break;
      case Op::Sub:
        if (wants(0)) push(0, unbroadcast(g, node.inputs[0].shape()));
        if (wants(1)) push(1, unbroadcast(neg(g), node.inputs[1].shape()));
        break;
      case Op::Mul:
        if (wants(0)) push(0, unbroadcast(mul(g, input(1)), node.inputs[0].shape()));
        if (wants(1)) push(1, unbroadcast(mul(g, input(0)), node.inputs[1].shape()));
        break;
      case Op::Neg:
        push(0, neg(g));
        break;
      case Op::Scale:
        push(0, scale(g, node.scalar));
        break;
      case Op::MatMul: {
        const bool ta = node.axis & 1u;
        const bool tb = node.axis & 2u;
        const Tensor a = input(0);
        const Tensor b = input(1);
        if (wants(0)) {
          if (!ta && !tb) push(0, matmul(g, b, false, true));
          if (!ta && tb) push(0, matmul(g, b, false, false));
          if (ta && !tb) push(0, matmul(b, g, false, true));
          if (ta && tb) push(0, matmul(b, g, true, true));
        }
        if (wants(1)) {
          if (!ta && !tb) push(1, matmul(a, g, true, false));
          if (!ta && tb) push(1, matmul(g, a, true, false));
          if (ta && !tb) push(1, matmul(a, g, false, false));
          if (ta && tb) push(1, matmul(g, a, true, true));
        }
        break;
      }
      case Op::Transpose:
        push(0, transpose(g));
        break;
      case Op::Relu:
        push(0, mul(g, relu_mask(node.inputs[0])));
        break;
      case Op::Sum:
        push(0, expand(g, node.inputs[0].shape()));
        break;
      case Op::SumAxis:
        push(0, broadcast_axis(g, node.axis, node.inputs[0].shape()[node.axis]));
        break;
      case Op::BroadcastAxis:
        push(0, sum_axis(g, node.axis));
        break;
      case Op::Expand:
        push(0, reshape(sum(g), node.inputs[0].shape()));
        break;
      case Op::Reshape:
        push(0, reshape(g, node.inputs[0].shape()));
        break;
      case Op::ConcatCols: {
        const auto p = node.inputs[0].cols();
        const auto q = node.inputs[1].cols();
        if (wants(0)) push(0, slice_cols(g, 0, p));
        if (wants(1)) push(1, slice_cols(g, p, q));
        break;
      }
      case Op::SliceCols: {
        const auto& src = node.inputs[0];
        const auto rows = src.rows();
        const auto before = node.axis;
        const auto after = src.cols() - node.axis - node.extent;
        Tensor padded = concat_cols(Tensor::zeros({rows, before}), g);
        padded = concat_cols(padded, Tensor::zeros({rows, after}));
        push(0, padded);
        break;
      }
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.node() <= top && grads[w.node()]) {
      out.push_back(*grads[w.node()]);
    } else {
      out.push_back(Tensor::zeros(w.shape()));
    }
  }
  return out;
}

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: step must be positive");
  std::vector<double> base(x.data().begin(), x.data().end());
  std::vector<double> g(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base;
    auto minus = base;
    plus[i] += h;
    minus[i] -= h;
    g[i] = (f(Tensor(x.shape(), std::move(plus))) - f(Tensor(x.shape(), std::move(minus)))) /
           (2.0 * h);
  }
  return Tensor(x.shape(), std::move(g));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("max_abs_diff: sizes differ for " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double relative_error(const Tensor& a, const Tensor& b, double floor) {
  double scale_ = floor;
  for (double v : a.data()) scale_ = std::max(scale_, std::abs(v));
  for (double v : b.data()) scale_ = std::max(scale_, std::abs(v));
  return max_abs_diff(a, b) / scale_;
}

}  // namespace gbml::ad

#pragma once

// Dense row-major tensors with a reverse-mode tape.
//
// A Tensor is a cheap value handle: its buffer is shared and immutable, so
// copying a Tensor never copies data. A Tensor created by an operation on a
// taped input records a node on that input's Tape. Gradients are computed by
// `backward`; with `create_graph` set the gradient computation is itself
// recorded, so a second `backward` over the result yields second-order
// derivatives (backward-over-backward).
//
// Broadcasting is deliberately narrow: equal shapes, or one operand holding a
// single element. Anything else throws ShapeError naming both shapes.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbml::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Tape;
namespace detail {
struct Access;
}

class Tensor {
 public:
  /// Rank-0 zero constant.
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_->size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return *data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const;
  /// Value of a single-element tensor.
  double item() const;

  bool is_taped() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t node() const { return node_; }

  /// Same value, no tape node.
  Tensor detach() const;

 private:
  friend class Tape;
  friend struct detail::Access;
  std::shared_ptr<const std::vector<double>> data_;
  Shape shape_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
  std::size_t generation_ = 0;
};

enum class Op {
  Leaf,
  Add,
  Sub,
  Mul,
  Neg,
  Scale,
  MatMul,
  Transpose,
  Relu,
  Sum,
  SumAxis,
  BroadcastAxis,
  Expand,
  Reshape,
  ConcatCols,
  SliceCols,
};

/// Append-only record of operations. Parents always precede children.
///
/// Not thread-safe; use one tape per execution context. Clearing a tape bumps
/// its generation so stale handles are rejected instead of silently aliasing
/// new nodes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `value` as a differentiable leaf on this tape.
  Tensor variable(const Tensor& value);

  std::size_t size() const { return nodes_.size(); }
  std::size_t generation() const { return generation_; }
  void clear();

  /// Operation kinds in recording order (for determinism checks).
  std::vector<Op> op_trace() const;

  /// Throws TapeError unless `t` was recorded on this tape in its current generation.
  void check_owned(const Tensor& t) const;

 private:
  friend struct detail::Access;

  struct Node {
    Op op = Op::Leaf;
    std::vector<Tensor> inputs;
    Shape shape;
    double scalar = 0.0;
    std::size_t axis = 0;
    std::size_t extent = 0;
  };

  std::vector<Node> nodes_;
  std::size_t generation_ = 1;
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

/// op(a) * op(b) for rank-2 operands, where op optionally transposes.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false,
              bool transpose_b = false);
Tensor transpose(const Tensor& a);

/// max(0, x); the derivative at exactly 0 is taken to be 0.
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Reduces a rank-2 tensor along `axis` (0: over rows -> [cols], 1: over cols -> [rows]).
Tensor sum_axis(const Tensor& a, std::size_t axis);
/// Inverse shape map of sum_axis: repeats a rank-1 tensor `count` times along `axis`.
Tensor broadcast_axis(const Tensor& v, std::size_t axis, std::size_t count);
/// Fills `shape` with the single element of `a`.
Tensor expand(const Tensor& a, const Shape& shape);
Tensor reshape(const Tensor& a, const Shape& shape);
/// [m x p] ++ [m x q] -> [m x (p + q)].
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Columns [start, start + count) of a rank-2 tensor.
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);

/// Gradients of a scalar `output` with respect to each tensor in `wrt`.
///
/// Unreachable inputs receive zeros. With `create_graph` the returned
/// gradients are taped and can be differentiated again.
std::vector<Tensor> backward(const Tensor& output, const std::vector<Tensor>& wrt,
                             bool create_graph = false);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

/// max |a - b| / max(max|a|, max|b|, floor).
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace gbml::ad

#pragma once

// Dense 64-bit tensors and a small reverse-mode tape covering the operations
// the reconstruction network needs (conv, leaky ReLU, nearest upsampling,
// channel concatenation) plus a handful of scalar reductions for losses.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nld {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Element of a rank-3 tensor laid out [c, y, x].
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  bool all_finite() const;
  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

enum class OpKind {
  leaf,
  constant,
  conv2d,
  leaky_relu,
  upsample_nearest,
  concat_channels,
  add,
  scale,
  sum,
  sum_squares,
  dot_const,
};

// Records a forward computation as a DAG. Nodes are appended in creation
// order, which is already a topological order, so backward is a single
// reverse sweep. A tape is owned by one thread of control.
class Tape {
 public:
  Var leaf(Tensor value);
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar node. Gradient buffers of every node are
  // reset to zero first, so calling backward twice gives the same result.
  void backward(Var loss);

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::vector<std::size_t> parents;
    Tensor value;
    Tensor grad;
    // Per-kind attributes.
    int stride = 1;
    int pad = 0;
    int factor = 1;
    double coef = 0.0;
    Tensor aux;
  };

  Var push(Node node);
  void backprop_node(std::size_t id);

  std::vector<Node> nodes_;

  friend Var conv2d(Tape&, Var, Var, Var, int, int);
  friend Var leaky_relu(Tape&, Var, double);
  friend Var upsample_nearest(Tape&, Var, int);
  friend Var concat_channels(Tape&, Var, Var);
  friend Var add(Tape&, Var, Var);
  friend Var scale(Tape&, Var, double);
  friend Var sum(Tape&, Var);
  friend Var sum_squares(Tape&, Var);
  friend Var dot_const(Tape&, Var, Tensor);
};

// x: [C_in,H,W], w: [C_out,C_in,k,k], b: [C_out]. Odd k, stride 1 or 2.
Var conv2d(Tape& tape, Var x, Var w, Var b, int stride, int pad);
Var leaky_relu(Tape& tape, Var x, double slope);
Var upsample_nearest(Tape& tape, Var x, int factor);
Var concat_channels(Tape& tape, Var a, Var b);
Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double alpha);
Var sum(Tape& tape, Var x);
Var sum_squares(Tape& tape, Var x);
// <x, weights>; backward delivers `weights` as the gradient of x. This is how
// an externally computed upstream gradient is injected into the graph.
Var dot_const(Tape& tape, Var x, Tensor weights);

// Untaped forward kernels, shared by the ops above.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      int stride, int pad);

}  // namespace nld

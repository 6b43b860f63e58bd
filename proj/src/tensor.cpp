#include "nld/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nld/error.hpp"

namespace nld {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    fail(ErrorCode::shape_mismatch, std::string(what) + ": expected rank " +
                                        std::to_string(rank) + ", got shape " +
                                        shape_string(t.shape()));
  }
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    fail(ErrorCode::non_finite, std::string(op) + " produced a non-finite value");
  }
}

std::size_t out_extent(std::size_t in, int k, int stride, int pad) {
  const long span = static_cast<long>(in) + 2L * pad - k;
  if (span < 0) return 0;
  return static_cast<std::size_t>(span / stride + 1);
}

// cols[(c*k + ky)*k + kx, oy*Wo + ox] = x[c, oy*s + ky - pad, ox*s + kx - pad]
RowMat im2col(const Tensor& x, int k, int stride, int pad, std::size_t ho,
              std::size_t wo) {
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  RowMat cols = RowMat::Zero(static_cast<long>(cin * k * k), static_cast<long>(ho * wo));
  for (std::size_t c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.row(static_cast<long>((c * k + ky) * k + kx)).data();
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy) * stride + ky - pad;
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          const double* src = x.data().data() + (c * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox) * stride + kx - pad;
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            row[oy * wo + ox] = src[ix];
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const RowMat& cols, int k, int stride, int pad, std::size_t ho,
            std::size_t wo, Tensor& dx) {
  const std::size_t cin = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
  for (std::size_t c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols.row(static_cast<long>((c * k + ky) * k + kx)).data();
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy) * stride + ky - pad;
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          double* dst = &dx.at(c, static_cast<std::size_t>(iy), 0);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox) * stride + kx - pad;
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            dst[ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

void check_conv_shapes(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                       int pad) {
  require_rank(x, 3, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  require_rank(b, 1, "conv2d bias");
  if (w.dim(1) != x.dim(0)) {
    fail(ErrorCode::shape_mismatch, "conv2d: weight expects " + std::to_string(w.dim(1)) +
                                        " input channels, input has " +
                                        std::to_string(x.dim(0)));
  }
  if (w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0) {
    fail(ErrorCode::shape_mismatch,
         "conv2d: kernel must be square with odd size, got " + shape_string(w.shape()));
  }
  if (b.dim(0) != w.dim(0)) {
    fail(ErrorCode::shape_mismatch, "conv2d: bias length " + std::to_string(b.dim(0)) +
                                        " != output channels " + std::to_string(w.dim(0)));
  }
  if (stride != 1 && stride != 2) {
    fail(ErrorCode::invalid_argument, "conv2d: stride must be 1 or 2");
  }
  if (pad < 0) fail(ErrorCode::invalid_argument, "conv2d: negative padding");
  const int k = static_cast<int>(w.dim(2));
  if (out_extent(x.dim(1), k, stride, pad) == 0 || out_extent(x.dim(2), k, stride, pad) == 0) {
    fail(ErrorCode::shape_mismatch, "conv2d: input " + shape_string(x.shape()) +
                                        " too small for kernel " + std::to_string(k));
  }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    fail(ErrorCode::shape_mismatch, "tensor shape " + shape_string(shape_) + " needs " +
                                        std::to_string(shape_size(shape_)) + " values, got " +
                                        std::to_string(data_.size()));
  }
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                      int pad) {
  check_conv_shapes(x, w, b, stride, pad);
  const int k = static_cast<int>(w.dim(2));
  const std::size_t cout = w.dim(0);
  const std::size_t ho = out_extent(x.dim(1), k, stride, pad);
  const std::size_t wo = out_extent(x.dim(2), k, stride, pad);

  const RowMat cols = im2col(x, k, stride, pad, ho, wo);
  ConstRowMap wmat(w.data().data(), static_cast<long>(cout), cols.rows());
  Tensor y({cout, ho, wo});
  RowMap ymat(y.data().data(), static_cast<long>(cout), static_cast<long>(ho * wo));
  ymat.noalias() = wmat * cols;
  for (std::size_t o = 0; o < cout; ++o) ymat.row(static_cast<long>(o)).array() += b[o];
  require_finite(y, "conv2d");
  return y;
}

Var Tape::push(Node node) {
  node.grad = Tensor(node.value.shape());
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.kind = OpKind::leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.kind = OpKind::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var conv2d(Tape& tape, Var x, Var w, Var b, int stride, int pad) {
  Tape::Node n;
  n.kind = OpKind::conv2d;
  n.value = conv2d_forward(tape.value(x), tape.value(w), tape.value(b), stride, pad);
  n.parents = {x.id, w.id, b.id};
  n.stride = stride;
  n.pad = pad;
  return tape.push(std::move(n));
}

Var leaky_relu(Tape& tape, Var x, double slope) {
  if (!(slope >= 0.0 && slope <= 1.0)) {
    fail(ErrorCode::invalid_argument, "leaky_relu: slope must lie in [0,1]");
  }
  Tape::Node n;
  n.kind = OpKind::leaky_relu;
  n.value = tape.value(x);
  for (auto& v : n.value.data()) v = v > 0.0 ? v : slope * v;
  require_finite(n.value, "leaky_relu");
  n.parents = {x.id};
  n.coef = slope;
  return tape.push(std::move(n));
}

Var upsample_nearest(Tape& tape, Var x, int factor) {
  if (factor <= 0) fail(ErrorCode::invalid_argument, "upsample_nearest: factor must be >= 1");
  const Tensor& in = tape.value(x);
  require_rank(in, 3, "upsample_nearest input");
  const std::size_t f = static_cast<std::size_t>(factor);
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  Tape::Node n;
  n.kind = OpKind::upsample_nearest;
  n.value = Tensor({c, h * f, w * f});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h * f; ++y)
      for (std::size_t xx = 0; xx < w * f; ++xx) n.value.at(ch, y, xx) = in.at(ch, y / f, xx / f);
  n.parents = {x.id};
  n.factor = factor;
  return tape.push(std::move(n));
}

Var concat_channels(Tape& tape, Var a, Var b) {
  const Tensor& ta = tape.value(a);
  const Tensor& tb = tape.value(b);
  require_rank(ta, 3, "concat_channels lhs");
  require_rank(tb, 3, "concat_channels rhs");
  if (ta.dim(1) != tb.dim(1) || ta.dim(2) != tb.dim(2)) {
    fail(ErrorCode::shape_mismatch, "concat_channels: spatial extents differ: " +
                                        shape_string(ta.shape()) + " vs " +
                                        shape_string(tb.shape()));
  }
  std::vector<double> data;
  data.reserve(ta.size() + tb.size());
  data.insert(data.end(), ta.values().begin(), ta.values().end());
  data.insert(data.end(), tb.values().begin(), tb.values().end());
  Tape::Node n;
  n.kind = OpKind::concat_channels;
  n.value = Tensor({ta.dim(0) + tb.dim(0), ta.dim(1), ta.dim(2)}, std::move(data));
  n.parents = {a.id, b.id};
  return tape.push(std::move(n));
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& ta = tape.value(a);
  const Tensor& tb = tape.value(b);
  if (ta.shape() != tb.shape()) {
    fail(ErrorCode::shape_mismatch,
         "add: " + shape_string(ta.shape()) + " vs " + shape_string(tb.shape()));
  }
  Tape::Node n;
  n.kind = OpKind::add;
  n.value = ta;
  for (std::size_t i = 0; i < tb.size(); ++i) n.value[i] += tb[i];
  require_finite(n.value, "add");
  n.parents = {a.id, b.id};
  return tape.push(std::move(n));
}

Var scale(Tape& tape, Var a, double alpha) {
  Tape::Node n;
  n.kind = OpKind::scale;
  n.value = tape.value(a);
  for (auto& v : n.value.data()) v *= alpha;
  require_finite(n.value, "scale");
  n.parents = {a.id};
  n.coef = alpha;
  return tape.push(std::move(n));
}

Var sum(Tape& tape, Var x) {
  double s = 0.0;
  for (double v : tape.value(x).data()) s += v;
  Tape::Node n;
  n.kind = OpKind::sum;
  n.value = Tensor::scalar(s);
  require_finite(n.value, "sum");
  n.parents = {x.id};
  return tape.push(std::move(n));
}

Var sum_squares(Tape& tape, Var x) {
  double s = 0.0;
  for (double v : tape.value(x).data()) s += v * v;
  Tape::Node n;
  n.kind = OpKind::sum_squares;
  n.value = Tensor::scalar(s);
  require_finite(n.value, "sum_squares");
  n.parents = {x.id};
  return tape.push(std::move(n));
}

Var dot_const(Tape& tape, Var x, Tensor weights) {
  const Tensor& tx = tape.value(x);
  if (tx.shape() != weights.shape()) {
    fail(ErrorCode::shape_mismatch, "dot_const: " + shape_string(tx.shape()) + " vs " +
                                        shape_string(weights.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) s += tx[i] * weights[i];
  Tape::Node n;
  n.kind = OpKind::dot_const;
  n.value = Tensor::scalar(s);
  require_finite(n.value, "dot_const");
  n.parents = {x.id};
  n.aux = std::move(weights);
  return tape.push(std::move(n));
}

void Tape::backward(Var loss) {
  if (loss.id >= nodes_.size()) fail(ErrorCode::invalid_argument, "backward: unknown node");
  if (nodes_[loss.id].value.size() != 1) {
    fail(ErrorCode::shape_mismatch, "backward: loss must be scalar, got shape " +
                                        shape_string(nodes_[loss.id].value.shape()));
  }
  for (auto& n : nodes_) n.grad.fill(0.0);
  nodes_[loss.id].grad[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) backprop_node(id);
}

void Tape::backprop_node(std::size_t id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  switch (n.kind) {
    case OpKind::leaf:
    case OpKind::constant:
      return;
    case OpKind::conv2d: {
      Node& xn = nodes_[n.parents[0]];
      Node& wn = nodes_[n.parents[1]];
      Node& bn = nodes_[n.parents[2]];
      const int k = static_cast<int>(wn.value.dim(2));
      const std::size_t cout = wn.value.dim(0);
      const std::size_t ho = n.value.dim(1), wo = n.value.dim(2);
      const RowMat cols = im2col(xn.value, k, n.stride, n.pad, ho, wo);
      ConstRowMap gmat(g.data().data(), static_cast<long>(cout), static_cast<long>(ho * wo));
      RowMap gw(wn.grad.data().data(), static_cast<long>(cout), cols.rows());
      gw.noalias() += gmat * cols.transpose();
      for (std::size_t o = 0; o < cout; ++o) {
        double s = 0.0;
        for (std::size_t p = 0; p < ho * wo; ++p) s += gmat(static_cast<long>(o), static_cast<long>(p));
        bn.grad[o] += s;
      }
      ConstRowMap wmat(wn.value.data().data(), static_cast<long>(cout), cols.rows());
      const RowMat gcols = wmat.transpose() * gmat;
      col2im(gcols, k, n.stride, n.pad, ho, wo, xn.grad);
      return;
    }
    case OpKind::leaky_relu: {
      Node& xn = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i)
        xn.grad[i] += xn.value[i] > 0.0 ? g[i] : n.coef * g[i];
      return;
    }
    case OpKind::upsample_nearest: {
      Node& xn = nodes_[n.parents[0]];
      const std::size_t f = static_cast<std::size_t>(n.factor);
      const std::size_t c = n.value.dim(0), h = n.value.dim(1), w = n.value.dim(2);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) xn.grad.at(ch, y / f, x / f) += g.at(ch, y, x);
      return;
    }
    case OpKind::concat_channels: {
      Node& an = nodes_[n.parents[0]];
      Node& bn = nodes_[n.parents[1]];
      const std::size_t na = an.value.size();
      for (std::size_t i = 0; i < na; ++i) an.grad[i] += g[i];
      for (std::size_t i = 0; i < bn.value.size(); ++i) bn.grad[i] += g[na + i];
      return;
    }
    case OpKind::add: {
      Node& an = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i) an.grad[i] += g[i];
      Node& bn = nodes_[n.parents[1]];
      for (std::size_t i = 0; i < g.size(); ++i) bn.grad[i] += g[i];
      return;
    }
    case OpKind::scale: {
      Node& an = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < g.size(); ++i) an.grad[i] += n.coef * g[i];
      return;
    }
    case OpKind::sum: {
      Node& xn = nodes_[n.parents[0]];
      for (auto& v : xn.grad.data()) v += g[0];
      return;
    }
    case OpKind::sum_squares: {
      Node& xn = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < xn.value.size(); ++i) xn.grad[i] += 2.0 * xn.value[i] * g[0];
      return;
    }
    case OpKind::dot_const: {
      Node& xn = nodes_[n.parents[0]];
      for (std::size_t i = 0; i < n.aux.size(); ++i) xn.grad[i] += n.aux[i] * g[0];
      return;
    }
  }
}

}  // namespace nld

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace las {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Opaque handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape over dense Eigen matrices.
///
/// Every primitive appends a node holding the forward value and a backward
/// closure. backward() replays the closures in reverse, accumulating
/// gradients additively (a value consumed k times receives k contributions).
/// Non-finite values in any forward or backward result are a hard error.
template <typename Scalar>
class Tape {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Mat v) {
    if (!v.allFinite()) throw NumericError("tape input is not finite");
    nodes_.push_back(Node{std::move(v), Mat()});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(Var v) const { return nodes_.at(v.id).value; }
  const Mat& grad(Var v) const { return nodes_.at(v.id).grad; }

  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (av.cols() != bv.rows())
      throw DimensionError("matmul: inner dimensions disagree (" +
                           shape_str(av) + " x " + shape_str(bv) + ")");
    Var out = emit(av * bv);
    steps_.push_back([this, a, b, out] {
      const Mat& g = nodes_[out.id].grad;
      nodes_[a.id].grad.noalias() += g * nodes_[b.id].value.transpose();
      nodes_[b.id].grad.noalias() += nodes_[a.id].value.transpose() * g;
    });
    return out;
  }

  Var transpose(Var a) {
    Var out = emit(value(a).transpose());
    steps_.push_back([this, a, out] {
      nodes_[a.id].grad += nodes_[out.id].grad.transpose();
    });
    return out;
  }

  Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    Var out = emit(value(a) + value(b));
    steps_.push_back([this, a, b, out] {
      const Mat& g = nodes_[out.id].grad;
      nodes_[a.id].grad += g;
      nodes_[b.id].grad += g;
    });
    return out;
  }

  Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    Var out = emit(value(a) - value(b));
    steps_.push_back([this, a, b, out] {
      const Mat& g = nodes_[out.id].grad;
      nodes_[a.id].grad += g;
      nodes_[b.id].grad -= g;
    });
    return out;
  }

  Var cmul(Var a, Var b) {
    require_same_shape(a, b, "cmul");
    Var out = emit(value(a).cwiseProduct(value(b)));
    steps_.push_back([this, a, b, out] {
      const Mat& g = nodes_[out.id].grad;
      nodes_[a.id].grad += g.cwiseProduct(nodes_[b.id].value);
      nodes_[b.id].grad += g.cwiseProduct(nodes_[a.id].value);
    });
    return out;
  }

  Var add_scalar(Var a, Scalar s) {
    Var out = emit(value(a).array() + s);
    steps_.push_back(
        [this, a, out] { nodes_[a.id].grad += nodes_[out.id].grad; });
    return out;
  }

  Var mul_scalar(Var a, Scalar s) {
    Var out = emit(value(a) * s);
    steps_.push_back(
        [this, a, s, out] { nodes_[a.id].grad += s * nodes_[out.id].grad; });
    return out;
  }

  Var tanh_(Var a) {
    Var out = emit(value(a).array().tanh());
    steps_.push_back([this, a, out] {
      const Mat& y = nodes_[out.id].value;
      nodes_[a.id].grad.array() +=
          nodes_[out.id].grad.array() * (Scalar(1) - y.array().square());
    });
    return out;
  }

  Var sigmoid_(Var a) {
    Mat y = (Scalar(1) / (Scalar(1) + (-value(a).array()).exp())).matrix();
    Var out = emit(std::move(y));
    steps_.push_back([this, a, out] {
      const Mat& y = nodes_[out.id].value;
      nodes_[a.id].grad.array() += nodes_[out.id].grad.array() * y.array() *
                                   (Scalar(1) - y.array());
    });
    return out;
  }

  /// Row block [start, start+len). On column vectors this is a segment.
  Var rows(Var a, int start, int len) {
    const Mat& av = value(a);
    if (start < 0 || len < 0 || start + len > av.rows())
      throw DimensionError("rows: block out of range");
    Var out = emit(av.middleRows(start, len));
    steps_.push_back([this, a, start, len, out] {
      nodes_[a.id].grad.middleRows(start, len) += nodes_[out.id].grad;
    });
    return out;
  }

  /// Vertical concatenation.
  Var concat_rows(Var a, Var b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (av.cols() != bv.cols())
      throw DimensionError("concat_rows: column counts disagree");
    // Record sizes before emit(): push_back may reallocate nodes_ and
    // invalidate av/bv.
    const int na = static_cast<int>(av.rows());
    const int nb = static_cast<int>(bv.rows());
    Mat v(na + nb, av.cols());
    v << av, bv;
    Var out = emit(std::move(v));
    steps_.push_back([this, a, b, na, nb, out] {
      const Mat& g = nodes_[out.id].grad;
      nodes_[a.id].grad += g.topRows(na);
      nodes_[b.id].grad += g.bottomRows(nb);
    });
    return out;
  }

  /// Stacks column vectors as the rows of a matrix.
  Var stack_rows(const std::vector<Var>& cols) {
    if (cols.empty()) throw DimensionError("stack_rows: empty input");
    const int n = static_cast<int>(cols.size());
    const int w = static_cast<int>(value(cols[0]).rows());
    Mat v(n, w);
    for (int i = 0; i < n; ++i) {
      const Mat& ci = value(cols[i]);
      if (ci.cols() != 1 || ci.rows() != w)
        throw DimensionError("stack_rows: operands must be equal-length column vectors");
      v.row(i) = ci.transpose();
    }
    Var out = emit(std::move(v));
    steps_.push_back([this, cols, out] {
      const Mat& g = nodes_[out.id].grad;
      for (int i = 0; i < static_cast<int>(cols.size()); ++i)
        nodes_[cols[i].id].grad += g.row(i).transpose();
    });
    return out;
  }

  /// Adds a 1xK row vector to every row of M.
  Var add_rowwise(Var m, Var row) {
    const Mat& mv = value(m);
    const Mat& rv = value(row);
    if (rv.rows() != 1 || rv.cols() != mv.cols())
      throw DimensionError("add_rowwise: row vector width mismatch");
    Var out = emit(mv.rowwise() + rv.row(0));
    steps_.push_back([this, m, row, out] {
      const Mat& g = nodes_[out.id].grad;
      nodes_[m.id].grad += g;
      nodes_[row.id].grad += g.colwise().sum();
    });
    return out;
  }

  /// Stable softmax of a column vector (max-subtraction).
  Var softmax_col(Var a) {
    const Mat& av = value(a);
    if (av.cols() != 1 || av.rows() < 1)
      throw DimensionError("softmax_col: expects a non-empty column vector");
    Mat e = (av.array() - av.maxCoeff()).exp();
    e /= e.sum();
    Var out = emit(std::move(e));
    steps_.push_back([this, a, out] {
      const Mat& y = nodes_[out.id].value;
      const Mat& g = nodes_[out.id].grad;
      const Scalar dot = (g.array() * y.array()).sum();
      nodes_[a.id].grad.array() += y.array() * (g.array() - dot);
    });
    return out;
  }

  /// Stable log-softmax of a column vector.
  Var log_softmax_col(Var a) {
    const Mat& av = value(a);
    if (av.cols() != 1 || av.rows() < 1)
      throw DimensionError("log_softmax_col: expects a non-empty column vector");
    const Scalar m = av.maxCoeff();
    const Scalar lse = m + std::log((av.array() - m).exp().sum());
    Var out = emit(av.array() - lse);
    steps_.push_back([this, a, out] {
      const Mat& g = nodes_[out.id].grad;
      const Scalar gsum = g.sum();
      nodes_[a.id].grad.array() +=
          g.array() - gsum * nodes_[out.id].value.array().exp();
    });
    return out;
  }

  /// Single element as a 1x1 value.
  Var pick(Var a, int r, int c = 0) {
    const Mat& av = value(a);
    if (r < 0 || r >= av.rows() || c < 0 || c >= av.cols())
      throw DimensionError("pick: index out of range");
    Mat v(1, 1);
    v(0, 0) = av(r, c);
    Var out = emit(std::move(v));
    steps_.push_back([this, a, r, c, out] {
      nodes_[a.id].grad(r, c) += nodes_[out.id].grad(0, 0);
    });
    return out;
  }

  Var sum(Var a) {
    Mat v(1, 1);
    v(0, 0) = value(a).sum();
    Var out = emit(std::move(v));
    steps_.push_back([this, a, out] {
      nodes_[a.id].grad.array() += nodes_[out.id].grad(0, 0);
    });
    return out;
  }

  /// Seeds d(out)/d(out) = 1 and replays the tape in reverse.
  void backward(Var out) {
    const Mat& ov = value(out);
    if (ov.rows() != 1 || ov.cols() != 1)
      throw DimensionError("backward: output must be scalar (1x1)");
    for (Node& n : nodes_)
      n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[out.id].grad(0, 0) = Scalar(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    for (const Node& n : nodes_)
      if (!n.grad.allFinite())
        throw NumericError("non-finite gradient after backward pass");
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
  };

  Var emit(Mat v) {
    if (!v.allFinite())
      throw NumericError("non-finite value in forward pass");
    nodes_.push_back(Node{std::move(v), Mat()});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void require_same_shape(Var a, Var b, const char* op) const {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (av.rows() != bv.rows() || av.cols() != bv.cols())
      throw DimensionError(std::string(op) + ": shapes disagree (" +
                           shape_str(av) + " vs " + shape_str(bv) + ")");
  }

  static std::string shape_str(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  }

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> steps_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace las

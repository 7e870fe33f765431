#include "mfg/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "mfg/errors.hpp"

namespace mfg::ad {
namespace {

// Expands m (r x c, 1 x c, r x 1 or 1 x 1) to rows x cols.
Matrix broadcast(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.rows() == 1 && m.cols() == 1) return Matrix::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1 && m.cols() == cols) return m.replicate(rows, 1);
  if (m.cols() == 1 && m.rows() == rows) return m.replicate(1, cols);
  std::ostringstream os;
  os << "cannot broadcast " << m.rows() << "x" << m.cols() << " to " << rows
     << "x" << cols;
  throw ContractViolation(os.str());
}

// Sums g back to the shape rows x cols (inverse of broadcast).
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

std::pair<Eigen::Index, Eigen::Index> result_shape(const Matrix& a,
                                                   const Matrix& b) {
  const Eigen::Index r = std::max(a.rows(), b.rows());
  const Eigen::Index c = std::max(a.cols(), b.cols());
  auto ok = [&](const Matrix& m) {
    return (m.rows() == r || m.rows() == 1) && (m.cols() == c || m.cols() == 1);
  };
  if (!ok(a) || !ok(b)) {
    std::ostringstream os;
    os << "shape mismatch " << a.rows() << "x" << a.cols() << " vs "
       << b.rows() << "x" << b.cols();
    throw ContractViolation(os.str());
  }
  return {r, c};
}

}  // namespace

Var Tape::constant(Matrix value) {
  return record(std::move(value), false, nullptr);
}

Var Tape::leaf(Matrix value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Matrix value, bool needs_grad, Pullback pullback) {
  nodes_.push_back(Node{std::move(value), Matrix(), needs_grad,
                        needs_grad ? std::move(pullback) : nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var output, const Matrix& seed) {
  const Node& out = nodes_[output.id];
  if (seed.rows() != out.value.rows() || seed.cols() != out.value.cols())
    throw ContractViolation("backward: seed shape does not match output");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[output.id].grad = seed;
  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.pullback || n.grad.size() == 0) continue;
    // Pullbacks only touch lower ids, so n.grad is stable during the call.
    n.pullback(*this, n.grad);
  }
}

void Tape::backward(Var output) {
  backward(output, Matrix::Ones(1, 1));
}

Var add(Tape& t, Var a, Var b) {
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  auto [r, c] = result_shape(va, vb);
  Matrix out = broadcast(va, r, c) + broadcast(vb, r, c);
  const auto ar = va.rows(), ac = va.cols(), br = vb.rows(), bc = vb.cols();
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                  [a, b, ar, ac, br, bc](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, reduce_to(g, ar, ac));
                    tp.accumulate(b, reduce_to(g, br, bc));
                  });
}

Var sub(Tape& t, Var a, Var b) {
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  auto [r, c] = result_shape(va, vb);
  Matrix out = broadcast(va, r, c) - broadcast(vb, r, c);
  const auto ar = va.rows(), ac = va.cols(), br = vb.rows(), bc = vb.cols();
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                  [a, b, ar, ac, br, bc](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, reduce_to(g, ar, ac));
                    tp.accumulate(b, reduce_to(-g, br, bc));
                  });
}

Var mul(Tape& t, Var a, Var b) {
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  auto [r, c] = result_shape(va, vb);
  Matrix out = broadcast(va, r, c).cwiseProduct(broadcast(vb, r, c));
  const auto ar = va.rows(), ac = va.cols(), br = vb.rows(), bc = vb.cols();
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                  [a, b, ar, ac, br, bc, r, c](Tape& tp, const Matrix& g) {
                    if (tp.needs_grad(a))
                      tp.accumulate(a, reduce_to(g.cwiseProduct(broadcast(
                                                     tp.value(b), r, c)),
                                                 ar, ac));
                    if (tp.needs_grad(b))
                      tp.accumulate(b, reduce_to(g.cwiseProduct(broadcast(
                                                     tp.value(a), r, c)),
                                                 br, bc));
                  });
}

Var div(Tape& t, Var a, Var b) {
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  auto [r, c] = result_shape(va, vb);
  Matrix out = broadcast(va, r, c).cwiseQuotient(broadcast(vb, r, c));
  const auto ar = va.rows(), ac = va.cols(), br = vb.rows(), bc = vb.cols();
  return t.record(
      std::move(out), t.needs_grad(a) || t.needs_grad(b),
      [a, b, ar, ac, br, bc, r, c](Tape& tp, const Matrix& g) {
        const Matrix B = broadcast(tp.value(b), r, c);
        if (tp.needs_grad(a))
          tp.accumulate(a, reduce_to(g.cwiseQuotient(B), ar, ac));
        if (tp.needs_grad(b)) {
          const Matrix A = broadcast(tp.value(a), r, c);
          Matrix gb = -(g.array() * A.array() / (B.array() * B.array())).matrix();
          tp.accumulate(b, reduce_to(gb, br, bc));
        }
      });
}

Var neg(Tape& t, Var a) { return scale(t, a, -1.0); }

Var scale(Tape& t, Var a, double c) {
  return t.record(t.value(a) * c, t.needs_grad(a),
                  [a, c](Tape& tp, const Matrix& g) { tp.accumulate(a, g * c); });
}

Var add_scalar(Tape& t, Var a, double c) {
  Matrix out = (t.value(a).array() + c).matrix();
  return t.record(std::move(out), t.needs_grad(a),
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g); });
}

Var exp(Tape& t, Var a) {
  Matrix out = t.value(a).array().exp().matrix();
  const int self = static_cast<int>(t.size());
  return t.record(std::move(out), t.needs_grad(a),
                  [a, self](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g.cwiseProduct(tp.value(Var{self})));
                  });
}

Var log(Tape& t, Var a) {
  Matrix out = t.value(a).array().log().matrix();
  return t.record(std::move(out), t.needs_grad(a),
                  [a](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g.cwiseQuotient(tp.value(a)));
                  });
}

Var tanh(Tape& t, Var a) {
  Matrix out = t.value(a).array().tanh().matrix();
  const int self = static_cast<int>(t.size());
  return t.record(std::move(out), t.needs_grad(a),
                  [a, self](Tape& tp, const Matrix& g) {
                    const auto& y = tp.value(Var{self}).array();
                    tp.accumulate(a, (g.array() * (1.0 - y * y)).matrix());
                  });
}

Var pow(Tape& t, Var a, double e) {
  Matrix out = t.value(a).array().pow(e).matrix();
  return t.record(std::move(out), t.needs_grad(a),
                  [a, e](Tape& tp, const Matrix& g) {
                    const auto& x = tp.value(a).array();
                    tp.accumulate(a, (g.array() * e * x.pow(e - 1.0)).matrix());
                  });
}

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  if (va.cols() != vb.rows()) {
    std::ostringstream os;
    os << "matmul: " << va.rows() << "x" << va.cols() << " times "
       << vb.rows() << "x" << vb.cols();
    throw ContractViolation(os.str());
  }
  Matrix out = va * vb;
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                  [a, b](Tape& tp, const Matrix& g) {
                    if (tp.needs_grad(a))
                      tp.accumulate(a, g * tp.value(b).transpose());
                    if (tp.needs_grad(b))
                      tp.accumulate(b, tp.value(a).transpose() * g);
                  });
}

Var sum_cols(Tape& t, Var a) {
  Matrix out = t.value(a).rowwise().sum();
  const auto cols = t.value(a).cols();
  return t.record(std::move(out), t.needs_grad(a),
                  [a, cols](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g.replicate(1, cols));
                  });
}

Var sum_all(Tape& t, Var a) {
  Matrix out = Matrix::Constant(1, 1, t.value(a).sum());
  const auto r = t.value(a).rows(), c = t.value(a).cols();
  return t.record(std::move(out), t.needs_grad(a),
                  [a, r, c](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, Matrix::Constant(r, c, g(0, 0)));
                  });
}

Var mean_all(Tape& t, Var a) {
  const double count = static_cast<double>(t.value(a).size());
  if (count == 0) throw ContractViolation("mean_all: empty operand");
  return scale(t, sum_all(t, a), 1.0 / count);
}

Var slice_cols(Tape& t, Var a, int start, int count) {
  const Matrix& va = t.value(a);
  if (start < 0 || count < 0 || start + count > va.cols())
    throw ContractViolation("slice_cols: range out of bounds");
  Matrix out = va.middleCols(start, count);
  const auto r = va.rows(), c = va.cols();
  return t.record(std::move(out), t.needs_grad(a),
                  [a, start, count, r, c](Tape& tp, const Matrix& g) {
                    Matrix full = Matrix::Zero(r, c);
                    full.middleCols(start, count) = g;
                    tp.accumulate(a, full);
                  });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat_cols: no operands");
  const auto rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool needs = false;
  for (Var p : parts) {
    if (t.value(p).rows() != rows)
      throw ContractViolation("concat_cols: row counts differ");
    cols += t.value(p).cols();
    needs = needs || t.needs_grad(p);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, t.value(p).cols()) = t.value(p);
    at += t.value(p).cols();
  }
  return t.record(std::move(out), needs, [parts](Tape& tp, const Matrix& g) {
    Eigen::Index off = 0;
    for (Var p : parts) {
      const auto w = tp.value(p).cols();
      if (tp.needs_grad(p)) tp.accumulate(p, g.middleCols(off, w));
      off += w;
    }
  });
}

Var clamp_min(Tape& t, Var a, double floor) {
  Matrix out = t.value(a).cwiseMax(floor);
  return t.record(std::move(out), t.needs_grad(a),
                  [a, floor](Tape& tp, const Matrix& g) {
                    const auto& x = tp.value(a).array();
                    tp.accumulate(a, (x >= floor).select(g.array(), 0.0).matrix());
                  });
}

Var softmax_rows(Tape& t, Var a) {
  const Matrix& x = t.value(a);
  Matrix out = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  const Eigen::VectorXd norm = out.rowwise().sum();
  out.array().colwise() /= norm.array();
  const int self = static_cast<int>(t.size());
  return t.record(std::move(out), t.needs_grad(a),
                  [a, self](Tape& tp, const Matrix& g) {
                    const Matrix& s = tp.value(Var{self});
                    // ds_j/dx_k = s_j (delta_jk - s_k)
                    const Eigen::VectorXd inner = g.cwiseProduct(s).rowwise().sum();
                    Matrix gx = s.cwiseProduct(g);
                    gx -= (s.array().colwise() * inner.array()).matrix();
                    tp.accumulate(a, gx);
                  });
}

}  // namespace mfg::ad

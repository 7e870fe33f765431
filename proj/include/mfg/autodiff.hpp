#pragma once

// Reverse-mode automatic differentiation on an append-only tape of batched
// matrix nodes. Rows index Monte Carlo samples, columns index features.
//
// Binary elementwise ops accept equal shapes, or one operand broadcast along
// rows (1 x c), along columns (r x 1), or as a scalar (1 x 1). Gradients are
// summed back to the operand's shape.

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace mfg::ad {

using Matrix = Eigen::MatrixXd;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  // Value not differentiated against.
  Var constant(Matrix value);
  // Leaf whose gradient is read after backward().
  Var leaf(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of the last backward() output w.r.t. v; zeros if v does not
  // influence it.
  Matrix grad(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  // Seeds d(output) = seed (same shape as output) and sweeps the tape once
  // in reverse creation order.
  void backward(Var output, const Matrix& seed);
  // Scalar outputs: seed 1.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Used by the op implementations.
  using Pullback = std::function<void(Tape&, const Matrix& g)>;
  Var record(Matrix value, bool needs_grad, Pullback pullback);
  void accumulate(Var v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Pullback pullback;
  };
  std::vector<Node> nodes_;
};

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var div(Tape& t, Var a, Var b);
Var neg(Tape& t, Var a);
Var scale(Tape& t, Var a, double c);
Var add_scalar(Tape& t, Var a, double c);
Var exp(Tape& t, Var a);
Var log(Tape& t, Var a);
Var tanh(Tape& t, Var a);
// a^e elementwise; a must be positive unless e is a positive integer.
Var pow(Tape& t, Var a, double e);
Var matmul(Tape& t, Var a, Var b);
// r x c -> r x 1
Var sum_cols(Tape& t, Var a);
// r x c -> 1 x 1
Var sum_all(Tape& t, Var a);
Var mean_all(Tape& t, Var a);
Var slice_cols(Tape& t, Var a, int start, int count);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
// max(a, floor) with derivative 1 where a >= floor and 0 where clamped.
Var clamp_min(Tape& t, Var a, double floor);
// Row-wise softmax, max-shifted.
Var softmax_rows(Tape& t, Var a);

}  // namespace mfg::ad

#pragma once

#include <functional>
#include <vector>

#include "irsfd/types.hpp"
#include "irsfd/wmmse.hpp"

namespace irsfd::ad {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation over complex matrices.
///
/// Every node holds a complex matrix; real scalars are 1x1 matrices with a
/// zero imaginary part. For a real loss L, the adjoint of a node A is the
/// matrix G with dL = Re Tr(G^H dA), i.e. G = dL/dRe(A) + i dL/dIm(A).
class Tape {
 public:
  /// Input whose gradient is wanted.
  Var leaf(CMat value);
  Var leaf_scalar(double value);
  /// Input treated as a constant; no gradient flows into or through it.
  Var constant(CMat value);
  Var constant_scalar(double value);

  const CMat& value(Var v) const;
  double scalar(Var v) const;
  /// Adjoint after backward(); a zero matrix if nothing reached the node.
  CMat grad(Var v) const;
  bool needs_grad(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var matmul(Var a, Var b);
  Var adjoint(Var a);
  Var scale(Var a, Complex c);
  /// s * A with s a real scalar node.
  Var scale_by(Var a, Var s);
  Var inverse(Var a);
  /// Re ln det A (real scalar).
  Var logdet(Var a);
  /// ln det(noise I + sum_i X_i X_i^H) for blocks X_i sharing a row count.
  /// Evaluated through a QR factorisation of [I; X / sqrt(noise)], which
  /// stays accurate when the covariance is badly conditioned.
  Var logdet_gram(const std::vector<Var>& blocks, double noise);
  Var trace_re(Var a);
  /// ||A||_F^2 (real scalar).
  Var frob2(Var a);
  /// A + s I with s a real scalar node.
  Var add_identity(Var a, Var s);
  /// A + c I for a constant c.
  Var add_identity(Var a, double c);
  /// s^{-1/2} for a positive real scalar node.
  Var rsqrt(Var s);
  /// Diagonal matrix of reciprocal diagonal entries. Throws NumericalError
  /// when some |a_ii| < threshold.
  Var dagger(Var a, double threshold = 1e-12);
  /// A Diag(phi) for a column vector phi.
  Var mul_diag(Var a, Var phi);
  /// Diag(phi) A for a column vector phi.
  Var diag_mul(Var phi, Var a);
  /// exp(j theta) elementwise for a real column vector theta.
  Var exp_j(Var theta);
  /// Sum of real scalars.
  Var sum(const std::vector<Var>& xs);

  /// Multiplier m >= 0 of min sum_l Tr(X_l^H A X_l) - 2 Re Tr(X_l^H R_l)
  /// s.t. sum_l ||X_l||^2 <= budget, with X_l = (A + m I)^{-1} R_l. The
  /// gradient follows from the implicit function theorem on the binding
  /// power equation and is zero when the constraint is inactive.
  Var kkt_multiplier(Var a, const std::vector<Var>& rhs, double budget, const BcdConfig& cfg = {});

  /// Seeds d out / d out = 1 for a real scalar node and propagates.
  void backward(Var out);
  void zero_grad();

 private:
  struct Node {
    CMat value;
    CMat grad;
    bool needs_grad = false;
    std::function<void(Tape&, const Node&)> back;
  };

  Var push(CMat value, bool needs_grad, std::function<void(Tape&, const Node&)> back = {});
  void accumulate(Var v, const CMat& g);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace irsfd::ad

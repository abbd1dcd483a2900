#include "irsfd/autodiff.hpp"

#include <cmath>

namespace irsfd::ad {

namespace {

CMat scalar_mat(double v) {
  CMat m(1, 1);
  m(0, 0) = Complex(v, 0.0);
  return m;
}

void require_same_shape(const CMat& a, const CMat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument(std::string("autodiff ") + op + ": shape mismatch");
}

void require_scalar(const CMat& a, const char* op) {
  if (a.rows() != 1 || a.cols() != 1) throw InvalidArgument(std::string("autodiff ") + op + ": expected a scalar");
}

void require_square(const CMat& a, const char* op) {
  if (a.rows() != a.cols()) throw InvalidArgument(std::string("autodiff ") + op + ": expected a square matrix");
}

}  // namespace

Var Tape::push(CMat value, bool needs_grad, std::function<void(Tape&, const Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= size()) throw InvalidArgument("autodiff: invalid variable handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::accumulate(Var v, const CMat& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

Var Tape::leaf(CMat value) { return push(std::move(value), true, [](Tape&, const Node&) {}); }
Var Tape::leaf_scalar(double value) { return leaf(scalar_mat(value)); }
Var Tape::constant(CMat value) { return push(std::move(value), false); }
Var Tape::constant_scalar(double value) { return constant(scalar_mat(value)); }

const CMat& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const CMat& m = node(v).value;
  require_scalar(m, "scalar");
  return m(0, 0).real();
}

CMat Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return CMat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push(value(a) + value(b), needs_grad(a) || needs_grad(b), [a, b](Tape& t, const Node& n) {
    t.accumulate(a, n.grad);
    t.accumulate(b, n.grad);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  return push(value(a) - value(b), needs_grad(a) || needs_grad(b), [a, b](Tape& t, const Node& n) {
    t.accumulate(a, n.grad);
    t.accumulate(b, -n.grad);
  });
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw InvalidArgument("autodiff matmul: inner dimension mismatch");
  return push(value(a) * value(b), needs_grad(a) || needs_grad(b), [a, b](Tape& t, const Node& n) {
    if (t.needs_grad(a)) t.accumulate(a, n.grad * t.value(b).adjoint());
    if (t.needs_grad(b)) t.accumulate(b, t.value(a).adjoint() * n.grad);
  });
}

Var Tape::adjoint(Var a) {
  return push(value(a).adjoint(), needs_grad(a), [a](Tape& t, const Node& n) { t.accumulate(a, n.grad.adjoint()); });
}

Var Tape::scale(Var a, Complex c) {
  return push(c * value(a), needs_grad(a), [a, c](Tape& t, const Node& n) { t.accumulate(a, std::conj(c) * n.grad); });
}

Var Tape::scale_by(Var a, Var s) {
  const double sv = scalar(s);
  return push(sv * value(a), needs_grad(a) || needs_grad(s), [a, s](Tape& t, const Node& n) {
    if (t.needs_grad(a)) t.accumulate(a, t.scalar(s) * n.grad);
    if (t.needs_grad(s)) t.accumulate(s, scalar_mat(n.grad.cwiseProduct(t.value(a).conjugate()).sum().real()));
  });
}

Var Tape::inverse(Var a) {
  require_square(value(a), "inverse");
  Eigen::PartialPivLU<CMat> lu(value(a));
  CMat inv = lu.inverse();
  if (!inv.allFinite()) throw NumericalError("autodiff inverse: singular matrix");
  return push(std::move(inv), needs_grad(a), [a](Tape& t, const Node& n) {
    const CMat ch = n.value.adjoint();
    t.accumulate(a, -ch * n.grad * ch);
  });
}

Var Tape::logdet(Var a) {
  require_square(value(a), "logdet");
  Eigen::PartialPivLU<CMat> lu(value(a));
  const CMat& u = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double m = std::abs(u(i, i));
    if (m == 0.0) throw NumericalError("autodiff logdet: singular matrix");
    s += std::log(m);
  }
  return push(scalar_mat(s), needs_grad(a), [a](Tape& t, const Node& n) {
    Eigen::PartialPivLU<CMat> f(t.value(a));
    t.accumulate(a, n.grad(0, 0).real() * f.inverse().adjoint());
  });
}

Var Tape::logdet_gram(const std::vector<Var>& blocks, double noise) {
  if (blocks.empty()) throw InvalidArgument("autodiff logdet_gram: no blocks");
  if (!(noise > 0.0)) throw InvalidArgument("autodiff logdet_gram: noise must be positive");
  const Eigen::Index n = value(blocks.front()).rows();
  Eigen::Index c = 0;
  bool ng = false;
  for (Var b : blocks) {
    if (value(b).rows() != n) throw InvalidArgument("autodiff logdet_gram: row mismatch");
    c += value(b).cols();
    ng = ng || needs_grad(b);
  }
  CMat x(n, c);
  Eigen::Index off = 0;
  for (Var b : blocks) {
    x.middleCols(off, value(b).cols()) = value(b);
    off += value(b).cols();
  }
  const double sigma = std::sqrt(noise);
  CMat w(c + n, c);
  w.topRows(c).setIdentity();
  w.bottomRows(n) = x / sigma;
  Eigen::HouseholderQR<CMat> qr(w);
  CMat r = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  double s = static_cast<double>(n) * std::log(noise);
  for (Eigen::Index i = 0; i < c; ++i) s += 2.0 * std::log(std::abs(r(i, i)));

  return push(scalar_mat(s), ng, [blocks, x = std::move(x), r = std::move(r), noise](Tape& t, const Node& nd) {
    // d/dX = 2 X (noise I + X^H X)^{-1} = 2 X R^{-1} R^{-H} / noise.
    CMat g = r.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(x);
    g = r.adjoint().triangularView<Eigen::Lower>().solve<Eigen::OnTheRight>(g);
    g *= 2.0 * nd.grad(0, 0).real() / noise;
    Eigen::Index o = 0;
    for (Var b : blocks) {
      const Eigen::Index k = t.value(b).cols();
      t.accumulate(b, g.middleCols(o, k));
      o += k;
    }
  });
}

Var Tape::trace_re(Var a) {
  require_square(value(a), "trace_re");
  return push(scalar_mat(value(a).trace().real()), needs_grad(a), [a](Tape& t, const Node& n) {
    const auto d = t.value(a).rows();
    t.accumulate(a, n.grad(0, 0).real() * CMat::Identity(d, d));
  });
}

Var Tape::frob2(Var a) {
  return push(scalar_mat(value(a).squaredNorm()), needs_grad(a),
              [a](Tape& t, const Node& n) { t.accumulate(a, 2.0 * n.grad(0, 0).real() * t.value(a)); });
}

Var Tape::add_identity(Var a, Var s) {
  require_square(value(a), "add_identity");
  const double sv = scalar(s);
  CMat v = value(a);
  v.diagonal().array() += sv;
  return push(std::move(v), needs_grad(a) || needs_grad(s), [a, s](Tape& t, const Node& n) {
    t.accumulate(a, n.grad);
    if (t.needs_grad(s)) t.accumulate(s, scalar_mat(n.grad.trace().real()));
  });
}

Var Tape::add_identity(Var a, double c) {
  require_square(value(a), "add_identity");
  CMat v = value(a);
  v.diagonal().array() += c;
  return push(std::move(v), needs_grad(a), [a](Tape& t, const Node& n) { t.accumulate(a, n.grad); });
}

Var Tape::rsqrt(Var s) {
  const double sv = scalar(s);
  if (!(sv > 0.0)) throw NumericalError("autodiff rsqrt: argument must be positive");
  return push(scalar_mat(1.0 / std::sqrt(sv)), needs_grad(s), [s](Tape& t, const Node& n) {
    const double x = t.scalar(s);
    t.accumulate(s, scalar_mat(n.grad(0, 0).real() * -0.5 / (x * std::sqrt(x))));
  });
}

Var Tape::dagger(Var a, double threshold) {
  const CMat& av = value(a);
  require_square(av, "dagger");
  CMat d = CMat::Zero(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    if (std::abs(av(i, i)) < threshold)
      throw NumericalError("dagger: diagonal entry " + std::to_string(i) + " is below the singularity threshold");
    d(i, i) = 1.0 / av(i, i);
  }
  return push(std::move(d), needs_grad(a), [a](Tape& t, const Node& n) {
    const CMat& x = t.value(a);
    CMat g = CMat::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Complex c = std::conj(x(i, i));
      g(i, i) = -n.grad(i, i) / (c * c);
    }
    t.accumulate(a, g);
  });
}

Var Tape::mul_diag(Var a, Var phi) {
  const CMat& av = value(a);
  const CMat& pv = value(phi);
  if (pv.cols() != 1 || pv.rows() != av.cols()) throw InvalidArgument("autodiff mul_diag: shape mismatch");
  CMat out = av * pv.col(0).asDiagonal();
  return push(std::move(out), needs_grad(a) || needs_grad(phi), [a, phi](Tape& t, const Node& n) {
    const CMat& x = t.value(a);
    const CMat& p = t.value(phi);
    if (t.needs_grad(a)) t.accumulate(a, n.grad * p.col(0).conjugate().asDiagonal());
    if (t.needs_grad(phi)) t.accumulate(phi, n.grad.cwiseProduct(x.conjugate()).colwise().sum().transpose());
  });
}

Var Tape::diag_mul(Var phi, Var a) {
  const CMat& av = value(a);
  const CMat& pv = value(phi);
  if (pv.cols() != 1 || pv.rows() != av.rows()) throw InvalidArgument("autodiff diag_mul: shape mismatch");
  CMat out = pv.col(0).asDiagonal() * av;
  return push(std::move(out), needs_grad(a) || needs_grad(phi), [a, phi](Tape& t, const Node& n) {
    const CMat& x = t.value(a);
    const CMat& p = t.value(phi);
    if (t.needs_grad(a)) t.accumulate(a, p.col(0).conjugate().asDiagonal() * n.grad);
    if (t.needs_grad(phi)) t.accumulate(phi, n.grad.cwiseProduct(x.conjugate()).rowwise().sum());
  });
}

Var Tape::exp_j(Var theta) {
  const CMat& th = value(theta);
  if (th.cols() != 1) throw InvalidArgument("autodiff exp_j: expected a column vector");
  CMat out(th.rows(), 1);
  for (Eigen::Index i = 0; i < th.rows(); ++i) out(i, 0) = std::polar(1.0, th(i, 0).real());
  return push(std::move(out), needs_grad(theta), [theta](Tape& t, const Node& n) {
    CMat g(n.value.rows(), 1);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      g(i, 0) = (std::conj(n.grad(i, 0)) * Complex(0.0, 1.0) * n.value(i, 0)).real();
    t.accumulate(theta, g);
  });
}

Var Tape::sum(const std::vector<Var>& xs) {
  double s = 0.0;
  bool ng = false;
  for (Var x : xs) {
    s += scalar(x);
    ng = ng || needs_grad(x);
  }
  return push(scalar_mat(s), ng, [xs](Tape& t, const Node& n) {
    for (Var x : xs) t.accumulate(x, n.grad);
  });
}

Var Tape::kkt_multiplier(Var a, const std::vector<Var>& rhs, double budget, const BcdConfig& cfg) {
  std::vector<CMat> r;
  bool ng = needs_grad(a);
  for (Var v : rhs) {
    r.push_back(value(v));
    ng = ng || needs_grad(v);
  }
  const double m = solve_shared_power(value(a), r, budget, cfg).multiplier;
  return push(scalar_mat(m), ng, [a, rhs](Tape& t, const Node& n) {
    const double lam = n.value(0, 0).real();
    if (lam <= 0.0) return;
    CMat shifted = t.value(a);
    shifted.diagonal().array() += lam;
    const CMat minv = Eigen::PartialPivLU<CMat>(shifted).inverse();
    const CMat mh = minv.adjoint();
    std::vector<CMat> p;
    double h_lambda = 0.0;
    CMat ga = CMat::Zero(minv.rows(), minv.cols());
    for (Var v : rhs) {
      p.push_back(minv * t.value(v));
      h_lambda += -2.0 * (p.back().adjoint() * minv * p.back()).trace().real();
      ga += -2.0 * mh * p.back() * p.back().adjoint();
    }
    if (h_lambda == 0.0) return;
    const double coef = -n.grad(0, 0).real() / h_lambda;
    t.accumulate(a, coef * ga);
    for (std::size_t i = 0; i < rhs.size(); ++i) t.accumulate(rhs[i], coef * 2.0 * mh * p[i]);
  });
}

void Tape::backward(Var out) {
  require_scalar(value(out), "backward");
  zero_grad();
  nodes_[static_cast<std::size_t>(out.id)].grad = scalar_mat(1.0);
  for (int i = out.id; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0 || !n.back) continue;
    n.back(*this, n);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.resize(0, 0);
}

}  // namespace irsfd::ad

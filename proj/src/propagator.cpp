#include "ringdrive/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ringdrive/errors.hpp"

namespace ringdrive {

namespace {

// Orthonormal Krylov basis of H from a normalized start vector, with full
// reorthogonalization. Stops early on invariant-subspace breakdown.
struct LanczosBasis {
  std::vector<Eigen::VectorXcd> vectors;
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[i] couples vectors i and i+1
  double residual_norm = 0.0;
  bool exhausted = false;
};

LanczosBasis lanczos(const SparseMatrix& h, const Eigen::VectorXcd& start,
                     int max_dim) {
  LanczosBasis out;
  Eigen::VectorXcd v = start;
  for (int j = 0; j < max_dim; ++j) {
    out.vectors.push_back(v);
    Eigen::VectorXcd w = h * v;
    const double a = v.dot(w).real();
    out.alpha.push_back(a);
    w -= a * v;
    if (j > 0) w -= out.beta[j - 1] * out.vectors[j - 1];
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : out.vectors) w -= q.dot(w) * q;
    const double b = w.norm();
    out.residual_norm = b;
    if (b < 1e-13 || static_cast<Eigen::Index>(out.vectors.size()) == h.rows()) {
      out.exhausted = true;
      break;
    }
    if (j + 1 < max_dim) {
      out.beta.push_back(b);
      v = w / b;
    }
  }
  return out;
}

Eigen::MatrixXd tridiagonal(const LanczosBasis& lb) {
  const auto m = static_cast<Eigen::Index>(lb.alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    t(i, i) = lb.alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = lb.beta[i];
  }
  return t;
}

Eigen::VectorXcd combine(const LanczosBasis& lb, const Eigen::VectorXcd& y) {
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(lb.vectors.front().size());
  for (std::size_t i = 0; i < lb.vectors.size(); ++i) x += y(i) * lb.vectors[i];
  return x;
}

Eigen::VectorXcd seeded_start(Eigen::Index dim) {
  std::mt19937_64 gen(0x5eedULL);
  std::normal_distribution<double> normal;
  Eigen::VectorXcd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = Complex(normal(gen), normal(gen));
  return v.normalized();
}

StateVector evolve_dense(const StateVector& psi, const HermitianOperator& h,
                         double dt) {
  const DenseEigensystem es = dense_eigensystem(h);
  Eigen::VectorXcd coeffs = es.vectors.adjoint() * psi.amplitudes;
  for (Eigen::Index k = 0; k < coeffs.size(); ++k)
    coeffs(k) *= std::polar(1.0, -es.values(k) * dt);
  return {psi.basis, es.vectors * coeffs};
}

StateVector evolve_krylov(const StateVector& psi, const HermitianOperator& h,
                          double dt, const PropagatorOptions& opts) {
  Eigen::VectorXcd v = psi.amplitudes;
  const double norm0 = v.norm();
  double remaining = dt;
  double step = dt;
  int substeps = 0;
  while (remaining > 0.0) {
    if (++substeps > opts.max_iterations * 64)
      throw ConvergenceFailure("Krylov propagation: too many substeps");
    const double vnorm = v.norm();
    LanczosBasis lb = lanczos(h.matrix, v / vnorm, opts.krylov_max_dim);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri(tridiagonal(lb));
    const Eigen::MatrixXcd q = tri.eigenvectors().cast<Complex>();
    const Eigen::VectorXcd first_row = q.row(0).adjoint();

    auto small_exp = [&](double tau) {
      Eigen::VectorXcd y = first_row;
      for (Eigen::Index k = 0; k < y.size(); ++k)
        y(k) *= std::polar(1.0, -tri.eigenvalues()(k) * tau);
      return Eigen::VectorXcd(q * y);
    };

    step = std::min(step * 2.0, remaining);
    Eigen::VectorXcd y;
    for (int halvings = 0;; ++halvings) {
      y = small_exp(step);
      // residual estimate: beta_m * |last component of exp(-i T tau) e1|
      const double err =
          lb.exhausted ? 0.0 : lb.residual_norm * std::abs(y(y.size() - 1));
      if (err <= opts.krylov_tolerance * std::max(step / dt, 1e-3)) break;
      if (halvings > 60)
        throw ConvergenceFailure("Krylov propagation: tolerance not met");
      step *= 0.5;
    }
    v = vnorm * combine(lb, y);
    remaining -= step;
    if (remaining < 1e-15 * dt) remaining = 0.0;
  }
  // Krylov projection is unitary up to roundoff; remove accumulated drift
  v *= norm0 / v.norm();
  return {psi.basis, v};
}

}  // namespace

DenseEigensystem dense_eigensystem(const HermitianOperator& h) {
  DenseEigensystem out;
  if (h.is_real()) {
    const Eigen::MatrixXd m = Eigen::MatrixXcd(h.matrix).real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
      throw ConvergenceFailure("dense real eigensolver failed");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors().cast<Complex>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense());
    if (es.info() != Eigen::Success)
      throw ConvergenceFailure("dense complex eigensolver failed");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  return out;
}

Eigen::VectorXd spectrum(const HermitianOperator& h) {
  return dense_eigensystem(h).values;
}

EigenPair ground_state(const HermitianOperator& h,
                       const PropagatorOptions& opts) {
  const Eigen::Index dim = h.dim();
  if (dim < 1) throw InvalidArg("ground_state: empty operator");
  const double tol = 1e-8 * std::max(h.max_abs(), 1e-300);

  if (dim <= opts.dense_limit) {
    const DenseEigensystem es = dense_eigensystem(h);
    return {es.values(0), {h.basis, es.vectors.col(0)}};
  }

  Eigen::VectorXcd x = seeded_start(dim);
  const int krylov_dim = std::max(opts.krylov_max_dim, 100);
  for (int restart = 0; restart < opts.max_iterations; ++restart) {
    LanczosBasis lb = lanczos(h.matrix, x, krylov_dim);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri(tridiagonal(lb));
    const double energy = tri.eigenvalues()(0);
    x = combine(lb, tri.eigenvectors().col(0).cast<Complex>()).normalized();
    const double residual = (h.matrix * x - energy * x).norm();
    if (residual <= tol) return {energy, {h.basis, x}};
  }
  throw ConvergenceFailure("Lanczos ground state did not converge");
}

StateVector evolve(const StateVector& psi, const HermitianOperator& h,
                   double dt, const PropagatorOptions& opts) {
  require_same_basis(psi.basis, h.basis, "evolve");
  if (psi.dim() != h.dim()) throw BasisMismatch("evolve: dimension mismatch");
  if (dt < 0.0) throw InvalidArg("evolve: negative time step");
  if (dt == 0.0) return psi;
  if (h.dim() <= opts.dense_limit) return evolve_dense(psi, h, dt);
  return evolve_krylov(psi, h, dt, opts);
}

}  // namespace ringdrive

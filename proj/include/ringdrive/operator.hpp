#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>

#include "ringdrive/basis.hpp"

namespace ringdrive {

using Complex = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;

// Sparse Hermitian matrix over a basis. Both triangles are stored
// explicitly; builders guarantee M(j,i) == conj(M(i,j)) entry by entry.
struct HermitianOperator {
  BasisTag basis;
  SparseMatrix matrix;

  Eigen::Index dim() const { return matrix.rows(); }
  // Largest absolute entry, used as the operator scale in tolerances.
  double max_abs() const;
  // max |M - M^dagger| over stored entries.
  double hermiticity_defect() const;
  bool is_real() const;
  Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(matrix); }
};

struct StateVector {
  BasisTag basis;
  Eigen::VectorXcd amplitudes;

  Eigen::Index dim() const { return amplitudes.size(); }
  double norm() const { return amplitudes.norm(); }
};

// <psi|O|psi>, real part (O is Hermitian).
double expectation(const HermitianOperator& op, const StateVector& psi);

void require_same_basis(const BasisTag& a, const BasisTag& b, const char* what);

}  // namespace ringdrive

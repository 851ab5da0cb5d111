#pragma once

#include <utility>

#include "ringdrive/operator.hpp"

namespace ringdrive {

struct PropagatorOptions {
  // Dense eigendecomposition up to this dimension, Krylov/Lanczos above.
  Eigen::Index dense_limit = 2000;
  double krylov_tolerance = 1e-9;
  int krylov_max_dim = 40;
  int max_iterations = 200;  // Lanczos restarts (ground state) or substeps
};

struct EigenPair {
  double energy = 0.0;
  StateVector state;
};

// Lowest eigenpair. Residual ||H psi - E psi|| <= 1e-8 * max|H_ij|.
EigenPair ground_state(const HermitianOperator& h,
                       const PropagatorOptions& opts = {});

// exp(-i H dt) psi with hbar = 1.
StateVector evolve(const StateVector& psi, const HermitianOperator& h,
                   double dt, const PropagatorOptions& opts = {});

// Full spectrum in ascending order (dense; intended for small operators).
Eigen::VectorXd spectrum(const HermitianOperator& h);

// Dense eigensystem with a real fast path when H has no imaginary part.
struct DenseEigensystem {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};
DenseEigensystem dense_eigensystem(const HermitianOperator& h);

}  // namespace ringdrive

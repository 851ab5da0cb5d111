#include <doctest.h>

#include "oracles.hpp"
#include "ringdrive/errors.hpp"
#include "ringdrive/hamiltonian.hpp"
#include "ringdrive/propagator.hpp"

using namespace ringdrive;

namespace {

HermitianOperator random_bh(int l, int n, std::mt19937_64& g) {
  const auto b = build_fock_basis(l, n);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  return bh_hamiltonian(b, 1.0, u(g), oracle::random_potentials(l, 2.0, g));
}

HermitianOperator random_qpm(int l, int dq, std::mt19937_64& g) {
  const auto b = build_charge_basis(l, dq);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  return qpm_hamiltonian(b, 1.0, u(g), oracle::random_potentials(l, 2.0, g), u(g));
}

StateVector random_psi(const HermitianOperator& h, std::mt19937_64& g) {
  return {h.basis, oracle::random_state(h.dim(), g)};
}

}  // namespace

TEST_CASE("evolve by zero time is the identity") {
  std::mt19937_64 g(1);
  const auto h = random_bh(5, 2, g);
  const auto psi = random_psi(h, g);
  CHECK((evolve(psi, h, 0.0).amplitudes - psi.amplitudes).norm() < 1e-14);
}

TEST_CASE("diagonal Hamiltonian multiplies phases") {
  const auto b = build_charge_basis(3, 1);
  const std::vector<double> p{0.5, -1.0, 0.25};
  const auto h = qpm_hamiltonian(b, 0.0, 0.7, p, 0.0);
  std::mt19937_64 g(4);
  const auto psi = random_psi(h, g);
  const double dt = 1.3;
  const auto out = evolve(psi, h, dt);
  for (Eigen::Index i = 0; i < h.dim(); ++i) {
    const double e = h.matrix.coeff(i, i).real();
    CHECK(std::abs(out.amplitudes(i) - std::polar(1.0, -e * dt) * psi.amplitudes(i)) < 1e-12);
  }
}

TEST_CASE("L=3 single particle evolution matches matrix exponential") {
  const auto b = build_fock_basis(3, 1);
  const auto h = bh_hamiltonian(b, 1.0, 0.0, std::vector<double>{0.4, 0.0, -0.3});
  std::mt19937_64 g(8);
  const auto psi = random_psi(h, g);
  const auto out = evolve(psi, h, 0.7);
  CHECK((out.amplitudes - oracle::expm_apply(h.dense(), psi.amplitudes, 0.7)).norm() < 1e-9);
}

TEST_CASE("evolve matches dense oracle on random instances, dense and Krylov paths") {
  std::mt19937_64 g(21);
  std::uniform_real_distribution<double> tdist(0.0, 5.0);
  PropagatorOptions krylov;
  krylov.dense_limit = 4;
  for (int trial = 0; trial < 30; ++trial) {
    const auto h = trial % 2 ? random_bh(3 + trial % 5, 1 + trial % 3, g)
                             : random_qpm(3 + trial % 3, 1 + trial % 2, g);
    REQUIRE(h.dim() <= 400);
    const auto psi = random_psi(h, g);
    const double dt = tdist(g);
    const Eigen::VectorXcd ref = oracle::expm_apply(h.dense(), psi.amplitudes, dt);
    const auto a = evolve(psi, h, dt);
    const auto k = evolve(psi, h, dt, krylov);
    CHECK((a.amplitudes - ref).norm() < 1e-9);
    CHECK((k.amplitudes - ref).norm() < 1e-9);
    CHECK(std::abs(a.norm() - 1.0) < 1e-10);
    CHECK(std::abs(k.norm() - 1.0) < 1e-10);
  }
}

TEST_CASE("evolution composes in time") {
  std::mt19937_64 g(31);
  PropagatorOptions krylov;
  krylov.dense_limit = 4;
  for (const auto& opts : {PropagatorOptions{}, krylov}) {
    const auto h = random_bh(6, 2, g);
    const auto psi = random_psi(h, g);
    const auto once = evolve(psi, h, 2.3, opts);
    const auto twice = evolve(evolve(psi, h, 0.9, opts), h, 1.4, opts);
    CHECK((once.amplitudes - twice.amplitudes).norm() < 1e-9);
  }
}

TEST_CASE("evolution conserves energy") {
  std::mt19937_64 g(41);
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = random_qpm(4, 1 + trial % 2, g);
    const auto psi = random_psi(h, g);
    const double e0 = expectation(h, psi);
    const double e1 = expectation(h, evolve(psi, h, 3.7));
    CHECK(std::abs(e1 - e0) <= 1e-8 * std::max(1.0, std::abs(e0)));
  }
}

TEST_CASE("evolve rejects bad input") {
  std::mt19937_64 g(51);
  const auto h = random_bh(4, 1, g);
  const auto psi = random_psi(h, g);
  CHECK_THROWS_AS(evolve(psi, h, -0.1), InvalidArg);
  const auto other = random_bh(5, 1, g);
  CHECK_THROWS(evolve(psi, other, 0.1));
}

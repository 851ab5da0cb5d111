#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "ringdrive/basis.hpp"
#include "ringdrive/errors.hpp"

using namespace ringdrive;

namespace {

// Independent count of zero-sum vectors in [-dq, dq]^L by recursion on the
// running sum.
std::size_t count_zero_sum(int sites, int dq, int sum = 0) {
  if (sites == 0) return sum == 0 ? 1 : 0;
  std::size_t n = 0;
  for (int q = -dq; q <= dq; ++q) n += count_zero_sum(sites - 1, dq, sum + q);
  return n;
}

std::size_t binomial(int n, int k) {
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_CASE("fock basis counts follow stars and bars") {
  CHECK(build_fock_basis(12, 2).size() == 78);
  CHECK(build_fock_basis(12, 3).size() == 364);
  for (int l = 3; l <= 8; ++l)
    for (int n = 1; n <= 4; ++n) {
      CHECK(build_fock_basis(l, n).size() == binomial(l + n - 1, n));
      CHECK(fock_dimension(l, n) == binomial(l + n - 1, n));
    }
}

TEST_CASE("fock basis single particle ordering") {
  const auto b = build_fock_basis(3, 1);
  REQUIRE(b.size() == 3);
  CHECK(b.state(0) == Configuration{1, 0, 0});
  CHECK(b.state(1) == Configuration{0, 1, 0});
  CHECK(b.state(2) == Configuration{0, 0, 1});
}

TEST_CASE("fock basis is strictly ordered and indexed") {
  const auto b = build_fock_basis(5, 3);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& s = b.state(i);
    CHECK(std::accumulate(s.begin(), s.end(), 0) == 3);
    CHECK(std::all_of(s.begin(), s.end(), [](int v) { return v >= 0; }));
    CHECK(b.find(s) == i);
    if (i > 0) CHECK(std::lexicographical_compare(s.begin(), s.end(), b.state(i - 1).begin(),
                                                  b.state(i - 1).end()));
  }
  CHECK(b.find(Configuration{4, 0, 0, 0, 0}) == b.size());
}

TEST_CASE("charge basis L=2 enumeration") {
  const auto b = build_charge_basis(2, 1);
  REQUIRE(b.size() == 3);
  CHECK(b.state(0) == Configuration{-1, 1});
  CHECK(b.state(1) == Configuration{0, 0});
  CHECK(b.state(2) == Configuration{1, -1});
}

TEST_CASE("charge basis counts match recursive oracle") {
  CHECK(build_charge_basis(7, 2).size() == count_zero_sum(7, 2));
  CHECK(build_charge_basis(5, 4).size() == count_zero_sum(5, 4));
  CHECK(build_charge_basis(3, 1).size() == 7);
}

TEST_CASE("charge basis vectors are bounded, zero-sum, ordered and indexed") {
  const auto b = build_charge_basis(5, 2);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& s = b.state(i);
    CHECK(std::accumulate(s.begin(), s.end(), 0) == 0);
    CHECK(std::all_of(s.begin(), s.end(), [](int v) { return std::abs(v) <= 2; }));
    CHECK(b.find(s) == i);
    if (i > 0) CHECK(std::lexicographical_compare(b.state(i - 1).begin(), b.state(i - 1).end(),
                                                  s.begin(), s.end()));
  }
}

TEST_CASE("basis construction errors") {
  CHECK_THROWS_AS(build_fock_basis(2, 1), InvalidArg);
  CHECK_THROWS_AS(build_fock_basis(4, 0), InvalidArg);
  CHECK_THROWS_AS(build_fock_basis(12, 6, 1000), DimensionCap);
  CHECK_THROWS_AS(build_charge_basis(1, 1), InvalidArg);
  CHECK_THROWS_AS(build_charge_basis(4, 0), InvalidArg);
  CHECK_THROWS_AS(build_charge_basis(8, 3, 1000), DimensionCap);
}

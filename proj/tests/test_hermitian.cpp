#include <doctest.h>

#include <cmath>
#include <complex>

#include "nova/hermitian.hpp"
#include "nova/rng.hpp"
#include "oracles.hpp"

using namespace nova;

namespace {

// Closed-form PSD projection of a hermitian 2x2 matrix, written directly from
// the quadratic characteristic polynomial so it shares nothing with herm_eig.
ComplexMatrix psd_project_2x2(const ComplexMatrix& m) {
  const double a = m(0, 0).real();
  const double c = m(1, 1).real();
  const std::complex<double> b = m(0, 1);
  const double disc = std::sqrt((a - c) * (a - c) + 4.0 * std::norm(b));
  const double hi = 0.5 * (a + c + disc);
  const double lo = 0.5 * (a + c - disc);

  if (lo >= 0.0) return m;
  if (hi <= 0.0) return ComplexMatrix::Zero(2, 2);

  ComplexVector v(2);
  if (std::abs(b) > 1e-300) {
    v << b, std::complex<double>(hi - a, 0.0);
  } else if (a >= c) {
    v << 1.0, 0.0;
  } else {
    v << 0.0, 1.0;
  }
  v.normalize();
  return hi * (v * v.adjoint());
}

}  // namespace

TEST_CASE("hermitize returns the hermitian part") {
  SplitRng rng(11);
  ComplexMatrix a(3, 3);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a(r, c) = {rng.gaussian(), rng.gaussian()};
  }
  const ComplexMatrix h = hermitize(a);
  CHECK((h - ComplexMatrix(h.adjoint())).norm() == doctest::Approx(0.0));
  // Re<X, A> = Re<X, herm(A)> for hermitian X, so the hermitian part is the
  // unique hermitian matrix at minimum Frobenius distance from A.
  const ComplexMatrix skew = a - h;
  CHECK(std::abs(re_inner(oracle::random_hermitian(rng, 3), skew)) < 1e-12);
}

TEST_CASE("herm_eig reconstructs with descending values and orthonormal vectors") {
  SplitRng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 3);
    const ComplexMatrix a = oracle::random_hermitian(rng, n);
    const EigenPair ep = herm_eig(a);
    CHECK((ep.vectors * ep.values.asDiagonal() * ep.vectors.adjoint() - a).norm() < 1e-12);
    CHECK((ep.vectors.adjoint() * ep.vectors - ComplexMatrix::Identity(n, n)).norm() < 1e-12);
    for (int j = 1; j < n; ++j) CHECK(ep.values(j) <= ep.values(j - 1) + 1e-15);
  }
}

TEST_CASE("psd projection matches the 2x2 closed form") {
  SplitRng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const ComplexMatrix a = oracle::random_hermitian(rng, 2, 1.0 + 3.0 * rng.uniform());
    const ComplexMatrix ours = psd_project(a);
    const ComplexMatrix ref = psd_project_2x2(a);
    CHECK((ours - ref).norm() < 1e-12);
  }
}

TEST_CASE("psd projection is idempotent and optimal") {
  SplitRng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 3);
    const ComplexMatrix a = oracle::random_hermitian(rng, n, 2.0);
    const ComplexMatrix p = psd_project(a);

    CHECK(herm_eig(p).values.minCoeff() >= -1e-13);
    CHECK((psd_project(p) - p).norm() < 1e-12);
    // Projection onto a convex cone: the residual is orthogonal to the
    // projection and no feasible point is closer.
    CHECK(std::abs(re_inner(a - p, p)) < 1e-10);
    for (int probe = 0; probe < 10; ++probe) {
      const ComplexMatrix x = oracle::random_psd(rng, n, 1.5);
      CHECK((a - p).norm() <= (a - x).norm() + 1e-12);
    }
  }
}

TEST_CASE("logdet agrees with the eigenvalue sum and the determinant") {
  SplitRng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 3);
    const ComplexMatrix a =
        oracle::random_psd(rng, n) + 0.5 * ComplexMatrix::Identity(n, n);
    const double ours = logdet_psd(a);

    const EigenPair ep = herm_eig(a);
    double via_eig = 0.0;
    for (int j = 0; j < n; ++j) via_eig += std::log(ep.values(j));
    CHECK(ours == doctest::Approx(via_eig).epsilon(1e-12));
    CHECK(ours == doctest::Approx(std::log(a.determinant().real())).epsilon(1e-10));
  }
}

TEST_CASE("logdet rejects indefinite input") {
  ComplexMatrix a = ComplexMatrix::Identity(2, 2);
  a(1, 1) = -1.0;
  CHECK_THROWS_AS(logdet_psd(a), std::domain_error);
}

TEST_CASE("re_inner matches the elementwise sum") {
  SplitRng rng(16);
  const ComplexMatrix a = oracle::random_hermitian(rng, 3);
  const ComplexMatrix b = oracle::random_hermitian(rng, 3);
  double manual = 0.0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) manual += std::real(a(r, c) * std::conj(b(r, c)));
  }
  CHECK(re_inner(a, b) == doctest::Approx(manual).epsilon(1e-14));
  // For hermitian arguments the trace form is the same number.
  CHECK(re_inner(a, b) == doctest::Approx((a * b).trace().real()).epsilon(1e-12));
}

TEST_CASE("hermitian basis is orthonormal and spans") {
  for (int n = 1; n <= 4; ++n) {
    const auto basis = hermitian_basis(n);
    REQUIRE(static_cast<int>(basis.size()) == n * n);
    for (size_t i = 0; i < basis.size(); ++i) {
      CHECK((basis[i] - ComplexMatrix(basis[i].adjoint())).norm() < 1e-15);
      for (size_t j = 0; j <= i; ++j) {
        const double want = i == j ? 1.0 : 0.0;
        CHECK(re_inner(basis[i], basis[j]) == doctest::Approx(want).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("hermitian coordinates are an isometric round trip") {
  SplitRng rng(17);
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      const ComplexMatrix a = oracle::random_hermitian(rng, n);
      const RealVector c = hermitian_coords(a);
      REQUIRE(c.size() == n * n);
      CHECK((hermitian_from_coords(c, n) - a).norm() < 1e-13);
      CHECK(c.norm() == doctest::Approx(a.norm()).epsilon(1e-13));

      // Coordinates agree with projections onto the orthonormal basis.
      const auto basis = hermitian_basis(n);
      for (int k = 0; k < n * n; ++k) {
        CHECK(c(k) == doctest::Approx(re_inner(a, basis[k])).epsilon(1e-12));
      }
    }
  }
}

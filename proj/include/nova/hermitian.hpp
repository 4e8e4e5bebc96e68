#pragma once

// Dense complex Hermitian primitives used throughout the solvers: eigen
// decomposition with a fixed (descending) ordering, projection onto the PSD
// cone, Cholesky log-determinants, the real trace inner product, and a real
// orthonormal basis of the Hermitian matrix space (used to pose matrix-valued
// dual variables as plain real vectors).

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace nova {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

// Hermitian-by-construction wrapper: input is symmetrized once on entry, so
// code holding a HermitianMatrix can rely on exact A == A^H.
class HermitianMatrix {
public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(const ComplexMatrix& a) : m_(0.5 * (a + a.adjoint())) {}

  static HermitianMatrix Zero(Eigen::Index n) { return HermitianMatrix(ComplexMatrix::Zero(n, n)); }
  static HermitianMatrix Identity(Eigen::Index n) {
    return HermitianMatrix(ComplexMatrix::Identity(n, n));
  }

  const ComplexMatrix& mat() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

private:
  ComplexMatrix m_;
};

struct EigenPair {
  RealVector values;      // sorted descending
  ComplexMatrix vectors;  // unitary, columns match values
};

// (A + A^H) / 2
ComplexMatrix hermitize(const ComplexMatrix& a);

// Eigen decomposition of a Hermitian matrix, eigenvalues descending.
// The ComplexMatrix overload symmetrizes its input first.
EigenPair herm_eig(const HermitianMatrix& a);
EigenPair herm_eig(const ComplexMatrix& a);

// Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped to 0).
HermitianMatrix psd_project(const HermitianMatrix& a);
ComplexMatrix psd_project(const ComplexMatrix& a);

// log det A via Cholesky; throws std::domain_error unless A is positive
// definite (within factorization tolerance).
double logdet_psd(const ComplexMatrix& a);

// Re tr(A^H B); the real inner product under which all gradients here live.
double re_inner(const ComplexMatrix& a, const ComplexMatrix& b);

// Orthonormal basis of the n x n Hermitian matrices as a real vector space
// (dimension n^2) under re_inner. Ordering: diagonal units first, then for
// each i < j the symmetric and antisymmetric pair.
std::vector<ComplexMatrix> hermitian_basis(Eigen::Index n);

// Coordinates of a Hermitian matrix in hermitian_basis(n) order, and back.
RealVector hermitian_coords(const ComplexMatrix& a);
ComplexMatrix hermitian_from_coords(const RealVector& c, Eigen::Index n);

}  // namespace nova

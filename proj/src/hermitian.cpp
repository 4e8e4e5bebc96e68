#include "nova/hermitian.hpp"

#include <cmath>
#include <stdexcept>

namespace nova {

ComplexMatrix hermitize(const ComplexMatrix& a) { return 0.5 * (a + a.adjoint()); }

EigenPair herm_eig(const HermitianMatrix& a) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a.mat());
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("herm_eig: eigen decomposition failed to converge");
  }
  // Eigen returns ascending order; flip to descending.
  const Eigen::Index n = a.dim();
  EigenPair out;
  out.values = es.eigenvalues().reverse();
  out.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
  }
  return out;
}

EigenPair herm_eig(const ComplexMatrix& a) { return herm_eig(HermitianMatrix(a)); }

HermitianMatrix psd_project(const HermitianMatrix& a) {
  const EigenPair ep = herm_eig(a);
  const RealVector clamped = ep.values.cwiseMax(0.0);
  ComplexMatrix out = ep.vectors * clamped.asDiagonal() * ep.vectors.adjoint();
  return HermitianMatrix(out);
}

ComplexMatrix psd_project(const ComplexMatrix& a) { return psd_project(HermitianMatrix(a)).mat(); }

double logdet_psd(const ComplexMatrix& a) {
  Eigen::LLT<ComplexMatrix> llt(hermitize(a));
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("logdet_psd: matrix is not positive definite");
  }
  double acc = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    acc += std::log(l(i, i).real());
  }
  return 2.0 * acc;
}

double re_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a.cwiseProduct(b.conjugate()).sum().real();
}

std::vector<ComplexMatrix> hermitian_basis(Eigen::Index n) {
  const double isq2 = 1.0 / std::sqrt(2.0);
  std::vector<ComplexMatrix> basis;
  basis.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index d = 0; d < n; ++d) {
    ComplexMatrix e = ComplexMatrix::Zero(n, n);
    e(d, d) = 1.0;
    basis.push_back(std::move(e));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      ComplexMatrix s = ComplexMatrix::Zero(n, n);
      s(i, j) = isq2;
      s(j, i) = isq2;
      basis.push_back(std::move(s));
      ComplexMatrix t = ComplexMatrix::Zero(n, n);
      t(i, j) = std::complex<double>(0.0, isq2);
      t(j, i) = std::complex<double>(0.0, -isq2);
      basis.push_back(std::move(t));
    }
  }
  return basis;
}

RealVector hermitian_coords(const ComplexMatrix& a) {
  const Eigen::Index n = a.rows();
  const double sq2 = std::sqrt(2.0);
  RealVector c(n * n);
  Eigen::Index idx = 0;
  for (Eigen::Index d = 0; d < n; ++d) {
    c(idx++) = a(d, d).real();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      c(idx++) = sq2 * a(i, j).real();
      c(idx++) = sq2 * a(i, j).imag();
    }
  }
  return c;
}

ComplexMatrix hermitian_from_coords(const RealVector& c, Eigen::Index n) {
  const double isq2 = 1.0 / std::sqrt(2.0);
  ComplexMatrix a = ComplexMatrix::Zero(n, n);
  Eigen::Index idx = 0;
  for (Eigen::Index d = 0; d < n; ++d) {
    a(d, d) = c(idx++);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double re = c(idx++) * isq2;
      const double im = c(idx++) * isq2;
      a(i, j) = std::complex<double>(re, im);
      a(j, i) = std::complex<double>(re, -im);
    }
  }
  return a;
}

}  // namespace nova

#pragma once

// Reference implementations the tests compare the solver blocks against.
// Everything here favors the dumbest correct method: bisection instead of
// active-set scans, long projected-gradient loops instead of closed forms,
// central differences instead of analytic derivatives. Slow on purpose.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "nova/hermitian.hpp"
#include "nova/rng.hpp"

namespace oracle {

using nova::ComplexMatrix;
using nova::ComplexVector;
using nova::RealVector;

inline ComplexMatrix random_hermitian(nova::SplitRng& rng, int n, double scale = 1.0) {
  ComplexMatrix a(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) a(r, c) = {rng.gaussian(), rng.gaussian()};
  }
  return scale * 0.5 * (a + ComplexMatrix(a.adjoint()));
}

inline ComplexMatrix random_psd(nova::SplitRng& rng, int n, double scale = 1.0) {
  ComplexMatrix a(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) a(r, c) = {rng.gaussian(), rng.gaussian()};
  }
  return scale * (a * a.adjoint()) / static_cast<double>(n);
}

inline ComplexVector random_cvector(nova::SplitRng& rng, int n, double scale = 1.0) {
  ComplexVector v(n);
  for (int j = 0; j < n; ++j) v(j) = std::complex<double>(rng.gaussian(), rng.gaussian()) * scale;
  return v;
}

// Water level by plain bisection: smallest xi >= 0 with
// sum_j (d_j - xi)_+ / (2 tau) <= budget.
inline double waterlevel_bisect(const RealVector& d, double tau, double budget) {
  const auto alloc = [&](double xi) {
    double s = 0.0;
    for (int j = 0; j < d.size(); ++j) s += std::max(0.0, d(j) - xi);
    return s / (2.0 * tau);
  };
  if (alloc(0.0) <= budget) return 0.0;
  double lo = 0.0;
  double hi = d.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (alloc(mid) > budget ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Frobenius projection onto { each block PSD, sum of traces <= budget }.
// Eigenvalues of all blocks share one shift, found by bisection.
inline std::vector<ComplexMatrix> project_psd_budget(const std::vector<ComplexMatrix>& ms,
                                                     double budget) {
  std::vector<nova::EigenPair> eigs;
  eigs.reserve(ms.size());
  double top = 0.0;
  for (const ComplexMatrix& m : ms) {
    eigs.push_back(nova::herm_eig(nova::hermitize(m)));
    top = std::max(top, eigs.back().values.maxCoeff());
  }
  const auto trace_at = [&](double shift) {
    double s = 0.0;
    for (const nova::EigenPair& e : eigs) {
      for (int j = 0; j < e.values.size(); ++j) s += std::max(0.0, e.values(j) - shift);
    }
    return s;
  };
  double shift = 0.0;
  if (trace_at(0.0) > budget) {
    double lo = 0.0;
    double hi = top;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (trace_at(mid) > budget ? lo : hi) = mid;
    }
    shift = 0.5 * (lo + hi);
  }
  std::vector<ComplexMatrix> out;
  out.reserve(ms.size());
  for (const nova::EigenPair& e : eigs) {
    RealVector vals = (e.values.array() - shift).cwiseMax(0.0);
    out.push_back(nova::hermitize(e.vectors * vals.asDiagonal() * e.vectors.adjoint()));
  }
  return out;
}

// Projected gradient over a list of PSD blocks under a shared trace budget.
// grad(i, q) must return the gradient of the objective in block i at the
// current blocks q.
inline std::vector<ComplexMatrix> pg_psd_budget(
    std::vector<ComplexMatrix> q, double budget,
    const std::function<ComplexMatrix(int, const std::vector<ComplexMatrix>&)>& grad, double step,
    int iters) {
  for (int it = 0; it < iters; ++it) {
    std::vector<ComplexMatrix> moved;
    moved.reserve(q.size());
    for (int i = 0; i < static_cast<int>(q.size()); ++i) {
      moved.push_back(q[i] - step * grad(i, q));
    }
    q = project_psd_budget(moved, budget);
  }
  return q;
}

// Projected gradient on one PSD block.
inline ComplexMatrix pg_psd(ComplexMatrix y, const std::function<ComplexMatrix(const ComplexMatrix&)>& grad,
                            double step, int iters) {
  for (int it = 0; it < iters; ++it) {
    y = nova::psd_project(ComplexMatrix(y - step * grad(y)));
  }
  return y;
}

// Projected gradient on a scalar interval.
inline double pg_interval(double x, double lo, double hi,
                          const std::function<double(double)>& grad, double step, int iters) {
  for (int it = 0; it < iters; ++it) {
    x = std::clamp(x - step * grad(x), lo, hi);
  }
  return x;
}

// Projected gradient on the complex ball ||w||^2 <= budget.
inline ComplexVector pg_ball(ComplexVector w, double budget,
                             const std::function<ComplexVector(const ComplexVector&)>& grad,
                             double step, int iters) {
  for (int it = 0; it < iters; ++it) {
    w -= step * grad(w);
    const double p = w.squaredNorm();
    if (p > budget) w *= std::sqrt(budget / p);
  }
  return w;
}

// Central difference of a scalar function along one coordinate direction.
inline double central_diff(const std::function<double(double)>& f, double h) {
  return (f(h) - f(-h)) / (2.0 * h);
}

}  // namespace oracle

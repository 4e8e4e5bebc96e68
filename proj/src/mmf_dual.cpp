#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nova/mmf.hpp"

namespace nova {

MmfDualVars MmfDualVars::zeros(const MmfScenario& scn) {
  MmfDualVars d;
  d.lambda = RealVector::Zero(scn.num_users());
  d.eta = RealVector::Zero(scn.num_users());
  return d;
}

double g_ratio_quadratic(double t, double beta, double t0, double beta0) {
  return 0.5 * (beta0 / t0) * t * t + 0.5 * (t0 / beta0) * beta * beta;
}

double g_square_expansion(double t, double beta, double t0, double beta0) {
  const double s = t + beta;
  return 0.5 * s * s - t0 * (t - t0) - beta0 * (beta - beta0) - 0.5 * (t0 * t0 + beta0 * beta0);
}

double bilinear_surrogate(MmfSurrogate kind, double t, double beta, double t0, double beta0) {
  return kind == MmfSurrogate::kRatioQuadratic ? g_ratio_quadratic(t, beta, t0, beta0)
                                               : g_square_expansion(t, beta, t0, beta0);
}

double t_hat_ratio(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                   const RealVector& lambda) {
  double den = prox.tau_t;
  for (int i = 0; i < scn.num_users(); ++i) den += lambda(i) * base.beta(i) / base.t;
  return (1.0 + prox.tau_t * base.t) / den;
}

RealVector beta_hat_ratio(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                          const MmfDualVars& duals) {
  const int users = scn.num_users();
  RealVector out(users);
  for (int i = 0; i < users; ++i) {
    const double raw = (prox.tau_beta * base.beta(i) + duals.eta(i)) /
                       (prox.tau_beta + duals.lambda(i) * base.t / base.beta(i));
    out(i) = std::clamp(raw, 0.0, scn.beta_max(i));
  }
  return out;
}

namespace {

double beta_of_t_square(const MmfIterate& base, const MmfProx& prox, const MmfDualVars& duals,
                        int i, double t, double cap) {
  const double raw =
      (prox.tau_beta * base.beta(i) + duals.eta(i) + duals.lambda(i) * (base.beta(i) - t)) /
      (prox.tau_beta + duals.lambda(i));
  return std::clamp(raw, 0.0, cap);
}

}  // namespace

void t_beta_hat_square(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                       const MmfDualVars& duals, double* t_out, RealVector* beta_out) {
  const int users = scn.num_users();
  const double lambda_sum = duals.lambda.sum();
  RealVector cap(users);
  for (int i = 0; i < users; ++i) cap(i) = scn.beta_max(i);

  // Reduced derivative in t after minimizing each level; piecewise linear and
  // strictly increasing, so one bracketed bisection pins the block optimum.
  const auto slope = [&](double t) {
    double s = -1.0 + prox.tau_t * (t - base.t);
    for (int i = 0; i < users; ++i) {
      s += duals.lambda(i) * (t + beta_of_t_square(base, prox, duals, i, t, cap(i)) - base.t);
    }
    return s;
  };

  double lo = 0.0;
  double hi = base.t + 1.0 / (prox.tau_t + lambda_sum);
  double t;
  if (slope(lo) >= 0.0) {
    t = 0.0;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) < 0.0 ? lo : hi) = mid;
    }
    t = 0.5 * (lo + hi);
  }
  *t_out = t;
  beta_out->resize(users);
  for (int i = 0; i < users; ++i) {
    (*beta_out)(i) = beta_of_t_square(base, prox, duals, i, t, cap(i));
  }
}

WSolution w_hat(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                const MmfDualVars& duals, int group) {
  const int n = scn.tx_antennas[group];
  ComplexMatrix a = prox.tau_w * ComplexMatrix::Identity(n, n);
  ComplexVector b = prox.tau_w * base.w[group];
  for (int i = 0; i < scn.num_users(); ++i) {
    if (scn.group_of(i) == group) {
      b += duals.lambda(i) * (scn.gram[i][group] * base.w[group]);
    } else {
      a += duals.eta(i) * scn.gram[i][group];
    }
  }

  const EigenPair eig = herm_eig(hermitize(a));
  const ComplexVector bt = eig.vectors.adjoint() * b;
  const auto power_at = [&](double xi) {
    double p = 0.0;
    for (int j = 0; j < n; ++j) p += std::norm(bt(j)) / ((xi + eig.values(j)) * (xi + eig.values(j)));
    return p;
  };

  WSolution sol;
  const double budget = scn.power[group];
  if (power_at(0.0) <= budget) {
    sol.xi = 0.0;
  } else {
    double lo = 0.0;
    double hi = std::max(0.0, b.norm() / std::sqrt(budget) - eig.values(n - 1));
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (power_at(mid) > budget ? lo : hi) = mid;
    }
    sol.xi = 0.5 * (lo + hi);
  }
  ComplexVector scaled(n);
  for (int j = 0; j < n; ++j) scaled(j) = bt(j) / (sol.xi + eig.values(j));
  sol.w = eig.vectors * scaled;
  return sol;
}

MmfCellPrimal mmf_cell_primal(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                              const MmfDualVars& duals, int group) {
  MmfCellPrimal cp;
  cp.w = w_hat(scn, base, prox, duals, group).w;
  cp.prox_cost = prox.tau_w * (cp.w - base.w[group]).squaredNorm();
  for (int i = 0; i < scn.num_users(); ++i) {
    if (scn.group_of(i) != group) continue;
    const std::complex<double> cross = base.w[group].dot(scn.gram[i][group] * cp.w);
    const double anchor = base.w[group].dot(scn.gram[i][group] * base.w[group]).real();
    cp.signal_lin.push_back(2.0 * cross.real() - anchor);
  }
  return cp;
}

MmfCellContribution mmf_cell_contribution(const MmfScenario& scn, const MmfCellPrimal& cp,
                                          int group) {
  MmfCellContribution out;
  out.interference.assign(scn.num_users(), 0.0);
  for (int i = 0; i < scn.num_users(); ++i) {
    if (scn.group_of(i) == group) continue;
    out.interference[i] = (cp.w.adjoint() * scn.gram[i][group] * cp.w).value().real();
  }
  return out;
}

MmfDualEval mmf_assemble_eval(const MmfScenario& scn, MmfSurrogate kind, const MmfIterate& base,
                              const MmfProx& prox, const MmfDualVars& duals,
                              const std::vector<MmfCellPrimal>& cells,
                              const std::vector<MmfCellContribution>& contribs) {
  const int users = scn.num_users();
  const int groups = scn.num_groups();

  MmfDualEval eval;
  if (kind == MmfSurrogate::kRatioQuadratic) {
    eval.primal.t = t_hat_ratio(scn, base, prox, duals.lambda);
    eval.primal.beta = beta_hat_ratio(scn, base, prox, duals);
  } else {
    t_beta_hat_square(scn, base, prox, duals, &eval.primal.t, &eval.primal.beta);
  }
  eval.primal.w.resize(groups);
  for (int k = 0; k < groups; ++k) eval.primal.w[k] = cells[k].w;

  double value = -eval.primal.t +
                 0.5 * prox.tau_t * (eval.primal.t - base.t) * (eval.primal.t - base.t);
  for (int i = 0; i < users; ++i) {
    const double db = eval.primal.beta(i) - base.beta(i);
    value += 0.5 * prox.tau_beta * db * db;
  }
  for (int k = 0; k < groups; ++k) value += cells[k].prox_cost;

  eval.grad_lambda.resize(users);
  eval.grad_eta.resize(users);
  double residual = 0.0;
  std::vector<int> next_local(groups, 0);
  for (int i = 0; i < users; ++i) {
    const int k = scn.group_of(i);
    eval.grad_lambda(i) =
        bilinear_surrogate(kind, eval.primal.t, eval.primal.beta(i), base.t, base.beta(i)) -
        cells[k].signal_lin[next_local[k]++];
    double interf = scn.noise[i];
    for (int l = 0; l < groups; ++l) {
      if (l == k) continue;
      interf += contribs[l].interference[i];
    }
    eval.grad_eta(i) = interf - eval.primal.beta(i);

    value += duals.lambda(i) * eval.grad_lambda(i) + duals.eta(i) * eval.grad_eta(i);

    const double lam_step = std::max(0.0, duals.lambda(i) + eval.grad_lambda(i));
    const double eta_step = std::max(0.0, duals.eta(i) + eval.grad_eta(i));
    const double lam_diff = lam_step - duals.lambda(i);
    const double eta_diff = eta_step - duals.eta(i);
    residual += lam_diff * lam_diff + eta_diff * eta_diff;
  }
  eval.value = value;
  eval.residual = std::sqrt(residual);
  return eval;
}

MmfDualEval mmf_dual_eval(const MmfScenario& scn, MmfSurrogate kind, const MmfIterate& base,
                          const MmfProx& prox, const MmfDualVars& duals) {
  const int groups = scn.num_groups();
  std::vector<MmfCellPrimal> cells(groups);
  std::vector<MmfCellContribution> contribs(groups);
  for (int k = 0; k < groups; ++k) {
    cells[k] = mmf_cell_primal(scn, base, prox, duals, k);
    contribs[k] = mmf_cell_contribution(scn, cells[k], k);
  }
  return mmf_assemble_eval(scn, kind, base, prox, duals, cells, contribs);
}

namespace {

RealVector embed(const ComplexVector& v) {
  const int n = static_cast<int>(v.size());
  RealVector x(2 * n);
  x.head(n) = v.real();
  x.tail(n) = v.imag();
  return x;
}

RealMatrix real_embedding(const ComplexMatrix& h) {
  const int n = static_cast<int>(h.rows());
  RealMatrix m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = h.real();
  m.topRightCorner(n, n) = -h.imag();
  m.bottomLeftCorner(n, n) = h.imag();
  m.bottomRightCorner(n, n) = h.real();
  return m;
}

MmfDualVars project_mmf_duals(const MmfDualVars& d) {
  MmfDualVars out;
  out.lambda = d.lambda.cwiseMax(0.0);
  out.eta = d.eta.cwiseMax(0.0);
  return out;
}

}  // namespace

RealMatrix mmf_dual_hessian(const MmfScenario& scn, MmfSurrogate kind, const MmfIterate& base,
                            const MmfProx& prox, const MmfDualVars& duals,
                            const MmfDualEval& eval) {
  const int users = scn.num_users();
  const int groups = scn.num_groups();
  const bool ratio = kind == MmfSurrogate::kRatioQuadratic;

  // Primal columns: t, then the levels, then each group's real-embedded
  // beamformer.
  std::vector<int> w_off(groups);
  int cols = 1 + users;
  for (int k = 0; k < groups; ++k) {
    w_off[k] = cols;
    cols += 2 * scn.tx_antennas[k];
  }
  const int rows = 2 * users;

  RealMatrix jac = RealMatrix::Zero(rows, cols);
  for (int i = 0; i < users; ++i) {
    const int k = scn.group_of(i);
    const double th = eval.primal.t;
    const double bh = eval.primal.beta(i);
    jac(i, 0) = ratio ? (base.beta(i) / base.t) * th : (th + bh) - base.t;
    jac(i, 1 + i) = ratio ? (base.t / base.beta(i)) * bh : (th + bh) - base.beta(i);
    jac.block(i, w_off[k], 1, 2 * scn.tx_antennas[k]) =
        -2.0 * embed(scn.gram[i][k] * base.w[k]).transpose();

    const int row = users + i;
    jac(row, 1 + i) = -1.0;
    for (int l = 0; l < groups; ++l) {
      if (l == k) continue;
      jac.block(row, w_off[l], 1, 2 * scn.tx_antennas[l]) =
          2.0 * embed(scn.gram[i][l] * eval.primal.w[l]).transpose();
    }
  }

  // Primal curvature of the scalar blocks: the square expansion couples the
  // target with every level, the ratio bound keeps them separable. Levels
  // sitting on a bound and a target clipped at zero do not respond at all, so
  // their coordinates are frozen out of the solve.
  RealMatrix tb = RealMatrix::Zero(1 + users, 1 + users);
  tb(0, 0) = prox.tau_t;
  for (int i = 0; i < users; ++i) {
    tb(0, 0) += duals.lambda(i) * (ratio ? base.beta(i) / base.t : 1.0);
    tb(1 + i, 1 + i) = prox.tau_beta + duals.lambda(i) * (ratio ? base.t / base.beta(i) : 1.0);
    if (!ratio) {
      tb(0, 1 + i) = duals.lambda(i);
      tb(1 + i, 0) = duals.lambda(i);
    }
  }
  std::vector<bool> frozen(1 + users, false);
  frozen[0] = eval.primal.t <= 0.0;
  for (int i = 0; i < users; ++i) {
    frozen[1 + i] = eval.primal.beta(i) <= 0.0 || eval.primal.beta(i) >= scn.beta_max(i);
  }
  RealMatrix tb_rhs = jac.leftCols(1 + users).transpose();
  for (int c = 0; c < 1 + users; ++c) {
    if (!frozen[c]) continue;
    tb.row(c).setZero();
    tb.col(c).setZero();
    tb(c, c) = 1.0;
    tb_rhs.row(c).setZero();
  }

  RealMatrix jh = jac;
  jh.leftCols(1 + users) = tb.ldlt().solve(tb_rhs).transpose();

  // Each beamformer solves a ridge system shifted by its power multiplier;
  // when the budget binds, the response is additionally confined to the
  // tangent plane of the power sphere.
  for (int k = 0; k < groups; ++k) {
    const int n2 = 2 * scn.tx_antennas[k];
    const WSolution ws = w_hat(scn, base, prox, duals, k);
    RealMatrix wk = 2.0 * (prox.tau_w + ws.xi) * RealMatrix::Identity(n2, n2);
    for (int i = 0; i < users; ++i) {
      if (scn.group_of(i) == k) continue;
      wk += 2.0 * duals.eta(i) * real_embedding(scn.gram[i][k]);
    }
    const Eigen::LDLT<RealMatrix> fact(wk);
    RealMatrix sol = fact.solve(jac.middleCols(w_off[k], n2).transpose());
    if (ws.xi > 0.0) {
      const RealVector x = embed(ws.w);
      const RealVector px = fact.solve(x);
      sol -= px * ((x.transpose() * sol) / x.dot(px));
    }
    jh.middleCols(w_off[k], n2) = sol.transpose();
  }

  RealMatrix hess = -(jh * jac.transpose());
  return 0.5 * (hess + hess.transpose());
}

MmfDualResult solve_mmf_subproblem_via(const MmfScenario& scn, MmfSurrogate kind,
                                       const MmfIterate& base, const MmfProx& prox,
                                       const MmfDualEvaluator& evaluate, const MmfDualVars& warm,
                                       MmfDualMethod method, const MmfDualOptions& opts) {
  if (opts.beta0 <= 0.0) throw std::invalid_argument("solve_mmf_subproblem: beta0 must be positive");
  if (!opts.harmonic && opts.beta0 >= 1.25) {
    throw std::invalid_argument("solve_mmf_subproblem: damped rule needs beta0 < 1.25");
  }
  const int users = scn.num_users();

  MmfDualResult res;
  res.duals = project_mmf_duals(warm);
  res.eval = evaluate(res.duals);

  if (method == MmfDualMethod::kFirstOrder) {
    double beta = opts.beta0;
    RealVector vel_lambda = RealVector::Zero(users);
    RealVector vel_eta = RealVector::Zero(users);
    for (int n = 0; n < opts.max_iters; ++n) {
      if (res.eval.residual <= opts.tol) {
        res.iters = n;
        res.converged = true;
        return res;
      }
      vel_lambda = opts.momentum * vel_lambda + beta * res.eval.grad_lambda;
      vel_eta = opts.momentum * vel_eta + beta * res.eval.grad_eta;
      res.duals.lambda = (res.duals.lambda + vel_lambda).cwiseMax(0.0);
      res.duals.eta = (res.duals.eta + vel_eta).cwiseMax(0.0);
      res.eval = evaluate(res.duals);
      if (opts.record_trace) {
        res.trace.push_back({res.eval.value, res.eval.residual, beta, 0.0, false});
      }
      beta = opts.harmonic ? opts.beta0 / static_cast<double>(n + 2)
                           : beta * (1.0 - 0.8 * beta);
    }
    res.iters = opts.max_iters;
    res.converged = res.eval.residual <= opts.tol;
    return res;
  }

  // Levenberg-style damping floored at the configured ridge: the dual is
  // piecewise quadratic and can be exactly singular along directions whose
  // primal blocks are pinned by clips or budgets, so the damping bounds the
  // Newton target there, escalating on failed steps and relaxing after clean
  // unit steps.
  double damping = opts.newton_ridge;

  for (int n = 0; n < opts.max_iters; ++n) {
    if (res.eval.residual <= opts.tol) {
      res.iters = n;
      res.converged = true;
      return res;
    }
    const RealMatrix hess = mmf_dual_hessian(scn, kind, base, prox, res.duals, res.eval);
    RealVector g(2 * users);
    g.head(users) = res.eval.grad_lambda;
    g.tail(users) = res.eval.grad_eta;
    // Multipliers pinned at zero with outward-pointing gradients stay put;
    // solving for them would drag the free block off its own Newton step.
    std::vector<int> pinned;
    for (int i = 0; i < users; ++i) {
      if (res.duals.lambda(i) <= 1e-12 && res.eval.grad_lambda(i) <= 0.0) {
        pinned.push_back(i);
        g(i) = 0.0;
      }
      if (res.duals.eta(i) <= 1e-12 && res.eval.grad_eta(i) <= 0.0) {
        pinned.push_back(users + i);
        g(users + i) = 0.0;
      }
    }

    bool accepted = false;
    double s_accepted = 0.0;
    bool used_fallback = false;
    // Near a solution the value gains of a correct step sink below double
    // resolution while the residual still has headroom, so a step that holds
    // the value to machine accuracy and clearly shrinks the residual also
    // counts as progress.
    const double tol_eq = 4.0 * std::numeric_limits<double>::epsilon() *
                          (1.0 + std::abs(res.eval.value));
    const auto improves = [&res, tol_eq](const MmfDualEval& t) {
      if (t.value > res.eval.value + tol_eq) return true;
      return t.value >= res.eval.value - tol_eq && t.residual <= 0.9 * res.eval.residual;
    };
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      RealMatrix curv = -hess;
      curv += damping * RealMatrix::Identity(2 * users, 2 * users);
      for (int i : pinned) {
        curv.row(i).setZero();
        curv.col(i).setZero();
        curv(i, i) = 1.0;
      }
      const RealVector delta = curv.ldlt().solve(g);
      if (!delta.allFinite()) {
        damping = std::min(1e12, std::max(10.0 * damping, 1e-8));
        continue;
      }
      const RealVector lam_t = (res.duals.lambda + delta.head(users)).cwiseMax(0.0);
      const RealVector eta_t = (res.duals.eta + delta.tail(users)).cwiseMax(0.0);
      double s_used = 0.0;
      for (double s = 1.0; s >= 1e-4; s *= 0.5) {
        MmfDualVars trial;
        trial.lambda = res.duals.lambda + s * (lam_t - res.duals.lambda);
        trial.eta = res.duals.eta + s * (eta_t - res.duals.eta);
        MmfDualEval teval = evaluate(trial);
        if (improves(teval)) {
          res.duals = std::move(trial);
          res.eval = std::move(teval);
          accepted = true;
          s_used = s;
          s_accepted = s;
          break;
        }
      }
      if (!accepted) {
        if (damping >= 1e12) break;
        damping = std::min(1e12, std::max(100.0 * damping, 1e-6));
      } else if (s_used == 1.0) {
        damping = std::max(opts.newton_ridge, 0.03 * damping);
      } else if (s_used < 1e-2) {
        damping = std::min(1e12, 30.0 * damping);
      }
    }
    if (!accepted) {
      // Curvature model exhausted; fall back to a backtracked gradient step so
      // progress never depends on the Newton system.
      for (double s = 1.0; s >= 1e-12; s *= 0.5) {
        MmfDualVars trial;
        trial.lambda = (res.duals.lambda + s * res.eval.grad_lambda).cwiseMax(0.0);
        trial.eta = (res.duals.eta + s * res.eval.grad_eta).cwiseMax(0.0);
        MmfDualEval teval = evaluate(trial);
        if (improves(teval)) {
          res.duals = std::move(trial);
          res.eval = std::move(teval);
          accepted = true;
          s_accepted = s;
          used_fallback = true;
          break;
        }
      }
    }
    if (opts.record_trace) {
      res.trace.push_back(
          {res.eval.value, res.eval.residual, s_accepted, damping, used_fallback});
    }
    if (!accepted) {
      res.iters = n;
      res.converged = res.eval.residual <= opts.tol;
      return res;
    }
  }
  res.iters = opts.max_iters;
  res.converged = res.eval.residual <= opts.tol;
  return res;
}

MmfDualResult solve_mmf_subproblem(const MmfScenario& scn, MmfSurrogate kind,
                                   const MmfIterate& base, const MmfProx& prox,
                                   const MmfDualVars& warm, MmfDualMethod method,
                                   const MmfDualOptions& opts) {
  return solve_mmf_subproblem_via(
      scn, kind, base, prox,
      [&](const MmfDualVars& d) { return mmf_dual_eval(scn, kind, base, prox, d); }, warm, method,
      opts);
}

}  // namespace nova

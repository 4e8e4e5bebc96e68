#include "nova/ibc_dual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace nova {

IbcDualVars IbcDualVars::zeros(const IbcScenario& scn) {
  IbcDualVars d;
  const int users = scn.num_users();
  d.lambda = RealVector::Zero(users);
  d.omega.reserve(users);
  for (int u = 0; u < users; ++u) {
    d.omega.push_back(ComplexMatrix::Zero(scn.rx_antennas(u), scn.rx_antennas(u)));
  }
  return d;
}

double r_star(double lambda_dot_alpha, double r_base, double tau_r) {
  return std::max(0.0, r_base - (lambda_dot_alpha - 1.0) / tau_r);
}

double waterlevel_hypothesis(const RealVector& d_desc, double tau_q, double budget) {
  if (tau_q <= 0.0) throw std::invalid_argument("waterlevel_hypothesis: tau_q must be positive");
  if (budget < 0.0) throw std::invalid_argument("waterlevel_hypothesis: negative budget");
  const int n = static_cast<int>(d_desc.size());
  for (int j = 1; j < n; ++j) {
    if (d_desc(j) > d_desc(j - 1)) {
      throw std::invalid_argument("waterlevel_hypothesis: values not sorted descending");
    }
  }

  int positives = 0;
  double prefix = 0.0;
  while (positives < n && d_desc(positives) > 0.0) {
    prefix += d_desc(positives);
    ++positives;
  }
  if (prefix / (2.0 * tau_q) <= budget) return 0.0;

  // The unconstrained allocation overshoots, so the level is positive and the
  // active set is a prefix of the sorted values. Try the largest candidate
  // set first and shrink until every active direction clears the level.
  for (int m = positives; m >= 1; --m) {
    const double xi = std::max(0.0, (prefix - 2.0 * tau_q * budget) / static_cast<double>(m));
    if (m == 1 || d_desc(m - 1) - xi > 0.0) return xi;
    prefix -= d_desc(m - 1);
  }
  throw std::logic_error("waterlevel_hypothesis: scan exhausted");
}

CellQSolution q_star(const IbcScenario& scn, const RateLinearization& lin,
                     const LiftedIterate& base, const ProxParams& prox, const IbcDualVars& duals,
                     int cell) {
  const int users = scn.num_users();
  const int tx = scn.tx_antennas[cell];
  const int own = scn.users_per_cell[cell];

  // Terms shared by every user served from this cell.
  ComplexMatrix pi_sum = ComplexMatrix::Zero(tx, tx);
  ComplexMatrix rx_dual_sum = ComplexMatrix::Zero(tx, tx);
  for (int v = 0; v < users; ++v) {
    pi_sum += duals.lambda(v) * lin.pi[v][cell];
    const ComplexMatrix& h = scn.channel[v][cell];
    rx_dual_sum += h.adjoint() * duals.omega[v] * h;
  }
  rx_dual_sum = hermitize(rx_dual_sum);

  std::vector<EigenPair> eig(own);
  std::vector<double> levels;
  levels.reserve(static_cast<size_t>(own) * tx);
  for (int i = 0; i < own; ++i) {
    const int v = scn.user_index(cell, i);
    const ComplexMatrix a = 2.0 * prox.tau_q * base.q[v] -
                            (pi_sum - duals.lambda(v) * lin.pi[v][cell]) + rx_dual_sum;
    eig[i] = herm_eig(hermitize(a));
    for (int j = 0; j < tx; ++j) levels.push_back(eig[i].values(j));
  }
  std::sort(levels.begin(), levels.end(), std::greater<double>());
  RealVector d_desc = Eigen::Map<const RealVector>(levels.data(), static_cast<long>(levels.size()));

  CellQSolution sol;
  sol.xi = waterlevel_hypothesis(d_desc, prox.tau_q, scn.power[cell]);
  sol.q.reserve(own);
  for (int i = 0; i < own; ++i) {
    RealVector alloc(tx);
    for (int j = 0; j < tx; ++j) {
      alloc(j) = std::max(0.0, (eig[i].values(j) - sol.xi) / (2.0 * prox.tau_q));
    }
    sol.q.push_back(hermitize(eig[i].vectors * alloc.asDiagonal() * eig[i].vectors.adjoint()));
  }
  sol.eig = std::move(eig);
  return sol;
}

RealVector y_levels(const RealVector& d_desc, double lambda, double noise, double tau_y) {
  const int m = static_cast<int>(d_desc.size());
  RealVector y(m);
  for (int j = 0; j < m; ++j) {
    const double a = d_desc(j) / (2.0 * tau_y);
    const double root = std::sqrt((noise + a) * (noise + a) + 2.0 * lambda / tau_y);
    y(j) = std::max(0.0, 0.5 * (-(noise - a) + root));
  }
  return y;
}

ComplexMatrix y_star(const ComplexMatrix& y_base, const ComplexMatrix& omega, double lambda,
                     double noise, double tau_y) {
  const EigenPair eig = herm_eig(hermitize(2.0 * tau_y * y_base - omega));
  const RealVector y = y_levels(eig.values, lambda, noise, tau_y);
  return hermitize(eig.vectors * y.asDiagonal() * eig.vectors.adjoint());
}

CellPrimal cell_primal(const IbcScenario& scn, const RateLinearization& lin,
                       const LiftedIterate& base, const ProxParams& prox, const IbcDualVars& duals,
                       int cell) {
  CellPrimal cp;
  CellQSolution qs = q_star(scn, lin, base, prox, duals, cell);
  cp.q = std::move(qs.q);
  cp.xi = qs.xi;

  const int own = scn.users_per_cell[cell];
  cp.y.reserve(own);
  cp.own_rate_part.resize(own);
  cp.prox_cost = 0.0;
  for (int i = 0; i < own; ++i) {
    const int v = scn.user_index(cell, i);
    cp.y.push_back(y_star(base.y[v], duals.omega[v], duals.lambda(v), scn.noise[v], prox.tau_y));
    cp.own_rate_part[i] = f_bar_plus(scn.noise[v], cp.y[i]) - lin.f_minus_base[v];
    cp.prox_cost += prox.tau_q * (cp.q[i] - base.q[v]).squaredNorm() +
                    prox.tau_y * (cp.y[i] - base.y[v]).squaredNorm();
  }
  return cp;
}

CellContribution cell_contribution(const IbcScenario& scn, const RateLinearization& lin,
                                   const LiftedIterate& base, const CellPrimal& cp, int cell) {
  const int users = scn.num_users();
  const int tx = scn.tx_antennas[cell];
  const int own = scn.users_per_cell[cell];

  ComplexMatrix q_sum = ComplexMatrix::Zero(tx, tx);
  ComplexMatrix diff_sum = ComplexMatrix::Zero(tx, tx);
  for (int i = 0; i < own; ++i) {
    const int v = scn.user_index(cell, i);
    q_sum += cp.q[i];
    diff_sum += cp.q[i] - base.q[v];
  }

  CellContribution out;
  out.lin_term.resize(users);
  out.rx_cov.reserve(users);
  for (int u = 0; u < users; ++u) {
    const ComplexMatrix& h = scn.channel[u][cell];
    out.rx_cov.push_back(hermitize(h * q_sum * h.adjoint()));
    ComplexMatrix others = diff_sum;
    if (scn.cell_of(u) == cell) {
      const int i = u - scn.user_index(cell, 0);
      others -= cp.q[i] - base.q[u];
    }
    out.lin_term[u] = re_inner(lin.pi[u][cell], others);
  }
  return out;
}

DualEval assemble_dual_eval(const IbcScenario& scn, const LiftedIterate& base,
                            const ProxParams& prox, const IbcDualVars& duals,
                            const std::vector<CellPrimal>& cells,
                            const std::vector<CellContribution>& contribs) {
  const int users = scn.num_users();
  const int num_cells = scn.num_cells();

  DualEval eval;
  eval.primal.q.resize(users);
  eval.primal.y.resize(users);
  eval.grad_lambda = RealVector::Zero(users);
  eval.grad_omega.resize(users);

  RealVector rate_hat(users);
  for (int u = 0; u < users; ++u) {
    const int k = scn.cell_of(u);
    const int i = u - scn.user_index(k, 0);
    eval.primal.q[u] = cells[k].q[i];
    eval.primal.y[u] = cells[k].y[i];
    rate_hat(u) = cells[k].own_rate_part[i];
    eval.grad_omega[u] = cells[k].y[i];
    for (int l = 0; l < num_cells; ++l) {
      rate_hat(u) -= contribs[l].lin_term[u];
      eval.grad_omega[u] -= contribs[l].rx_cov[u];
    }
  }

  double lambda_dot_alpha = 0.0;
  for (int u = 0; u < users; ++u) lambda_dot_alpha += duals.lambda(u) * scn.alpha[u];
  eval.primal.r = r_star(lambda_dot_alpha, base.r, prox.tau_r);

  double value = -eval.primal.r +
                 0.5 * prox.tau_r * (eval.primal.r - base.r) * (eval.primal.r - base.r);
  for (int k = 0; k < num_cells; ++k) value += cells[k].prox_cost;

  double lam_sq = 0.0;
  double om_sq = 0.0;
  for (int u = 0; u < users; ++u) {
    eval.grad_lambda(u) = scn.alpha[u] * eval.primal.r - rate_hat(u);
    value += duals.lambda(u) * eval.grad_lambda(u);
    value += re_inner(duals.omega[u], eval.grad_omega[u]);

    const double lam_step = std::max(0.0, duals.lambda(u) + eval.grad_lambda(u));
    const double lam_diff = lam_step - duals.lambda(u);
    lam_sq += lam_diff * lam_diff;
    const ComplexMatrix om_step = psd_project(duals.omega[u] + eval.grad_omega[u]);
    om_sq += (om_step - duals.omega[u]).squaredNorm();
  }
  eval.value = value;
  eval.residual = std::sqrt(lam_sq) + std::sqrt(om_sq);
  return eval;
}

DualEval dual_value_and_grad(const IbcScenario& scn, const RateLinearization& lin,
                             const LiftedIterate& base, const ProxParams& prox,
                             const IbcDualVars& duals) {
  const int num_cells = scn.num_cells();
  std::vector<CellPrimal> cells;
  cells.reserve(num_cells);
  for (int k = 0; k < num_cells; ++k) {
    cells.push_back(cell_primal(scn, lin, base, prox, duals, k));
  }
  std::vector<CellContribution> contribs;
  contribs.reserve(num_cells);
  for (int k = 0; k < num_cells; ++k) {
    contribs.push_back(cell_contribution(scn, lin, base, cells[k], k));
  }
  return assemble_dual_eval(scn, base, prox, duals, cells, contribs);
}

IbcDualVars dual_ascent_step(const IbcDualVars& duals, const DualEval& eval, double beta) {
  IbcDualVars next;
  next.lambda = (duals.lambda + beta * eval.grad_lambda).cwiseMax(0.0);
  next.omega.reserve(duals.omega.size());
  for (size_t u = 0; u < duals.omega.size(); ++u) {
    next.omega.push_back(psd_project(duals.omega[u] + beta * eval.grad_omega[u]));
  }
  return next;
}

double next_beta(double beta, int completed_iter, const DualOptions& opts) {
  if (opts.step_rule == DualStepRule::kHarmonic) {
    return opts.beta0 / static_cast<double>(completed_iter + 2);
  }
  return beta * (1.0 - 0.8 * beta);
}

namespace {

IbcDualVars project_duals(const IbcDualVars& duals) {
  IbcDualVars out;
  out.lambda = duals.lambda.cwiseMax(0.0);
  out.omega.reserve(duals.omega.size());
  for (const ComplexMatrix& om : duals.omega) out.omega.push_back(psd_project(om));
  return out;
}

}  // namespace

DualSolveResult solve_dual_first_order_via(const DualEvaluator& evaluate, const IbcDualVars& warm,
                                           const DualOptions& opts) {
  if (opts.beta0 <= 0.0) throw std::invalid_argument("solve_dual_first_order: beta0 must be positive");
  if (opts.step_rule == DualStepRule::kGeometricDamped && opts.beta0 >= 1.25) {
    throw std::invalid_argument("solve_dual_first_order: damped rule needs beta0 < 1.25");
  }

  DualSolveResult res;
  res.duals = project_duals(warm);
  res.eval = evaluate(res.duals);
  double beta = opts.beta0;
  for (int n = 0; n < opts.max_iters; ++n) {
    if (res.eval.residual <= opts.tol) {
      res.iters = n;
      res.converged = true;
      return res;
    }
    res.duals = dual_ascent_step(res.duals, res.eval, beta);
    res.eval = evaluate(res.duals);
    if (opts.record_trace) {
      res.trace.push_back({res.eval.value, res.eval.residual, beta, 0.0, false});
    }
    beta = next_beta(beta, n, opts);
  }
  res.iters = opts.max_iters;
  res.converged = res.eval.residual <= opts.tol;
  return res;
}

DualSolveResult solve_dual_first_order(const IbcScenario& scn, const RateLinearization& lin,
                                       const LiftedIterate& base, const ProxParams& prox,
                                       const IbcDualVars& warm, const DualOptions& opts) {
  return solve_dual_first_order_via(
      [&](const IbcDualVars& d) { return dual_value_and_grad(scn, lin, base, prox, d); }, warm,
      opts);
}

}  // namespace nova

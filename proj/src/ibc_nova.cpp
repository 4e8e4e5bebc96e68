#include "nova/ibc_nova.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nova {

OuterOptions OuterOptions::defaults(DualMethod m) {
  OuterOptions o;
  o.method = m;
  if (m == DualMethod::kNewton) {
    o.prox = ProxParams{1e-7, 1e-4, 1e-4};
    o.inner.tol = 1e-8;
    o.inner.max_iters = 100;
  } else {
    // First-order ascent needs the dual curvature bounded, so the proximal
    // weights are kept at a common moderate value.
    o.prox = ProxParams{0.25, 0.25, 0.25};
    o.inner.tol = 1e-6;
    o.inner.max_iters = 20000;
  }
  return o;
}

double step_size(double gamma_prev, double c) { return gamma_prev * (1.0 - c * gamma_prev); }

namespace {

InnerResult centralized_inner(DualMethod method, const IbcScenario& scn,
                              const RateLinearization& lin, const LiftedIterate& base,
                              const ProxParams& prox, const IbcDualVars& warm,
                              const DualOptions& opts) {
  InnerResult res;
  res.dual = method == DualMethod::kNewton ? solve_dual_newton(scn, lin, base, prox, warm, opts)
                                           : solve_dual_first_order(scn, lin, base, prox, warm, opts);
  res.messages = 0;
  return res;
}

// Gradient of (rate of user u) / alpha_u with respect to every covariance:
// signal term through the full received covariance, interference term through
// the same matrices the linearization uses.
std::vector<std::vector<ComplexMatrix>> weighted_rate_gradients(const IbcScenario& scn,
                                                                const IbcCovariances& q) {
  const int users = scn.num_users();
  const RateLinearization lin = linearize_rates(scn, q);
  std::vector<std::vector<ComplexMatrix>> signal(users);
  for (int u = 0; u < users; ++u) {
    const int m = scn.rx_antennas(u);
    const ComplexMatrix phi =
        scn.noise[u] * ComplexMatrix::Identity(m, m) + total_rx_cov(scn, q, u);
    const Eigen::LLT<ComplexMatrix> llt(phi);
    signal[u].resize(scn.num_cells());
    for (int l = 0; l < scn.num_cells(); ++l) {
      const ComplexMatrix& h = scn.channel[u][l];
      signal[u][l] = hermitize(h.adjoint() * llt.solve(h));
    }
  }
  std::vector<std::vector<ComplexMatrix>> out(users);
  for (int u = 0; u < users; ++u) {
    out[u].resize(users);
    for (int v = 0; v < users; ++v) {
      const int l = scn.cell_of(v);
      ComplexMatrix g = signal[u][l];
      if (v != u) g -= lin.pi[u][l];
      out[u][v] = g / scn.alpha[u];
    }
  }
  return out;
}

// Projection of per-user matrices onto one cell's feasible covariance set.
std::vector<ComplexMatrix> project_cell_covariances(const std::vector<ComplexMatrix>& m,
                                                    double budget) {
  std::vector<EigenPair> eig(m.size());
  std::vector<double> levels;
  for (size_t i = 0; i < m.size(); ++i) {
    eig[i] = herm_eig(hermitize(m[i]));
    for (int j = 0; j < eig[i].values.size(); ++j) levels.push_back(eig[i].values(j));
  }
  std::sort(levels.begin(), levels.end(), std::greater<double>());
  const RealVector d_desc =
      Eigen::Map<const RealVector>(levels.data(), static_cast<long>(levels.size()));
  const double xi = waterlevel_hypothesis(d_desc, 0.5, budget);
  std::vector<ComplexMatrix> out(m.size());
  for (size_t i = 0; i < m.size(); ++i) {
    RealVector alloc = (eig[i].values.array() - xi).cwiseMax(0.0);
    out[i] = hermitize(eig[i].vectors * alloc.asDiagonal() * eig[i].vectors.adjoint());
  }
  return out;
}

}  // namespace

IbcSolveResult solve_ibc(const IbcScenario& scn, const OuterOptions& opts,
                         const InnerSolverFn& inner) {
  scn.validate();
  const InnerSolverFn solve_inner =
      inner ? inner
            : [&opts](const IbcScenario& s, const RateLinearization& lin,
                      const LiftedIterate& base, const ProxParams& prox, const IbcDualVars& warm,
                      const DualOptions& dopts) {
                return centralized_inner(opts.method, s, lin, base, prox, warm, dopts);
              };

  IbcSolveResult res;
  res.iterate = init_feasible(scn);
  res.duals = IbcDualVars::zeros(scn);
  res.objective = min_weighted_rate(scn, covariances(res.iterate));

  const bool kkt_stop = opts.tol_kkt > 0.0;
  const bool fill_kkt = opts.track_kkt || kkt_stop;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  TraceRow first;
  first.iter = 0;
  first.objective = res.objective;
  first.rate_var = res.iterate.r;
  first.kkt_residual =
      fill_kkt ? kkt_residual_ibc(scn, covariances(res.iterate), &res.duals).residual : nan;
  res.trace.push_back(first);

  double gamma = opts.gamma0;
  double obj_prev = res.objective;
  for (int nu = 0; nu < opts.max_outer; ++nu) {
    const auto tick = std::chrono::steady_clock::now();
    const RateLinearization lin = linearize_rates(scn, covariances(res.iterate));
    InnerResult in = solve_inner(scn, lin, res.iterate, opts.prox, res.duals, opts.inner);
    res.duals = in.dual.duals;
    const LiftedIterate& hat = in.dual.eval.primal;

    const int users = scn.num_users();
    for (int u = 0; u < users; ++u) {
      res.iterate.q[u] += gamma * (hat.q[u] - res.iterate.q[u]);
      res.iterate.y[u] += gamma * (hat.y[u] - res.iterate.y[u]);
    }
    res.iterate.r += gamma * (hat.r - res.iterate.r);
    res.objective = min_weighted_rate(scn, covariances(res.iterate));
    res.outer_iters = nu + 1;

    TraceRow row;
    row.iter = nu + 1;
    row.objective = res.objective;
    row.rate_var = res.iterate.r;
    row.gamma = gamma;
    row.inner_iters = in.dual.iters;
    row.messages = in.messages;
    if (fill_kkt) {
      res.kkt = kkt_residual_ibc(scn, covariances(res.iterate), &res.duals);
      row.kkt_residual = res.kkt.residual;
    } else {
      row.kkt_residual = nan;
    }
    if (opts.timing) {
      row.time_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - tick)
              .count();
    }
    res.trace.push_back(row);

    gamma = step_size(gamma, opts.gamma_c);
    if (kkt_stop) {
      if (res.kkt.residual <= opts.tol_kkt) {
        res.converged = true;
        break;
      }
    } else if (std::abs(res.objective - obj_prev) <= opts.tol_obj) {
      res.converged = true;
      break;
    }
    obj_prev = res.objective;
  }

  if (!fill_kkt) res.kkt = kkt_residual_ibc(scn, covariances(res.iterate), &res.duals);
  return res;
}

KktReport kkt_residual_ibc(const IbcScenario& scn, const IbcCovariances& q,
                           const IbcDualVars* warm) {
  const int users = scn.num_users();
  const int num_cells = scn.num_cells();

  KktReport rep;
  RealVector rates(users);
  double obj = std::numeric_limits<double>::infinity();
  for (int u = 0; u < users; ++u) {
    rates(u) = rate(scn, q, u);
    obj = std::min(obj, rates(u) / scn.alpha[u]);
  }
  rep.degenerate = obj <= 1e-12;

  // Multiplier fit: one proximal subproblem anchored at q, solved tight.
  LiftedIterate base;
  base.q = q.q;
  base.y.resize(users);
  for (int u = 0; u < users; ++u) base.y[u] = total_rx_cov(scn, q, u);
  base.r = obj;
  const RateLinearization lin = linearize_rates(scn, q);
  const ProxParams prox{1e-7, 1e-4, 1e-4};
  DualOptions dopts;
  dopts.tol = 1e-9;
  dopts.max_iters = 300;
  const IbcDualVars start = warm ? *warm : IbcDualVars::zeros(scn);
  const DualSolveResult fit = solve_dual_newton(scn, lin, base, prox, start, dopts);
  const RealVector& lam = fit.duals.lambda;

  // Stationarity in the common rate: the fitted multipliers must price it out.
  double lambda_dot_alpha = 0.0;
  for (int u = 0; u < users; ++u) lambda_dot_alpha += lam(u) * scn.alpha[u];
  const double grad_r = lambda_dot_alpha - 1.0;
  rep.stationarity = std::abs(std::max(0.0, base.r - grad_r) - base.r);

  // Stationarity in the covariances, measured through one projection step.
  const std::vector<std::vector<ComplexMatrix>> grads = weighted_rate_gradients(scn, q);
  for (int k = 0; k < num_cells; ++k) {
    std::vector<ComplexMatrix> moved(scn.users_per_cell[k]);
    for (int i = 0; i < scn.users_per_cell[k]; ++i) {
      const int v = scn.user_index(k, i);
      ComplexMatrix ascent = ComplexMatrix::Zero(q.q[v].rows(), q.q[v].cols());
      for (int u = 0; u < users; ++u) {
        ascent += lam(u) * scn.alpha[u] * grads[u][v];
      }
      moved[i] = q.q[v] + ascent;
    }
    const std::vector<ComplexMatrix> proj = project_cell_covariances(moved, scn.power[k]);
    for (int i = 0; i < scn.users_per_cell[k]; ++i) {
      const int v = scn.user_index(k, i);
      rep.stationarity = std::max(rep.stationarity, (proj[i] - q.q[v]).norm());
    }
  }

  for (int u = 0; u < users; ++u) {
    rep.complementarity =
        std::max(rep.complementarity, std::abs(lam(u) * (scn.alpha[u] * base.r - rates(u))));
  }

  for (int u = 0; u < users; ++u) {
    const EigenPair eig = herm_eig(hermitize(q.q[u]));
    rep.feasibility = std::max(rep.feasibility, -eig.values.minCoeff());
  }
  for (int k = 0; k < num_cells; ++k) {
    double used = 0.0;
    for (int i = 0; i < scn.users_per_cell[k]; ++i) {
      used += q.q[scn.user_index(k, i)].real().trace();
    }
    rep.feasibility = std::max(rep.feasibility, used - scn.power[k]);
  }

  rep.residual = std::max({rep.stationarity, rep.complementarity, rep.feasibility});
  return rep;
}

double d_stationarity_probe(const IbcScenario& scn, const IbcCovariances& q, int num_dirs,
                            SplitRng& rng) {
  const int users = scn.num_users();
  const int num_cells = scn.num_cells();

  RealVector rates(users);
  double obj = std::numeric_limits<double>::infinity();
  for (int u = 0; u < users; ++u) {
    rates(u) = rate(scn, q, u);
    obj = std::min(obj, rates(u) / scn.alpha[u]);
  }
  std::vector<int> active;
  for (int u = 0; u < users; ++u) {
    if (rates(u) / scn.alpha[u] <= obj * (1.0 + 1e-6) + 1e-12) active.push_back(u);
  }
  const std::vector<std::vector<ComplexMatrix>> grads = weighted_rate_gradients(scn, q);

  double worst = 0.0;
  for (int n = 0; n < num_dirs; ++n) {
    // Random feasible target: per cell, random PSD covariances scaled to a
    // uniformly drawn fraction of the budget.
    std::vector<ComplexMatrix> target(users);
    for (int k = 0; k < num_cells; ++k) {
      double tr_sum = 0.0;
      std::vector<ComplexMatrix> raw(scn.users_per_cell[k]);
      for (int i = 0; i < scn.users_per_cell[k]; ++i) {
        const int tx = scn.tx_antennas[k];
        ComplexMatrix b(tx, tx);
        for (int r = 0; r < tx; ++r) {
          for (int c = 0; c < tx; ++c) {
            b(r, c) = std::complex<double>(rng.gaussian(), rng.gaussian());
          }
        }
        raw[i] = b * b.adjoint();
        tr_sum += raw[i].real().trace();
      }
      const double scale = scn.power[k] * rng.uniform() / std::max(tr_sum, 1e-300);
      for (int i = 0; i < scn.users_per_cell[k]; ++i) {
        target[scn.user_index(k, i)] = hermitize(scale * raw[i]);
      }
    }

    double norm_sq = 0.0;
    for (int u = 0; u < users; ++u) norm_sq += (target[u] - q.q[u]).squaredNorm();
    const double norm = std::sqrt(norm_sq);
    if (norm < 1e-12) continue;

    double deriv = std::numeric_limits<double>::infinity();
    for (int u : active) {
      double g = 0.0;
      for (int v = 0; v < users; ++v) g += re_inner(grads[u][v], target[v] - q.q[v]);
      deriv = std::min(deriv, g);
    }
    worst = std::max(worst, deriv / norm);
  }
  return worst;
}

}  // namespace nova

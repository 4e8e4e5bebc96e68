// Second-order dual machinery: dense curvature from the constraint Jacobians
// and the damped projected Newton ascent built on it.

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "nova/ibc_dual.hpp"

namespace nova {

namespace {

struct CoordLayout {
  std::vector<int> q_off;   // per user, primal columns
  std::vector<int> q_dim;   // tx dimension squared
  std::vector<int> y_off;   // per user, primal columns
  std::vector<int> y_dim;   // rx dimension squared
  std::vector<int> om_off;  // per user, dual rows
  int r_off = 0;
  int primal_dim = 0;
  int dual_dim = 0;
};

CoordLayout make_layout(const IbcScenario& scn) {
  const int users = scn.num_users();
  CoordLayout lay;
  lay.q_off.resize(users);
  lay.q_dim.resize(users);
  lay.y_off.resize(users);
  lay.y_dim.resize(users);
  lay.om_off.resize(users);
  int col = 0;
  for (int u = 0; u < users; ++u) {
    const int t = scn.tx_antennas[scn.cell_of(u)];
    lay.q_off[u] = col;
    lay.q_dim[u] = t * t;
    col += t * t;
  }
  lay.r_off = col++;
  for (int u = 0; u < users; ++u) {
    const int m = scn.rx_antennas(u);
    lay.y_off[u] = col;
    lay.y_dim[u] = m * m;
    col += m * m;
  }
  lay.primal_dim = col;
  int row = users;
  for (int u = 0; u < users; ++u) {
    lay.om_off[u] = row;
    row += lay.y_dim[u];
  }
  lay.dual_dim = row;
  return lay;
}

const std::vector<ComplexMatrix>& basis_for(std::map<int, std::vector<ComplexMatrix>>& cache,
                                            int dim) {
  auto it = cache.find(dim);
  if (it == cache.end()) it = cache.emplace(dim, hermitian_basis(dim)).first;
  return it->second;
}

IbcDualVars project_duals(const IbcDualVars& duals) {
  IbcDualVars out;
  out.lambda = duals.lambda.cwiseMax(0.0);
  out.omega.reserve(duals.omega.size());
  for (const ComplexMatrix& om : duals.omega) out.omega.push_back(psd_project(om));
  return out;
}

RealVector pack_gradient(const CoordLayout& lay, const DualEval& eval) {
  RealVector g(lay.dual_dim);
  const int users = static_cast<int>(eval.grad_lambda.size());
  g.head(users) = eval.grad_lambda;
  for (int u = 0; u < users; ++u) {
    g.segment(lay.om_off[u], lay.y_dim[u]) = hermitian_coords(eval.grad_omega[u]);
  }
  return g;
}

}  // namespace

RealMatrix dual_hessian(const IbcScenario& scn, const RateLinearization& lin,
                        const LiftedIterate& base, const ProxParams& prox,
                        const IbcDualVars& duals, const DualEval& eval) {
  const int users = scn.num_users();
  const int num_cells = scn.num_cells();
  const CoordLayout lay = make_layout(scn);
  std::map<int, std::vector<ComplexMatrix>> bases;

  RealMatrix jac = RealMatrix::Zero(lay.dual_dim, lay.primal_dim);

  // Rate constraint rows: alpha_u r - fplus(y_u) + linearized interference.
  for (int u = 0; u < users; ++u) {
    for (int v = 0; v < users; ++v) {
      if (v == u) continue;
      jac.block(u, lay.q_off[v], 1, lay.q_dim[v]) =
          hermitian_coords(lin.pi[u][scn.cell_of(v)]).transpose();
    }
    jac(u, lay.r_off) = scn.alpha[u];
    const int m = scn.rx_antennas(u);
    const ComplexMatrix s = scn.noise[u] * ComplexMatrix::Identity(m, m) + eval.primal.y[u];
    const ComplexMatrix s_inv = hermitize(s.llt().solve(ComplexMatrix::Identity(m, m)));
    jac.block(u, lay.y_off[u], 1, lay.y_dim[u]) = -hermitian_coords(s_inv).transpose();
  }

  // Slack constraint rows: y_u - received covariance, one row per basis
  // element of the user's slack space.
  for (int u = 0; u < users; ++u) {
    const int m = scn.rx_antennas(u);
    const std::vector<ComplexMatrix>& bs = basis_for(bases, m);
    for (int a = 0; a < lay.y_dim[u]; ++a) {
      const int row = lay.om_off[u] + a;
      jac(row, lay.y_off[u] + a) = 1.0;
      for (int l = 0; l < num_cells; ++l) {
        const ComplexMatrix& h = scn.channel[u][l];
        const RealVector coords = hermitian_coords(hermitize(h.adjoint() * bs[a] * h));
        for (int i = 0; i < scn.users_per_cell[l]; ++i) {
          const int v = scn.user_index(l, i);
          jac.block(row, lay.q_off[v], 1, lay.q_dim[v]) = -coords.transpose();
        }
      }
    }
  }

  // Response of each block minimizer to the constraint gradients. All three
  // blocks are clipped spectral maps, so the exact derivative acts diagonally
  // on eigenpair coordinates with divided-difference coefficients; clipped
  // pairs respond with zero, and a binding power budget couples a cell's
  // active eigendirections through the shared water level.
  std::vector<CellQSolution> qsol;
  qsol.reserve(num_cells);
  for (int k = 0; k < num_cells; ++k) qsol.push_back(q_star(scn, lin, base, prox, duals, k));

  std::vector<EigenPair> ysp(users);
  std::vector<RealVector> ylv(users);
  for (int u = 0; u < users; ++u) {
    ysp[u] = herm_eig(hermitize(2.0 * prox.tau_y * base.y[u] - duals.omega[u]));
    ylv[u] = y_levels(ysp[u].values, duals.lambda(u), scn.noise[u], prox.tau_y);
  }

  RealMatrix jh = RealMatrix::Zero(lay.dual_dim, lay.primal_dim);

  if (eval.primal.r > 0.0) jh.col(lay.r_off) = jac.col(lay.r_off) / prox.tau_r;

  for (int row = 0; row < lay.dual_dim; ++row) {
    for (int k = 0; k < num_cells; ++k) {
      const CellQSolution& qs = qsol[k];
      const int own = scn.users_per_cell[k];
      const int tx = scn.tx_antennas[k];

      std::vector<ComplexMatrix> t(own);
      double active_sum = 0.0;
      int active = 0;
      for (int i = 0; i < own; ++i) {
        const int v = scn.user_index(k, i);
        const RealVector coords = jac.block(row, lay.q_off[v], 1, lay.q_dim[v]).transpose();
        t[i] = qs.eig[i].vectors.adjoint() * hermitian_from_coords(coords, tx) *
               qs.eig[i].vectors;
        for (int j = 0; j < tx; ++j) {
          if (qs.eig[i].values(j) - qs.xi > 0.0) {
            active_sum += t[i](j, j).real();
            ++active;
          }
        }
      }
      const double level_shift = (qs.xi > 0.0 && active > 0) ? active_sum / active : 0.0;

      for (int i = 0; i < own; ++i) {
        const int v = scn.user_index(k, i);
        const RealVector& d = qs.eig[i].values;
        ComplexMatrix out = ComplexMatrix::Zero(tx, tx);
        for (int a = 0; a < tx; ++a) {
          const bool on_a = d(a) - qs.xi > 0.0;
          for (int b = 0; b < tx; ++b) {
            const bool on_b = d(b) - qs.xi > 0.0;
            if (on_a && on_b) {
              out(a, b) = t[i](a, b) / (2.0 * prox.tau_q);
            } else if (on_a || on_b) {
              const int hi = on_a ? a : b;
              const int lo = on_a ? b : a;
              out(a, b) = t[i](a, b) * (d(hi) - qs.xi) / (2.0 * prox.tau_q * (d(hi) - d(lo)));
            }
          }
          if (on_a) out(a, a) -= level_shift / (2.0 * prox.tau_q);
        }
        jh.block(row, lay.q_off[v], 1, lay.q_dim[v]) =
            hermitian_coords(hermitize(qs.eig[i].vectors * out * qs.eig[i].vectors.adjoint()))
                .transpose();
      }
    }
  }

  // Slack columns of user u appear only in that user's rate row and its own
  // multiplier rows, so only those rows need the transform.
  for (int u = 0; u < users; ++u) {
    const int m = scn.rx_antennas(u);
    const RealVector& d = ysp[u].values;
    const RealVector& lv = ylv[u];
    for (int a = -1; a < lay.y_dim[u]; ++a) {
      const int row = a < 0 ? u : lay.om_off[u] + a;
      const RealVector coords = jac.block(row, lay.y_off[u], 1, lay.y_dim[u]).transpose();
      const ComplexMatrix t =
          ysp[u].vectors.adjoint() * hermitian_from_coords(coords, m) * ysp[u].vectors;
      ComplexMatrix out = ComplexMatrix::Zero(m, m);
      for (int p = 0; p < m; ++p) {
        const bool on_p = lv(p) > 0.0;
        for (int q = 0; q < m; ++q) {
          const bool on_q = lv(q) > 0.0;
          if (on_p && on_q) {
            const double sp = scn.noise[u] + lv(p);
            const double sq = scn.noise[u] + lv(q);
            out(p, q) = t(p, q) / (2.0 * prox.tau_y + duals.lambda(u) / (sp * sq));
          } else if (on_p || on_q) {
            const int hi = on_p ? p : q;
            const int lo = on_p ? q : p;
            out(p, q) = t(p, q) * lv(hi) / (d(hi) - d(lo));
          }
        }
      }
      jh.block(row, lay.y_off[u], 1, lay.y_dim[u]) =
          hermitian_coords(hermitize(ysp[u].vectors * out * ysp[u].vectors.adjoint()))
              .transpose();
    }
  }

  RealMatrix hess = -(jh * jac.transpose());
  return 0.5 * (hess + hess.transpose());
}

DualSolveResult solve_dual_newton_via(const IbcScenario& scn, const RateLinearization& lin,
                                      const LiftedIterate& base, const ProxParams& prox,
                                      const DualEvaluator& evaluate, const IbcDualVars& warm,
                                      const DualOptions& opts) {
  const int users = scn.num_users();
  const CoordLayout lay = make_layout(scn);

  DualSolveResult res;
  res.duals = project_duals(warm);
  res.eval = evaluate(res.duals);

  // The dual is piecewise quadratic, so the curvature can be exactly singular
  // along directions whose primal responses are pinned by clips or budgets.
  // A Levenberg-style damping term, floored at the configured ridge, bounds
  // the Newton target in those flat directions; it escalates when a damped
  // step fails and relaxes again after clean unit steps.
  double damping = opts.newton_ridge;

  for (int n = 0; n < opts.max_iters; ++n) {
    if (res.eval.residual <= opts.tol) {
      res.iters = n;
      res.converged = true;
      return res;
    }

    const RealMatrix hess = dual_hessian(scn, lin, base, prox, res.duals, res.eval);
    RealVector g = pack_gradient(lay, res.eval);
    // Multipliers pinned at zero with outward-pointing gradients stay put;
    // solving for them would drag the free block off its own Newton step.
    std::vector<int> pinned;
    for (int u = 0; u < users; ++u) {
      if (res.duals.lambda(u) <= 1e-12 && res.eval.grad_lambda(u) <= 0.0) {
        pinned.push_back(u);
        g(u) = 0.0;
      }
    }

    // The matrix multipliers need the same treatment on the cone boundary.
    // Rotating a block into the eigenbasis of its current matrix turns the
    // active boundary directions into plain coordinates; the ones whose
    // gradient points out of the cone are pinned so the Newton step stays on
    // the face instead of being mangled by the projection afterwards.
    RealMatrix hrot = hess;
    std::vector<std::pair<int, RealMatrix>> rotations;
    for (int u = 0; u < users; ++u) {
      const int m = scn.rx_antennas(u);
      const EigenPair ow = herm_eig(res.duals.omega[u]);
      const double eps_face = 1e-12 * std::max(1.0, ow.values.maxCoeff());
      const ComplexMatrix gt =
          ow.vectors.adjoint() * res.eval.grad_omega[u] * ow.vectors;
      std::vector<bool> clamped(m, false);
      bool any = false;
      for (int i = 0; i < m; ++i) {
        if (ow.values(i) <= eps_face && gt(i, i).real() <= 0.0) {
          clamped[i] = true;
          any = true;
        }
      }
      if (!any) continue;
      const int md = lay.y_dim[u];
      const std::vector<ComplexMatrix> bs = hermitian_basis(m);
      RealMatrix rot(md, md);
      for (int a = 0; a < md; ++a) {
        rot.col(a) =
            hermitian_coords(hermitize(ow.vectors.adjoint() * bs[a] * ow.vectors));
      }
      const int off = lay.om_off[u];
      hrot.middleRows(off, md) = rot * hrot.middleRows(off, md);
      hrot.middleCols(off, md) = hrot.middleCols(off, md) * rot.transpose();
      g.segment(off, md) = rot * g.segment(off, md);
      for (int b = 0; b < md; ++b) {
        RealVector unit = RealVector::Zero(md);
        unit(b) = 1.0;
        const ComplexMatrix eb = hermitian_from_coords(unit, m);
        bool inside = true;
        for (int i = 0; i < m && inside; ++i) {
          for (int j = 0; j < m; ++j) {
            if (std::abs(eb(i, j)) > 1e-12 && !(clamped[i] && clamped[j])) {
              inside = false;
              break;
            }
          }
        }
        if (inside) {
          pinned.push_back(off + b);
          g(off + b) = 0.0;
        }
      }
      rotations.emplace_back(off, std::move(rot));
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
    const auto improves = [&res, tol_eq](const DualEval& t) {
      if (t.value > res.eval.value + tol_eq) return true;
      return t.value >= res.eval.value - tol_eq && t.residual <= 0.9 * res.eval.residual;
    };
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      RealMatrix curv = -hrot;
      curv += damping * RealMatrix::Identity(lay.dual_dim, lay.dual_dim);
      for (int i : pinned) {
        curv.row(i).setZero();
        curv.col(i).setZero();
        curv(i, i) = 1.0;
      }
      RealVector delta = curv.ldlt().solve(g);
      if (!delta.allFinite()) {
        damping = std::min(1e12, std::max(10.0 * damping, 1e-8));
        continue;
      }
      for (const auto& [off, rot] : rotations) {
        delta.segment(off, rot.rows()) = rot.transpose() * delta.segment(off, rot.rows());
      }

      IbcDualVars target;
      target.lambda = (res.duals.lambda + delta.head(users)).cwiseMax(0.0);
      target.omega.reserve(users);
      for (int u = 0; u < users; ++u) {
        target.omega.push_back(psd_project(
            res.duals.omega[u] +
            hermitian_from_coords(delta.segment(lay.om_off[u], lay.y_dim[u]),
                                  scn.rx_antennas(u))));
      }
      // The rate response clips to zero across the hyperplane where the
      // weighted multiplier sum hits 1 + tau_r * r_base. Crossing it mid-step
      // leaves the quadratic model on the wrong piece, so the crossing point
      // itself (nudged to the curved side) joins the backtracking ladder.
      double s_kink = -1.0;
      {
        double mu0 = 0.0;
        double dmu = 0.0;
        for (int u = 0; u < users; ++u) {
          mu0 += scn.alpha[u] * res.duals.lambda(u);
          dmu += scn.alpha[u] * (target.lambda(u) - res.duals.lambda(u));
        }
        const double kink = 1.0 + prox.tau_r * base.r;
        if (dmu != 0.0) {
          const double c = (kink - mu0) / dmu;
          const double land = c * (dmu > 0.0 ? 1.0 - 1e-6 : 1.0 + 1e-6);
          if (land > 2e-4 && land < 1.0) s_kink = land;
        }
      }
      std::vector<double> ladder;
      for (double s = 1.0; s >= 1e-4; s *= 0.5) {
        if (s_kink > s && (ladder.empty() || s_kink < ladder.back())) {
          ladder.push_back(s_kink);
        }
        ladder.push_back(s);
      }
      double s_used = 0.0;
      for (double s : ladder) {
        IbcDualVars trial;
        trial.lambda = res.duals.lambda + s * (target.lambda - res.duals.lambda);
        trial.omega.reserve(users);
        for (int u = 0; u < users; ++u) {
          trial.omega.push_back(res.duals.omega[u] +
                                s * (target.omega[u] - res.duals.omega[u]));
        }
        DualEval teval = evaluate(trial);
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
        IbcDualVars trial = dual_ascent_step(res.duals, res.eval, s);
        DualEval teval = evaluate(trial);
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

DualSolveResult solve_dual_newton(const IbcScenario& scn, const RateLinearization& lin,
                                  const LiftedIterate& base, const ProxParams& prox,
                                  const IbcDualVars& warm, const DualOptions& opts) {
  return solve_dual_newton_via(
      scn, lin, base, prox,
      [&](const IbcDualVars& d) { return dual_value_and_grad(scn, lin, base, prox, d); }, warm,
      opts);
}

}  // namespace nova

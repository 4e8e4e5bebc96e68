#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nova/mmf.hpp"

namespace nova {

MmfIterate mmf_init(const MmfScenario& scn) {
  const int groups = scn.num_groups();
  MmfIterate x;
  x.w.resize(groups);
  for (int k = 0; k < groups; ++k) {
    const int n = scn.tx_antennas[k];
    ComplexMatrix sum = ComplexMatrix::Zero(n, n);
    for (int i = 0; i < scn.users_per_group[k]; ++i) {
      sum += scn.gram[scn.user_index(k, i)][k];
    }
    const EigenPair eig = herm_eig(hermitize(sum));
    x.w[k] = std::sqrt(scn.power[k]) * eig.vectors.col(0);
  }
  const int users = scn.num_users();
  x.beta.resize(users);
  for (int i = 0; i < users; ++i) x.beta(i) = mmf_interference(scn, x.w, i);
  x.t = mmf_utility(scn, x.w);
  if (!(x.t > 0.0)) {
    throw std::domain_error("mmf_init: a user starts at zero SINR; the ratio bound needs "
                            "strictly positive anchors");
  }
  return x;
}

namespace {

MmfInnerResult centralized_inner(MmfDualMethod method, const MmfScenario& scn, MmfSurrogate kind,
                                 const MmfIterate& base, const MmfProx& prox,
                                 const MmfDualVars& warm, const MmfDualOptions& opts) {
  MmfInnerResult res;
  res.dual = solve_mmf_subproblem(scn, kind, base, prox, warm, method, opts);
  res.messages = 0;
  return res;
}

}  // namespace

MmfSolveResult solve_mmf(const MmfScenario& scn, const MmfOuterOptions& opts,
                         const MmfInnerSolverFn& inner) {
  scn.validate();
  const MmfInnerSolverFn solve_inner =
      inner ? inner
            : [&opts](const MmfScenario& s, MmfSurrogate kind, const MmfIterate& base,
                      const MmfProx& prox, const MmfDualVars& warm, const MmfDualOptions& dopts) {
                return centralized_inner(opts.method, s, kind, base, prox, warm, dopts);
              };

  MmfSolveResult res;
  res.iterate = mmf_init(scn);
  res.duals = MmfDualVars::zeros(scn);
  res.objective = res.iterate.t;

  const bool kkt_stop = opts.tol_kkt > 0.0;
  const bool fill_kkt = opts.track_kkt || kkt_stop;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  TraceRow first;
  first.iter = 0;
  first.objective = res.objective;
  first.rate_var = res.iterate.t;
  first.kkt_residual =
      fill_kkt ? kkt_residual_mmf(scn, res.iterate.w, &res.duals).residual : nan;
  res.trace.push_back(first);

  double gamma = opts.gamma0;
  double obj_prev = res.objective;
  for (int nu = 0; nu < opts.max_outer; ++nu) {
    const auto tick = std::chrono::steady_clock::now();
    MmfInnerResult in =
        solve_inner(scn, opts.surrogate, res.iterate, opts.prox, res.duals, opts.inner);
    res.duals = in.dual.duals;
    const MmfIterate& hat = in.dual.eval.primal;

    for (int k = 0; k < scn.num_groups(); ++k) {
      res.iterate.w[k] += gamma * (hat.w[k] - res.iterate.w[k]);
    }
    res.iterate.beta += gamma * (hat.beta - res.iterate.beta);
    res.iterate.t += gamma * (hat.t - res.iterate.t);
    res.objective = mmf_utility(scn, res.iterate.w);
    res.outer_iters = nu + 1;

    TraceRow row;
    row.iter = nu + 1;
    row.objective = res.objective;
    row.rate_var = res.iterate.t;
    row.gamma = gamma;
    row.inner_iters = in.dual.iters;
    row.messages = in.messages;
    if (fill_kkt) {
      res.kkt = kkt_residual_mmf(scn, res.iterate.w, &res.duals);
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

    gamma = gamma * (1.0 - opts.gamma_c * gamma);
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

  if (!fill_kkt) res.kkt = kkt_residual_mmf(scn, res.iterate.w, &res.duals);
  return res;
}

MmfKktReport kkt_residual_mmf(const MmfScenario& scn, const std::vector<ComplexVector>& w,
                              const MmfDualVars* warm) {
  const int users = scn.num_users();
  const int groups = scn.num_groups();

  MmfKktReport rep;
  RealVector sinr(users);
  RealVector level(users);
  double obj = std::numeric_limits<double>::infinity();
  for (int i = 0; i < users; ++i) {
    sinr(i) = mmf_sinr(scn, w, i);
    level(i) = mmf_interference(scn, w, i);
    obj = std::min(obj, sinr(i));
  }
  for (int k = 0; k < groups; ++k) {
    rep.feasibility = std::max(rep.feasibility, w[k].squaredNorm() - scn.power[k]);
  }
  rep.degenerate = obj <= 1e-12;
  if (rep.degenerate) {
    // All signal terms vanish to second order, so any convex multiplier
    // combination certifies stationarity; only feasibility is informative.
    rep.residual = rep.feasibility;
    return rep;
  }

  MmfIterate base;
  base.w = w;
  base.beta = level;
  base.t = obj;
  MmfDualOptions dopts;
  dopts.tol = 1e-10;
  dopts.max_iters = 300;
  const MmfDualVars start = warm ? *warm : MmfDualVars::zeros(scn);
  const MmfDualResult fit = solve_mmf_subproblem(scn, MmfSurrogate::kRatioQuadratic, base,
                                                 MmfProx{}, start, MmfDualMethod::kNewton, dopts);

  // Subproblem multipliers act on t*beta_i <= signal; rescaling by the level
  // converts them to multipliers of t <= sinr_i.
  RealVector lam(users);
  double lam_sum = 0.0;
  for (int i = 0; i < users; ++i) {
    lam(i) = fit.duals.lambda(i) * level(i);
    lam_sum += lam(i);
  }
  rep.stationarity = std::abs(lam_sum - 1.0);

  for (int k = 0; k < groups; ++k) {
    ComplexVector ascent = ComplexVector::Zero(scn.tx_antennas[k]);
    for (int i = 0; i < users; ++i) {
      const ComplexVector hw = scn.gram[i][k] * w[k];
      if (scn.group_of(i) == k) {
        ascent += (2.0 * lam(i) / level(i)) * hw;
      } else {
        ascent -= (2.0 * lam(i) * sinr(i) / level(i)) * hw;
      }
    }
    const ComplexVector moved = w[k] + ascent;
    const double norm = moved.norm();
    const double cap = std::sqrt(scn.power[k]);
    const ComplexVector proj = norm > cap ? ComplexVector(moved * (cap / norm)) : moved;
    rep.stationarity = std::max(rep.stationarity, (proj - w[k]).norm());
  }

  for (int i = 0; i < users; ++i) {
    rep.complementarity = std::max(rep.complementarity, std::abs(lam(i) * (obj - sinr(i))));
  }

  rep.residual = std::max({rep.stationarity, rep.complementarity, rep.feasibility});
  return rep;
}

double mmf_d_stationarity_probe(const MmfScenario& scn, const std::vector<ComplexVector>& w,
                                int num_dirs, SplitRng& rng) {
  const int users = scn.num_users();
  const int groups = scn.num_groups();

  RealVector sinr(users);
  RealVector level(users);
  double obj = std::numeric_limits<double>::infinity();
  for (int i = 0; i < users; ++i) {
    sinr(i) = mmf_sinr(scn, w, i);
    level(i) = mmf_interference(scn, w, i);
    obj = std::min(obj, sinr(i));
  }
  std::vector<int> active;
  for (int i = 0; i < users; ++i) {
    if (sinr(i) <= obj * (1.0 + 1e-6) + 1e-12) active.push_back(i);
  }

  // Complex gradients of each active SINR with respect to every beamformer;
  // directional derivatives are Re(g^H d).
  std::vector<std::vector<ComplexVector>> grad(users);
  for (int i : active) {
    grad[i].resize(groups);
    const int k = scn.group_of(i);
    for (int l = 0; l < groups; ++l) {
      const ComplexVector hw = scn.gram[i][l] * w[l];
      grad[i][l] = l == k ? ComplexVector((2.0 / level(i)) * hw)
                          : ComplexVector((-2.0 * sinr(i) / level(i)) * hw);
    }
  }

  double worst = 0.0;
  for (int n = 0; n < num_dirs; ++n) {
    std::vector<ComplexVector> target(groups);
    double norm_sq = 0.0;
    for (int k = 0; k < groups; ++k) {
      const int nt = scn.tx_antennas[k];
      ComplexVector raw(nt);
      for (int j = 0; j < nt; ++j) raw(j) = std::complex<double>(rng.gaussian(), rng.gaussian());
      const double want = std::sqrt(scn.power[k] * rng.uniform());
      target[k] = (want / raw.norm()) * raw;
      norm_sq += (target[k] - w[k]).squaredNorm();
    }
    const double norm = std::sqrt(norm_sq);
    if (norm < 1e-12) continue;

    double deriv = std::numeric_limits<double>::infinity();
    for (int i : active) {
      double g = 0.0;
      for (int k = 0; k < groups; ++k) {
        g += (grad[i][k].dot(target[k] - w[k])).real();
      }
      deriv = std::min(deriv, g);
    }
    worst = std::max(worst, deriv / norm);
  }
  return worst;
}

}  // namespace nova

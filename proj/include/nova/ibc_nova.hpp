#pragma once

// Outer loop for the max-min rate problem: repeatedly linearize the
// interference terms at the current point, solve the resulting convex
// subproblem through its dual, and move along the convex combination
// x + gamma (xhat - x) with a diminishing gamma. Every iterate stays feasible
// for the lifted constraint set, so the best rates are readable at any stop.

#include <functional>

#include "nova/ibc_dual.hpp"
#include "nova/rng.hpp"
#include "nova/trace.hpp"

namespace nova {

enum class DualMethod { kFirstOrder, kNewton };

struct OuterOptions {
  int max_outer = 2000;
  double tol_obj = 1e-3;  // stop when the objective change drops below this
  double tol_kkt = 0.0;   // if positive, stop on the stationarity residual instead
  double gamma0 = 1.0;
  double gamma_c = 1e-3;  // gamma <- gamma (1 - c gamma)
  DualMethod method = DualMethod::kNewton;
  DualOptions inner;
  ProxParams prox;
  bool track_kkt = false;  // fill the kkt column of every trace row
  bool timing = false;     // record wall time per iteration (off: column stays 0)

  static OuterOptions defaults(DualMethod m);
};

struct KktReport {
  double residual = 0.0;  // max of the parts below
  double stationarity = 0.0;
  double complementarity = 0.0;
  double feasibility = 0.0;
  bool degenerate = false;  // objective pinned at zero rate, multiplier fit unreliable
};

struct IbcSolveResult {
  LiftedIterate iterate;
  IbcDualVars duals;  // inner multipliers at the last subproblem
  double objective = 0.0;
  int outer_iters = 0;
  bool converged = false;
  KktReport kkt;
  std::vector<TraceRow> trace;
};

// Inner solver hook: lets the message-passing runtime substitute its own
// subproblem path while the outer loop stays shared. The default runs the
// centralized solver picked by OuterOptions::method.
struct InnerResult {
  DualSolveResult dual;
  long messages = 0;
};
using InnerSolverFn =
    std::function<InnerResult(const IbcScenario&, const RateLinearization&, const LiftedIterate&,
                              const ProxParams&, const IbcDualVars&, const DualOptions&)>;

double step_size(double gamma_prev, double c);

IbcSolveResult solve_ibc(const IbcScenario& scn, const OuterOptions& opts,
                         const InnerSolverFn& inner = nullptr);

// Stationarity check for the original (unlifted) problem at covariances q.
// Multipliers are recovered by solving one proximal subproblem anchored at q
// to tight tolerance; at a stationary point that subproblem returns q itself
// and its multipliers satisfy the original optimality system.
KktReport kkt_residual_ibc(const IbcScenario& scn, const IbcCovariances& q,
                           const IbcDualVars* warm = nullptr);

// Largest normalized ascent rate of the max-min objective over sampled
// feasible directions; values within tolerance of zero support stationarity.
double d_stationarity_probe(const IbcScenario& scn, const IbcCovariances& q, int num_dirs,
                            SplitRng& rng);

}  // namespace nova

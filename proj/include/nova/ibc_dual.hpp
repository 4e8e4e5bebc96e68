#pragma once

// Dual decomposition of the proximal inner problem built around the lifted
// rate minorants. For fixed multipliers (lambda for the rate constraints,
// omega for the slack-vs-received-covariance constraints) every primal block
// has a closed-form minimizer:
//   - the common rate level r (scalar clip),
//   - each cell's covariances (eigenbasis waterfilling with a water level
//     found by a finite hypothesis scan),
//   - each user's slack matrix (per-eigenvalue quadratic root).
// The dual is maximized either by projected gradient ascent with a damped
// step sequence, or by a damped projected Newton method using the dense dual
// curvature assembled from the constraint Jacobians.
//
// All network-wide reductions run in a fixed cell order so that the
// message-passing runtime reproduces the centralized numbers bit for bit.

#include "nova/ibc_surrogate.hpp"
#include "nova/trace.hpp"

#include <functional>
#include <vector>

namespace nova {

struct ProxParams {
  double tau_r = 1e-7;
  double tau_q = 1e-4;
  double tau_y = 1e-4;
};

struct IbcDualVars {
  RealVector lambda;                 // per user, >= 0
  std::vector<ComplexMatrix> omega;  // per user, PSD, rx dimension
  static IbcDualVars zeros(const IbcScenario& scn);
};

enum class DualStepRule {
  kGeometricDamped,  // beta <- beta (1 - 0.8 beta), the experimental rule
  kHarmonic,         // beta0 / n, square-summable alternative
};

struct DualOptions {
  double tol = 1e-6;  // projected-gradient residual (see DualEval::residual)
  int max_iters = 5000;
  double beta0 = 1.0;
  DualStepRule step_rule = DualStepRule::kGeometricDamped;
  double newton_ridge = 1e-10;
  bool record_trace = false;
};

// --- closed-form block minimizers ---

// argmin over r >= 0 of -r + tau_r/2 (r - r_base)^2 + lambda_dot_alpha * r.
double r_star(double lambda_dot_alpha, double r_base, double tau_r);

// Water level xi* >= 0 such that the allocation [(d_j - xi*)/(2 tau_q)]_+
// meets the budget with complementary slackness. d must be sorted descending;
// finite scan over candidate active-set sizes.
double waterlevel_hypothesis(const RealVector& d_desc, double tau_q, double budget);

// One cell's covariance block: jointly minimizes the cell's share of the
// Lagrangian over PSD covariances under the sum-power budget.
struct CellQSolution {
  std::vector<ComplexMatrix> q;   // per served user
  double xi = 0.0;                // power multiplier
  std::vector<EigenPair> eig;     // spectra of the per-user stationarity matrices
};
CellQSolution q_star(const IbcScenario& scn, const RateLinearization& lin,
                     const LiftedIterate& base, const ProxParams& prox, const IbcDualVars& duals,
                     int cell);

// Nonnegative eigenvalue levels of the slack minimizer: for each entry of
// d_desc, the larger root of 2 tau_y t^2 + (2 tau_y noise - d) t - (d noise + lambda) = 0,
// clipped at zero.
RealVector y_levels(const RealVector& d_desc, double lambda, double noise, double tau_y);

// One user's slack block.
ComplexMatrix y_star(const ComplexMatrix& y_base, const ComplexMatrix& omega, double lambda,
                     double noise, double tau_y);

// --- dual function ---

struct DualEval {
  double value = 0.0;  // dual objective (maximized)
  RealVector grad_lambda;
  std::vector<ComplexMatrix> grad_omega;
  LiftedIterate primal;   // block minimizers at the queried duals
  double residual = 0.0;  // unit-step projected-gradient residual:
                          // Euclidean norm over the lambda part plus the
                          // Frobenius norm over the stacked omega part
};

DualEval dual_value_and_grad(const IbcScenario& scn, const RateLinearization& lin,
                             const LiftedIterate& base, const ProxParams& prox,
                             const IbcDualVars& duals);

// True dual Hessian (negative semidefinite) over the real coordinates
// [lambda; coords(omega_0); coords(omega_1); ...]. Uses the exact piecewise
// Jacobians of the closed-form block minimizers, so it is the true second
// derivative away from clip boundaries, including points where some blocks
// are clipped or the power budget binds.
RealMatrix dual_hessian(const IbcScenario& scn, const RateLinearization& lin,
                        const LiftedIterate& base, const ProxParams& prox,
                        const IbcDualVars& duals, const DualEval& eval);

struct DualSolveResult {
  IbcDualVars duals;
  DualEval eval;
  int iters = 0;
  bool converged = false;
  std::vector<DualIterRecord> trace;
};

// The ascent loops are written against an evaluation callback so that the
// message-passing runtime can route each dual query through its protocol
// while sharing every line of solver logic with the centralized path.
using DualEvaluator = std::function<DualEval(const IbcDualVars&)>;

DualSolveResult solve_dual_first_order_via(const DualEvaluator& evaluate, const IbcDualVars& warm,
                                           const DualOptions& opts);
DualSolveResult solve_dual_newton_via(const IbcScenario& scn, const RateLinearization& lin,
                                      const LiftedIterate& base, const ProxParams& prox,
                                      const DualEvaluator& evaluate, const IbcDualVars& warm,
                                      const DualOptions& opts);

DualSolveResult solve_dual_first_order(const IbcScenario& scn, const RateLinearization& lin,
                                       const LiftedIterate& base, const ProxParams& prox,
                                       const IbcDualVars& warm, const DualOptions& opts);

DualSolveResult solve_dual_newton(const IbcScenario& scn, const RateLinearization& lin,
                                  const LiftedIterate& base, const ProxParams& prox,
                                  const IbcDualVars& warm, const DualOptions& opts);

// --- per-cell pieces, shared with the message-passing runtime ---

// What one cell computes locally from the shared duals: its covariance and
// slack blocks plus the parts of the rate constraints only it can evaluate.
struct CellPrimal {
  std::vector<ComplexMatrix> q;
  std::vector<ComplexMatrix> y;
  std::vector<double> own_rate_part;  // per own user: logdet(noise I + y) - f_minus at base
  double xi = 0.0;
  double prox_cost = 0.0;  // cell's proximal terms, needed for the dual value
};
CellPrimal cell_primal(const IbcScenario& scn, const RateLinearization& lin,
                       const LiftedIterate& base, const ProxParams& prox, const IbcDualVars& duals,
                       int cell);

// What one cell reports towards every user's constraint gradients: its share
// of each linearized interference term and of each received covariance.
struct CellContribution {
  std::vector<double> lin_term;       // per network user
  std::vector<ComplexMatrix> rx_cov;  // per network user
};
CellContribution cell_contribution(const IbcScenario& scn, const RateLinearization& lin,
                                   const LiftedIterate& base, const CellPrimal& cp, int cell);

// Header-side assembly; reduces the per-cell pieces in cell order.
DualEval assemble_dual_eval(const IbcScenario& scn, const LiftedIterate& base,
                            const ProxParams& prox, const IbcDualVars& duals,
                            const std::vector<CellPrimal>& cells,
                            const std::vector<CellContribution>& contribs);

// One projected ascent step (shared by the centralized loop and the header
// agent); returns the updated duals.
IbcDualVars dual_ascent_step(const IbcDualVars& duals, const DualEval& eval, double beta);

double next_beta(double beta, int iter, const DualOptions& opts);

}  // namespace nova

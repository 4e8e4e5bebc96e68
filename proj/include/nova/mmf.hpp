#pragma once

// Max-min-fair multigroup multicast beamforming. The SINR constraints are
// rewritten with explicit interference levels, the bilinear product between
// the common SINR target and each level is replaced by one of two convex
// upper bounds, and the resulting subproblem is solved through its dual with
// closed-form blocks: scalar clips for the target and the levels, a shifted
// ridge system with a power bisection for each beamformer.

#include <functional>
#include <vector>

#include "nova/rng.hpp"
#include "nova/scenario.hpp"
#include "nova/trace.hpp"

namespace nova {

struct MmfIterate {
  std::vector<ComplexVector> w;  // one beamformer per transmitter
  RealVector beta;               // per user interference-plus-noise level
  double t = 0.0;                // common SINR target
};

struct MmfDualVars {
  RealVector lambda;  // SINR constraints
  RealVector eta;     // interference level constraints
  static MmfDualVars zeros(const MmfScenario& scn);
};

struct MmfProx {
  double tau_t = 1e-5;
  double tau_beta = 1e-5;
  double tau_w = 1e-5;
};

// Convex upper bounds of t * beta around anchors (t0, beta0):
//   kRatioQuadratic   0.5 (beta0/t0) t^2 + 0.5 (t0/beta0) beta^2, anchors > 0
//   kSquareExpansion  0.5 (t+beta)^2 - t0 (t-t0) - beta0 (beta-beta0)
//                     - 0.5 (t0^2 + beta0^2)
enum class MmfSurrogate { kRatioQuadratic, kSquareExpansion };

double g_ratio_quadratic(double t, double beta, double t0, double beta0);
double g_square_expansion(double t, double beta, double t0, double beta0);
double bilinear_surrogate(MmfSurrogate kind, double t, double beta, double t0, double beta0);

enum class MmfDualMethod { kFirstOrder, kNewton };

struct MmfDualOptions {
  double tol = 1e-7;  // Euclidean norm of the projected ascent step
  int max_iters = 20000;
  double beta0 = 1.0;
  bool harmonic = false;   // beta0/n instead of the damped product rule
  double momentum = 0.0;   // heavy-ball weight on the previous dual step
  double newton_ridge = 1e-10;
  bool record_trace = false;
};

// --- closed-form blocks ---

double t_hat_ratio(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                   const RealVector& lambda);
RealVector beta_hat_ratio(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                          const MmfDualVars& duals);
// The square-expansion bound couples t with every level, solved jointly by
// bisection on the reduced derivative.
void t_beta_hat_square(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                       const MmfDualVars& duals, double* t_out, RealVector* beta_out);

// Beamformer block for one transmitter: ridge system plus power bisection.
struct WSolution {
  ComplexVector w;
  double xi = 0.0;  // power multiplier
};
WSolution w_hat(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                const MmfDualVars& duals, int group);

// --- dual function ---

struct MmfDualEval {
  double value = 0.0;
  RealVector grad_lambda;
  RealVector grad_eta;
  MmfIterate primal;
  double residual = 0.0;
};

MmfDualEval mmf_dual_eval(const MmfScenario& scn, MmfSurrogate kind, const MmfIterate& base,
                          const MmfProx& prox, const MmfDualVars& duals);

// --- per-transmitter pieces, shared with the message-passing runtime ---

// What one transmitter computes from the shared duals: its beamformer block,
// its proximal cost, and the linearized signal term of each served user.
struct MmfCellPrimal {
  ComplexVector w;
  double prox_cost = 0.0;
  std::vector<double> signal_lin;  // per own user
};
MmfCellPrimal mmf_cell_primal(const MmfScenario& scn, const MmfIterate& base, const MmfProx& prox,
                              const MmfDualVars& duals, int group);

// Interference this transmitter causes at every user it does not serve.
struct MmfCellContribution {
  std::vector<double> interference;  // per network user; zero for own group
};
MmfCellContribution mmf_cell_contribution(const MmfScenario& scn, const MmfCellPrimal& cp,
                                          int group);

// Header-side assembly; computes the scalar blocks and reduces the
// per-transmitter pieces in transmitter order.
MmfDualEval mmf_assemble_eval(const MmfScenario& scn, MmfSurrogate kind, const MmfIterate& base,
                              const MmfProx& prox, const MmfDualVars& duals,
                              const std::vector<MmfCellPrimal>& cells,
                              const std::vector<MmfCellContribution>& contribs);

// Dual Hessian over [lambda; eta] from the exact piecewise Jacobians of the
// closed-form blocks: clamped levels and a zero target respond with zero, and
// a binding power budget restricts each beamformer response to the tangent of
// its sphere.
RealMatrix mmf_dual_hessian(const MmfScenario& scn, MmfSurrogate kind, const MmfIterate& base,
                            const MmfProx& prox, const MmfDualVars& duals,
                            const MmfDualEval& eval);

struct MmfDualResult {
  MmfDualVars duals;
  MmfDualEval eval;
  int iters = 0;
  bool converged = false;
  std::vector<DualIterRecord> trace;
};

MmfDualResult solve_mmf_subproblem(const MmfScenario& scn, MmfSurrogate kind,
                                   const MmfIterate& base, const MmfProx& prox,
                                   const MmfDualVars& warm, MmfDualMethod method,
                                   const MmfDualOptions& opts);

// Evaluator-injected variant, so the message-passing runtime can route each
// dual query through its protocol while sharing every solver line with the
// centralized path.
using MmfDualEvaluator = std::function<MmfDualEval(const MmfDualVars&)>;

MmfDualResult solve_mmf_subproblem_via(const MmfScenario& scn, MmfSurrogate kind,
                                       const MmfIterate& base, const MmfProx& prox,
                                       const MmfDualEvaluator& evaluate, const MmfDualVars& warm,
                                       MmfDualMethod method, const MmfDualOptions& opts);

// --- outer loop ---

struct MmfOuterOptions {
  int max_outer = 5000;
  double tol_obj = 1e-3;
  double tol_kkt = 0.0;  // if positive, stop on the stationarity residual instead
  double gamma0 = 1.0;
  double gamma_c = 1e-2;
  MmfSurrogate surrogate = MmfSurrogate::kRatioQuadratic;
  MmfDualMethod method = MmfDualMethod::kNewton;
  MmfDualOptions inner;
  MmfProx prox;
  bool track_kkt = false;
  bool timing = false;
};

struct MmfKktReport {
  double residual = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double feasibility = 0.0;
  bool degenerate = false;
};

struct MmfSolveResult {
  MmfIterate iterate;
  MmfDualVars duals;
  double objective = 0.0;  // min SINR over users
  int outer_iters = 0;
  bool converged = false;
  MmfKktReport kkt;
  std::vector<TraceRow> trace;
};

struct MmfInnerResult {
  MmfDualResult dual;
  long messages = 0;
};
using MmfInnerSolverFn =
    std::function<MmfInnerResult(const MmfScenario&, MmfSurrogate, const MmfIterate&,
                                 const MmfProx&, const MmfDualVars&, const MmfDualOptions&)>;

// Scaled dominant-eigenvector start; throws if some user starts at zero SINR,
// since the ratio bound needs strictly positive anchors.
MmfIterate mmf_init(const MmfScenario& scn);

MmfSolveResult solve_mmf(const MmfScenario& scn, const MmfOuterOptions& opts,
                         const MmfInnerSolverFn& inner = nullptr);

MmfKktReport kkt_residual_mmf(const MmfScenario& scn, const std::vector<ComplexVector>& w,
                              const MmfDualVars* warm = nullptr);

// Largest normalized ascent rate of the min-SINR objective over sampled
// feasible directions; values within tolerance of zero support stationarity.
double mmf_d_stationarity_probe(const MmfScenario& scn, const std::vector<ComplexVector>& w,
                                int num_dirs, SplitRng& rng);

}  // namespace nova

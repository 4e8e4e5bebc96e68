#pragma once

// Concave minorants of the per-user rates and the slack-lifted iterate they
// act on. Each rate splits as f_plus - f_minus with both parts concave;
// linearizing f_minus at a base point gives a concave lower bound that is
// tight (value and gradient) at that base. The lifted form replaces the
// received-signal covariance inside f_plus by a slack matrix Y bounded by the
// true covariance, which decouples the dual subproblems later on.

#include "nova/hermitian.hpp"
#include "nova/scenario.hpp"

#include <vector>

namespace nova {

// One point of the lifted problem: covariances q, received-covariance slacks
// y (one per user), and the common rate level r.
struct LiftedIterate {
  std::vector<ComplexMatrix> q;
  std::vector<ComplexMatrix> y;
  double r = 0.0;
};

// Signal-plus-interference part of the rate: logdet(noise*I + total rx cov).
double f_plus(const IbcScenario& scn, const IbcCovariances& q, int user);

// Interference part: logdet(noise*I + rx cov excluding own signal).
double f_minus(const IbcScenario& scn, const IbcCovariances& q, int user);

// logdet(noise*I + Y): f_plus as a function of the slack alone.
double f_bar_plus(double noise, const ComplexMatrix& y);

// Gradient of f_minus(user) with respect to the covariance of any other user
// served by transmitter `bs` (it only depends on bs, not on which user):
// H^H inv(interference cov) H. Not valid for the user's own covariance,
// which f_minus does not depend on.
ComplexMatrix pi_grad(const IbcScenario& scn, const IbcCovariances& q, int user, int bs);

// Everything the surrogates need about the base point, computed once per
// outer iteration: f_minus values and all pi_grad matrices.
struct RateLinearization {
  std::vector<double> f_minus_base;          // per user
  std::vector<std::vector<ComplexMatrix>> pi;  // [user][bs]
};
RateLinearization linearize_rates(const IbcScenario& scn, const IbcCovariances& base);

// Linearized f_minus at q, expanded around `base`.
double f_minus_linearized(const IbcScenario& scn, const RateLinearization& lin,
                          const IbcCovariances& base, const IbcCovariances& q, int user);

// Concave rate minorant: f_plus(q) - linearized f_minus. Equals rate() at the
// base point and never exceeds it elsewhere.
double tilde_rate(const IbcScenario& scn, const IbcCovariances& q, const IbcCovariances& base,
                  int user);

// Lifted minorant: f_bar_plus(y) - linearized f_minus.
double hat_rate(const IbcScenario& scn, const IbcCovariances& q, const ComplexMatrix& y,
                const IbcCovariances& base, int user);

// Uniform power split across served users and antennas; slacks set to the
// exact received covariances, r to the attained min weighted rate. Feasible
// for the lifted problem by construction.
LiftedIterate init_feasible(const IbcScenario& scn);

// Convenience: covariance view of a lifted iterate.
IbcCovariances covariances(const LiftedIterate& w);

// Worst violation of the lifted problem's constraints at w (0 when feasible):
// PSD/power margins on q, the rate constraints, and 0 <= y <= total rx cov.
double lifted_infeasibility(const IbcScenario& scn, const LiftedIterate& w);

// min over users of rate / alpha: the quantity the outer loop maximizes.
double min_weighted_rate(const IbcScenario& scn, const IbcCovariances& q);

}  // namespace nova

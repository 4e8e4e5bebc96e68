#include "nova/ibc_surrogate.hpp"

#include <algorithm>
#include <limits>

namespace nova {

double f_plus(const IbcScenario& scn, const IbcCovariances& q, int user) {
  const int m = scn.rx_antennas(user);
  return logdet_psd(scn.noise[user] * ComplexMatrix::Identity(m, m) + total_rx_cov(scn, q, user));
}

double f_minus(const IbcScenario& scn, const IbcCovariances& q, int user) {
  return logdet_psd(interference_cov(scn, q, user));
}

double f_bar_plus(double noise, const ComplexMatrix& y) {
  const Eigen::Index m = y.rows();
  return logdet_psd(noise * ComplexMatrix::Identity(m, m) + y);
}

ComplexMatrix pi_grad(const IbcScenario& scn, const IbcCovariances& q, int user, int bs) {
  const ComplexMatrix bar = interference_cov(scn, q, user);
  const ComplexMatrix& h = scn.channel[user][bs];
  Eigen::LLT<ComplexMatrix> llt(bar);
  return hermitize(h.adjoint() * llt.solve(h));
}

RateLinearization linearize_rates(const IbcScenario& scn, const IbcCovariances& base) {
  const int total = scn.num_users();
  const int cells = scn.num_cells();
  RateLinearization lin;
  lin.f_minus_base.resize(total);
  lin.pi.assign(total, {});
  for (int u = 0; u < total; ++u) {
    const ComplexMatrix bar = interference_cov(scn, base, u);
    lin.f_minus_base[u] = logdet_psd(bar);
    Eigen::LLT<ComplexMatrix> llt(bar);
    lin.pi[u].resize(cells);
    for (int l = 0; l < cells; ++l) {
      const ComplexMatrix& h = scn.channel[u][l];
      lin.pi[u][l] = hermitize(h.adjoint() * llt.solve(h));
    }
  }
  return lin;
}

double f_minus_linearized(const IbcScenario& scn, const RateLinearization& lin,
                          const IbcCovariances& base, const IbcCovariances& q, int user) {
  double acc = lin.f_minus_base[user];
  for (int l = 0; l < scn.num_cells(); ++l) {
    for (int j = 0; j < scn.users_per_cell[l]; ++j) {
      const int v = scn.user_index(l, j);
      if (v == user) continue;
      acc += re_inner(lin.pi[user][l], q.q[v] - base.q[v]);
    }
  }
  return acc;
}

double tilde_rate(const IbcScenario& scn, const IbcCovariances& q, const IbcCovariances& base,
                  int user) {
  const RateLinearization lin = linearize_rates(scn, base);
  return f_plus(scn, q, user) - f_minus_linearized(scn, lin, base, q, user);
}

double hat_rate(const IbcScenario& scn, const IbcCovariances& q, const ComplexMatrix& y,
                const IbcCovariances& base, int user) {
  const RateLinearization lin = linearize_rates(scn, base);
  return f_bar_plus(scn.noise[user], y) - f_minus_linearized(scn, lin, base, q, user);
}

LiftedIterate init_feasible(const IbcScenario& scn) {
  LiftedIterate w;
  const int total = scn.num_users();
  w.q.resize(total);
  for (int k = 0; k < scn.num_cells(); ++k) {
    const int t = scn.tx_antennas[k];
    const double level = scn.power[k] / (static_cast<double>(scn.users_per_cell[k]) * t);
    for (int i = 0; i < scn.users_per_cell[k]; ++i) {
      w.q[scn.user_index(k, i)] = level * ComplexMatrix::Identity(t, t);
    }
  }
  const IbcCovariances q{w.q};
  w.y.resize(total);
  double worst = std::numeric_limits<double>::infinity();
  for (int u = 0; u < total; ++u) {
    w.y[u] = total_rx_cov(scn, q, u);
    worst = std::min(worst, rate(scn, q, u) / scn.alpha[u]);
  }
  w.r = worst;
  return w;
}

IbcCovariances covariances(const LiftedIterate& w) { return IbcCovariances{w.q}; }

double lifted_infeasibility(const IbcScenario& scn, const LiftedIterate& w) {
  double worst = 0.0;
  const IbcCovariances q = covariances(w);
  for (int k = 0; k < scn.num_cells(); ++k) {
    double used = 0.0;
    for (int i = 0; i < scn.users_per_cell[k]; ++i) {
      const int u = scn.user_index(k, i);
      const EigenPair ep = herm_eig(w.q[u]);
      worst = std::max(worst, -ep.values(ep.values.size() - 1));
      used += w.q[u].trace().real();
    }
    worst = std::max(worst, used - scn.power[k]);
  }
  worst = std::max(worst, -w.r);
  for (int u = 0; u < scn.num_users(); ++u) {
    const double margin = f_bar_plus(scn.noise[u], w.y[u]) - f_minus(scn, q, u);
    worst = std::max(worst, scn.alpha[u] * w.r - margin);
    const EigenPair low = herm_eig(w.y[u]);
    worst = std::max(worst, -low.values(low.values.size() - 1));
    const EigenPair high = herm_eig(ComplexMatrix(total_rx_cov(scn, q, u) - w.y[u]));
    worst = std::max(worst, -high.values(high.values.size() - 1));
  }
  return worst;
}

double min_weighted_rate(const IbcScenario& scn, const IbcCovariances& q) {
  double worst = std::numeric_limits<double>::infinity();
  for (int u = 0; u < scn.num_users(); ++u) {
    worst = std::min(worst, rate(scn, q, u) / scn.alpha[u]);
  }
  return worst;
}

}  // namespace nova

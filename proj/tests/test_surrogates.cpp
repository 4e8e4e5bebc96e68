#include <doctest.h>

#include <cmath>
#include <vector>

#include "nova/ibc_surrogate.hpp"
#include "nova/mmf.hpp"
#include "nova/scenario.hpp"
#include "oracles.hpp"

using namespace nova;

namespace {

IbcScenario small_ibc(std::uint64_t seed) {
  IbcGenConfig cfg;
  cfg.cells = 2;
  cfg.users_per_cell = 2;
  cfg.tx_antennas = 3;
  cfg.rx_antennas = 2;
  cfg.snr_db = 10.0;
  cfg.seed = seed;
  return generate_ibc(cfg);
}

// Random covariances scaled so each cell uses a fraction of its budget.
IbcCovariances random_covs(const IbcScenario& scn, SplitRng& rng, double fill = 1.0) {
  IbcCovariances q;
  q.q.resize(scn.num_users());
  for (int c = 0; c < scn.num_cells(); ++c) {
    double tr = 0.0;
    std::vector<int> users;
    for (int i = 0; i < scn.users_per_cell[c]; ++i) users.push_back(scn.user_index(c, i));
    for (int u : users) {
      q.q[u] = oracle::random_psd(rng, scn.tx_antennas[c]);
      tr += q.q[u].trace().real();
    }
    const double scale = fill * rng.uniform() * scn.power[c] / tr;
    for (int u : users) q.q[u] *= scale;
  }
  return q;
}

double dir_diff(const std::function<double(double)>& f, double h) {
  return (f(h) - f(-h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("rate splits into its concave parts") {
  const IbcScenario scn = small_ibc(31);
  SplitRng rng(100);
  for (int trial = 0; trial < 50; ++trial) {
    const IbcCovariances q = random_covs(scn, rng);
    for (int u = 0; u < scn.num_users(); ++u) {
      CHECK(rate(scn, q, u) ==
            doctest::Approx(f_plus(scn, q, u) - f_minus(scn, q, u)).epsilon(1e-12));
    }
  }
}

TEST_CASE("rate minorant never exceeds the rate and touches it at the base") {
  const IbcScenario scn = small_ibc(32);
  SplitRng rng(101);
  const IbcCovariances base = random_covs(scn, rng);

  for (int u = 0; u < scn.num_users(); ++u) {
    CHECK(std::abs(tilde_rate(scn, base, base, u) - rate(scn, base, u)) <= 1e-10);
  }

  int points = 0;
  while (points < 1000) {
    const IbcCovariances q = random_covs(scn, rng);
    for (int u = 0; u < scn.num_users(); ++u) {
      const double gap = rate(scn, q, u) - tilde_rate(scn, q, base, u);
      CHECK(gap >= -1e-10);
      ++points;
    }
  }
}

TEST_CASE("linearized interference term dominates the concave original") {
  const IbcScenario scn = small_ibc(33);
  SplitRng rng(102);
  const IbcCovariances base = random_covs(scn, rng);
  const RateLinearization lin = linearize_rates(scn, base);

  for (int u = 0; u < scn.num_users(); ++u) {
    CHECK(std::abs(f_minus_linearized(scn, lin, base, base, u) - f_minus(scn, base, u)) <= 1e-10);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const IbcCovariances q = random_covs(scn, rng);
    for (int u = 0; u < scn.num_users(); ++u) {
      CHECK(f_minus_linearized(scn, lin, base, q, u) >= f_minus(scn, q, u) - 1e-10);
    }
  }
}

TEST_CASE("interference gradient matches finite differences") {
  const IbcScenario scn = small_ibc(34);
  SplitRng rng(103);
  const IbcCovariances base = random_covs(scn, rng);

  const double h = 1e-5;
  for (int u = 0; u < scn.num_users(); ++u) {
    for (int v = 0; v < scn.num_users(); ++v) {
      if (v == u) continue;  // own covariance does not enter the interference part
      const int bs = scn.cell_of(v);
      const ComplexMatrix g = pi_grad(scn, base, u, bs);
      for (int rep = 0; rep < 4; ++rep) {
        const ComplexMatrix dir = oracle::random_hermitian(rng, scn.tx_antennas[bs]);
        const double fd = dir_diff(
            [&](double s) {
              IbcCovariances q = base;
              q.q[v] += s * dir;
              return f_minus(scn, q, u);
            },
            h);
        const double an = re_inner(g, dir);
        CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
      }
    }
  }
}

TEST_CASE("minorant and rate share first-order behavior at the base") {
  const IbcScenario scn = small_ibc(35);
  SplitRng rng(104);
  const IbcCovariances base = random_covs(scn, rng, 0.8);

  const double h = 1e-4;
  for (int u = 0; u < scn.num_users(); ++u) {
    for (int rep = 0; rep < 6; ++rep) {
      const int v = static_cast<int>(rng.next_u64() % scn.num_users());
      const ComplexMatrix dir = oracle::random_hermitian(rng, scn.tx_antennas[scn.cell_of(v)]);
      const auto perturb = [&](double s) {
        IbcCovariances q = base;
        q.q[v] += s * dir;
        return q;
      };
      const double fd_rate = dir_diff([&](double s) { return rate(scn, perturb(s), u); }, h);
      const double fd_tilde =
          dir_diff([&](double s) { return tilde_rate(scn, perturb(s), base, u); }, h);
      CHECK(std::abs(fd_rate - fd_tilde) <= 1e-5 * std::max(1.0, std::abs(fd_rate)));
    }
  }
}

TEST_CASE("lifted minorant agrees on exact slacks and grows with them") {
  const IbcScenario scn = small_ibc(36);
  SplitRng rng(105);
  const IbcCovariances base = random_covs(scn, rng);

  for (int trial = 0; trial < 50; ++trial) {
    const IbcCovariances q = random_covs(scn, rng);
    for (int u = 0; u < scn.num_users(); ++u) {
      const ComplexMatrix y = total_rx_cov(scn, q, u);
      CHECK(hat_rate(scn, q, y, base, u) == doctest::Approx(tilde_rate(scn, q, base, u)).epsilon(1e-12));

      const ComplexMatrix bigger = y + oracle::random_psd(rng, y.rows());
      CHECK(hat_rate(scn, q, bigger, base, u) >= hat_rate(scn, q, y, base, u) - 1e-12);
      CHECK(hat_rate(scn, q, 0.5 * y, base, u) <= hat_rate(scn, q, y, base, u) + 1e-12);
    }
  }
}

TEST_CASE("slack logdet term is concave and matches a direct evaluation") {
  SplitRng rng(106);
  const double noise = 0.1;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 3);
    const ComplexMatrix y1 = oracle::random_psd(rng, n);
    const ComplexMatrix y2 = oracle::random_psd(rng, n);
    const ComplexMatrix eye = ComplexMatrix::Identity(n, n);
    CHECK(f_bar_plus(noise, y1) == doctest::Approx(logdet_psd(noise * eye + y1)).epsilon(1e-12));
    const double mid = f_bar_plus(noise, 0.5 * (y1 + y2));
    CHECK(mid >= 0.5 * (f_bar_plus(noise, y1) + f_bar_plus(noise, y2)) - 1e-10);
  }
}

TEST_CASE("bilinear bounds dominate the product and are exact at the anchor") {
  SplitRng rng(107);
  for (int trial = 0; trial < 1000; ++trial) {
    const double t0 = 0.05 + 5.0 * rng.uniform();
    const double b0 = 0.05 + 5.0 * rng.uniform();
    const double t = 0.05 + 5.0 * rng.uniform();
    const double b = 0.05 + 5.0 * rng.uniform();

    const double ratio = g_ratio_quadratic(t, b, t0, b0);
    const double square = g_square_expansion(t, b, t0, b0);
    CHECK(ratio >= t * b - 1e-10);
    CHECK(square >= t * b - 1e-10);

    CHECK(std::abs(g_ratio_quadratic(t0, b0, t0, b0) - t0 * b0) <= 1e-10 * std::max(1.0, t0 * b0));
    CHECK(std::abs(g_square_expansion(t0, b0, t0, b0) - t0 * b0) <= 1e-10 * std::max(1.0, t0 * b0));

    CHECK(bilinear_surrogate(MmfSurrogate::kRatioQuadratic, t, b, t0, b0) == ratio);
    CHECK(bilinear_surrogate(MmfSurrogate::kSquareExpansion, t, b, t0, b0) == square);
  }
}

TEST_CASE("bilinear bounds match the product to first order at the anchor") {
  SplitRng rng(108);
  const double h = 1e-5;
  for (int trial = 0; trial < 200; ++trial) {
    const double t0 = 0.1 + 3.0 * rng.uniform();
    const double b0 = 0.1 + 3.0 * rng.uniform();
    for (const MmfSurrogate kind : {MmfSurrogate::kRatioQuadratic, MmfSurrogate::kSquareExpansion}) {
      const double dt =
          dir_diff([&](double s) { return bilinear_surrogate(kind, t0 + s, b0, t0, b0); }, h);
      const double db =
          dir_diff([&](double s) { return bilinear_surrogate(kind, t0, b0 + s, t0, b0); }, h);
      CHECK(std::abs(dt - b0) <= 1e-5 * std::max(1.0, b0));
      CHECK(std::abs(db - t0) <= 1e-5 * std::max(1.0, t0));
    }
  }
}

TEST_CASE("bilinear bounds are jointly convex") {
  SplitRng rng(109);
  for (int trial = 0; trial < 500; ++trial) {
    const double t0 = 0.05 + 4.0 * rng.uniform();
    const double b0 = 0.05 + 4.0 * rng.uniform();
    const double ta = 6.0 * rng.uniform(), ba = 6.0 * rng.uniform();
    const double tb = 6.0 * rng.uniform(), bb = 6.0 * rng.uniform();
    for (const MmfSurrogate kind : {MmfSurrogate::kRatioQuadratic, MmfSurrogate::kSquareExpansion}) {
      const double mid = bilinear_surrogate(kind, 0.5 * (ta + tb), 0.5 * (ba + bb), t0, b0);
      const double avg = 0.5 * (bilinear_surrogate(kind, ta, ba, t0, b0) +
                                bilinear_surrogate(kind, tb, bb, t0, b0));
      CHECK(mid <= avg + 1e-10);
    }
  }
}

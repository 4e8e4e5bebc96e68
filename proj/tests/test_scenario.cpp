#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "nova/scenario.hpp"
#include "oracles.hpp"

using namespace nova;

namespace {

std::string temp_path(const char* stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

}  // namespace

TEST_CASE("split rng streams are reproducible and decorrelated") {
  SplitRng a(42);
  SplitRng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // A child stream does not react to draws consumed by the parent.
  SplitRng p1(7);
  SplitRng c1 = p1.split(3);
  SplitRng p2(7);
  for (int i = 0; i < 10; ++i) p2.uniform();
  SplitRng c2 = p2.split(3);
  for (int i = 0; i < 20; ++i) CHECK(c1.next_u64() == c2.next_u64());

  // Different ids give different streams, different seeds give different keys.
  SplitRng base(9);
  CHECK(base.split(0).next_u64() != base.split(1).next_u64());
  CHECK(SplitRng(1).next_u64() != SplitRng(2).next_u64());
}

TEST_CASE("rng uniform stays in range and gaussian has sane moments") {
  SplitRng rng(1234);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("ibc generation is deterministic and well formed") {
  IbcGenConfig cfg;
  cfg.cells = 3;
  cfg.users_per_cell = 2;
  cfg.tx_antennas = 3;
  cfg.rx_antennas = 2;
  cfg.snr_db = 10.0;
  cfg.seed = 99;
  const IbcScenario s1 = generate_ibc(cfg);
  const IbcScenario s2 = generate_ibc(cfg);

  REQUIRE(s1.num_cells() == 3);
  REQUIRE(s1.num_users() == 6);
  for (int u = 0; u < s1.num_users(); ++u) {
    CHECK(s1.noise[u] == doctest::Approx(std::pow(10.0, -1.0)));
    CHECK(s1.alpha[u] > 0.0);
    for (int l = 0; l < s1.num_cells(); ++l) {
      REQUIRE(s1.channel[u][l].rows() == 2);
      REQUIRE(s1.channel[u][l].cols() == 3);
      CHECK((s1.channel[u][l] - s2.channel[u][l]).norm() == 0.0);
    }
  }
  for (int k = 0; k < s1.num_cells(); ++k) CHECK(s1.power[k] == 1.0);
  CHECK_NOTHROW(s1.validate());

  cfg.seed = 100;
  const IbcScenario s3 = generate_ibc(cfg);
  CHECK((s1.channel[0][0] - s3.channel[0][0]).norm() > 0.0);
}

TEST_CASE("own-cell channels are stronger than cross links on average") {
  // Users sit within 500 m of their own transmitter but the next ring site is
  // 800 m away, so path loss separates the two populations clearly.
  IbcGenConfig cfg;
  cfg.cells = 4;
  cfg.users_per_cell = 3;
  cfg.tx_antennas = 2;
  cfg.rx_antennas = 2;
  cfg.seed = 5;
  const IbcScenario scn = generate_ibc(cfg);
  double own = 0.0;
  double cross = 0.0;
  int num_cross = 0;
  for (int u = 0; u < scn.num_users(); ++u) {
    for (int l = 0; l < scn.num_cells(); ++l) {
      if (l == scn.cell_of(u)) {
        own += scn.channel[u][l].squaredNorm();
      } else {
        cross += scn.channel[u][l].squaredNorm();
        ++num_cross;
      }
    }
  }
  CHECK(own / scn.num_users() > 10.0 * cross / num_cross);
}

TEST_CASE("ibc json round trip preserves every double") {
  IbcGenConfig cfg;
  cfg.cells = 2;
  cfg.users_per_cell = 2;
  cfg.tx_antennas = 2;
  cfg.rx_antennas = 3;
  cfg.snr_db = 17.5;
  cfg.seed = 31;
  const IbcScenario scn = generate_ibc(cfg);
  const std::string path = temp_path("nova_test_ibc_roundtrip.json");
  save_scenario(path, scn);
  CHECK(scenario_kind(path) == "ibc");
  const IbcScenario back = load_ibc_scenario(path);

  REQUIRE(back.num_users() == scn.num_users());
  for (int u = 0; u < scn.num_users(); ++u) {
    CHECK(back.noise[u] == scn.noise[u]);
    CHECK(back.alpha[u] == scn.alpha[u]);
    for (int l = 0; l < scn.num_cells(); ++l) {
      CHECK((back.channel[u][l] - scn.channel[u][l]).norm() == 0.0);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("mmf json round trip preserves every double") {
  MmfGenConfig cfg;
  cfg.groups = 3;
  cfg.users_per_group = 2;
  cfg.tx_antennas = 4;
  cfg.snr_db = 5.0;
  cfg.seed = 77;
  const MmfScenario scn = generate_mmf(cfg);
  const std::string path = temp_path("nova_test_mmf_roundtrip.json");
  save_scenario(path, scn);
  CHECK(scenario_kind(path) == "mmf");
  const MmfScenario back = load_mmf_scenario(path);

  REQUIRE(back.num_users() == scn.num_users());
  for (int u = 0; u < scn.num_users(); ++u) {
    CHECK(back.noise[u] == scn.noise[u]);
    for (int l = 0; l < scn.num_groups(); ++l) {
      CHECK((back.gram[u][l] - scn.gram[u][l]).norm() == 0.0);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("loaders name the offending field") {
  const std::string path = temp_path("nova_test_bad_scenario.json");
  {
    std::ofstream out(path);
    out << "{\"kind\":\"ibc\",\"power\":[1.0]}";
  }
  CHECK_THROWS_AS(load_ibc_scenario(path), std::runtime_error);
  CHECK_THROWS_AS(load_mmf_scenario(path), std::runtime_error);

  {
    std::ofstream out(path);
    out << "not json";
  }
  CHECK_THROWS_AS(scenario_kind(path), std::runtime_error);
  CHECK_THROWS(load_ibc_scenario(temp_path("nova_test_does_not_exist.json")));
  std::filesystem::remove(path);
}

TEST_CASE("validate rejects inconsistent scenarios") {
  IbcGenConfig cfg;
  cfg.cells = 2;
  cfg.users_per_cell = 1;
  cfg.tx_antennas = 2;
  cfg.rx_antennas = 2;
  const IbcScenario good = generate_ibc(cfg);
  CHECK_NOTHROW(good.validate());

  IbcScenario bad = good;
  bad.power[0] = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = good;
  bad.alpha[1] = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  bad = good;
  bad.channel[0][1] = ComplexMatrix::Zero(3, 2);  // wrong rx dimension for user 0
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);

  MmfGenConfig mcfg;
  mcfg.groups = 2;
  mcfg.users_per_group = 1;
  mcfg.tx_antennas = 2;
  const MmfScenario mgood = generate_mmf(mcfg);
  CHECK_NOTHROW(mgood.validate());
  MmfScenario mbad = mgood;
  mbad.gram[0][0](0, 1) += std::complex<double>(0.5, 0.0);  // breaks hermitian symmetry
  CHECK_THROWS_AS(mbad.validate(), std::runtime_error);
}

TEST_CASE("rate identities under random covariances") {
  IbcGenConfig cfg;
  cfg.cells = 2;
  cfg.users_per_cell = 2;
  cfg.tx_antennas = 2;
  cfg.rx_antennas = 2;
  cfg.seed = 8;
  const IbcScenario scn = generate_ibc(cfg);
  SplitRng rng(21);

  IbcCovariances q;
  for (int u = 0; u < scn.num_users(); ++u) q.q.push_back(oracle::random_psd(rng, 2, 0.2));

  for (int u = 0; u < scn.num_users(); ++u) {
    // total = interference + own signal contribution
    const ComplexMatrix own = scn.channel[u][scn.cell_of(u)] * q.q[u] *
                              scn.channel[u][scn.cell_of(u)].adjoint();
    CHECK((total_rx_cov(scn, q, u) - interference_cov(scn, q, u) + scn.noise[u] * ComplexMatrix::Identity(2, 2) - own).norm() <
          1e-12);

    // rate = logdet(noise + total) - logdet(interference), directly from the
    // two covariances
    const double direct =
        logdet_psd(scn.noise[u] * ComplexMatrix::Identity(2, 2) + total_rx_cov(scn, q, u)) -
        logdet_psd(interference_cov(scn, q, u));
    CHECK(rate(scn, q, u) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(rate(scn, q, u) >= 0.0);
  }
}

TEST_CASE("mmf sinr matches its quadratic form definition") {
  MmfGenConfig cfg;
  cfg.groups = 2;
  cfg.users_per_group = 2;
  cfg.tx_antennas = 3;
  cfg.seed = 6;
  const MmfScenario scn = generate_mmf(cfg);
  SplitRng rng(22);
  std::vector<ComplexVector> w;
  for (int k = 0; k < scn.num_groups(); ++k) w.push_back(oracle::random_cvector(rng, 3, 0.5));

  double min_sinr = 1e300;
  for (int u = 0; u < scn.num_users(); ++u) {
    const int k = scn.group_of(u);
    const double sig = (w[k].adjoint() * scn.gram[u][k] * w[k]).value().real();
    double denom = scn.noise[u];
    for (int l = 0; l < scn.num_groups(); ++l) {
      if (l != k) denom += (w[l].adjoint() * scn.gram[u][l] * w[l]).value().real();
    }
    CHECK(mmf_interference(scn, w, u) == doctest::Approx(denom).epsilon(1e-12));
    CHECK(mmf_sinr(scn, w, u) == doctest::Approx(sig / denom).epsilon(1e-12));
    min_sinr = std::min(min_sinr, sig / denom);
  }
  CHECK(mmf_utility(scn, w) == doctest::Approx(min_sinr).epsilon(1e-12));
}

TEST_CASE("beta_max bounds the interference any feasible beamformers can cause") {
  MmfGenConfig cfg;
  cfg.groups = 3;
  cfg.users_per_group = 2;
  cfg.tx_antennas = 3;
  cfg.seed = 15;
  const MmfScenario scn = generate_mmf(cfg);
  SplitRng rng(23);

  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ComplexVector> w;
    for (int k = 0; k < scn.num_groups(); ++k) {
      ComplexVector v = oracle::random_cvector(rng, 3);
      v *= std::sqrt(scn.power[k] * rng.uniform()) / v.norm();  // any power below budget
      w.push_back(v);
    }
    for (int u = 0; u < scn.num_users(); ++u) {
      CHECK(mmf_interference(scn, w, u) <= scn.beta_max(u) * (1.0 + 1e-12));
    }
  }
}

#pragma once

// Problem data for the two solver families:
//  - IbcScenario: multi-cell downlink with MIMO links; each cell k has a
//    transmit covariance per served user and a sum power budget P_k.
//  - MmfScenario: one multicast group per transmitter; each user is described
//    by the Gram matrix of its channel from every transmitter.
// Scenarios are generated with a simple ring-of-cells geometry and
// log-distance path loss, or loaded/saved as JSON.

#include "nova/hermitian.hpp"
#include "nova/rng.hpp"

#include <string>
#include <vector>

namespace nova {

struct IbcScenario {
  std::vector<int> tx_antennas;     // per cell
  std::vector<int> users_per_cell;  // per cell
  std::vector<double> power;        // per cell
  std::vector<double> noise;        // per user, flat order (cell-major)
  std::vector<double> alpha;        // per user: rate-profile weights, > 0
  // channel[u][l]: matrix from transmitter l to user u, rx_antennas(u) x tx_antennas[l]
  std::vector<std::vector<ComplexMatrix>> channel;

  int num_cells() const { return static_cast<int>(tx_antennas.size()); }
  int num_users() const { return static_cast<int>(noise.size()); }
  int user_index(int cell, int i) const;
  int cell_of(int user) const;
  int rx_antennas(int user) const { return static_cast<int>(channel[user][0].rows()); }

  void validate() const;  // throws std::runtime_error naming the offending field
};

// Transmit covariances, one PSD matrix per user (dimension = own cell's
// tx antenna count).
struct IbcCovariances {
  std::vector<ComplexMatrix> q;
};

struct MmfScenario {
  std::vector<int> tx_antennas;      // per transmitter
  std::vector<int> users_per_group;  // per transmitter (one group each)
  std::vector<double> power;         // per transmitter
  std::vector<double> noise;         // per user, flat order (group-major)
  // gram[u][l]: PSD Gram matrix of the channel from transmitter l to user u
  std::vector<std::vector<ComplexMatrix>> gram;

  int num_groups() const { return static_cast<int>(tx_antennas.size()); }
  int num_users() const { return static_cast<int>(noise.size()); }
  int user_index(int group, int i) const;
  int group_of(int user) const;

  // Upper bound on any user's interference-plus-noise level, derived from the
  // channel norms and the total power budget.
  double beta_max(int user) const;

  void validate() const;
};

struct IbcGenConfig {
  int cells = 1;
  int users_per_cell = 1;
  int tx_antennas = 1;
  int rx_antennas = 1;
  double snr_db = 10.0;
  std::uint64_t seed = 0;
};

struct MmfGenConfig {
  int groups = 1;
  int users_per_group = 1;
  int tx_antennas = 1;
  double snr_db = 10.0;
  std::uint64_t seed = 0;
};

// Random scenario with BSs on a ring (spacing 800 m), users dropped uniformly
// in a [50 m, 500 m] annulus around their BS, and log-distance path loss
// (d/50)^-3.76. Per-transmitter power is 1 and noise = 10^(-snr_db/10), so
// power / noise equals the requested SNR exactly.
IbcScenario generate_ibc(const IbcGenConfig& cfg);
MmfScenario generate_mmf(const MmfGenConfig& cfg);

// Interference-plus-noise covariance seen by `user` (own-cell signal of that
// user excluded; everything else included).
ComplexMatrix interference_cov(const IbcScenario& scn, const IbcCovariances& q, int user);

// Covariance of everything received by `user`, own signal included.
ComplexMatrix total_rx_cov(const IbcScenario& scn, const IbcCovariances& q, int user);

// Achievable rate of `user` under covariances q (natural log units).
double rate(const IbcScenario& scn, const IbcCovariances& q, int user);

// Per-user SINR and the min-SINR objective for multicast beamformers w
// (w[k] has tx_antennas[k] entries).
double mmf_sinr(const MmfScenario& scn, const std::vector<ComplexVector>& w, int user);
double mmf_interference(const MmfScenario& scn, const std::vector<ComplexVector>& w, int user);
double mmf_utility(const MmfScenario& scn, const std::vector<ComplexVector>& w);

// JSON (de)serialization. Exactly one of the outputs is non-null depending on
// the file's "kind" field. Throws std::runtime_error with the offending field
// named on malformed input.
void save_scenario(const std::string& path, const IbcScenario& scn);
void save_scenario(const std::string& path, const MmfScenario& scn);
std::string scenario_kind(const std::string& path);  // "ibc" or "mmf"
IbcScenario load_ibc_scenario(const std::string& path);
MmfScenario load_mmf_scenario(const std::string& path);

}  // namespace nova

#include "nova/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace nova {
namespace {

using nlohmann::json;

constexpr double kPathLossRefDist = 50.0;   // meters
constexpr double kPathLossExp = 3.76;
constexpr double kCellRadius = 500.0;       // meters
constexpr double kMinUserDist = 50.0;       // meters
constexpr double kBsSpacing = 800.0;        // meters, adjacent ring chord

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double path_loss(double d) { return std::pow(d / kPathLossRefDist, -kPathLossExp); }

std::vector<Point> bs_ring(int k) {
  std::vector<Point> pos(k);
  if (k == 1) return pos;
  const double radius = 0.5 * kBsSpacing / std::sin(std::numbers::pi / k);
  for (int i = 0; i < k; ++i) {
    const double ang = 2.0 * std::numbers::pi * i / k;
    pos[i] = {radius * std::cos(ang), radius * std::sin(ang)};
  }
  return pos;
}

Point drop_user(const Point& bs, SplitRng& rng) {
  const double lo2 = kMinUserDist * kMinUserDist;
  const double hi2 = kCellRadius * kCellRadius;
  const double r = std::sqrt(lo2 + (hi2 - lo2) * rng.uniform());
  const double ang = 2.0 * std::numbers::pi * rng.uniform();
  return {bs.x + r * std::cos(ang), bs.y + r * std::sin(ang)};
}

ComplexMatrix rayleigh_channel(int rows, int cols, double pl, SplitRng& rng) {
  const double scale = std::sqrt(pl / 2.0);
  ComplexMatrix h(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      h(r, c) = std::complex<double>(scale * rng.gaussian(), scale * rng.gaussian());
    }
  }
  return h;
}

int checked_int(const json& j, const std::string& field, int min_value) {
  if (!j.is_number_integer()) throw std::runtime_error("scenario JSON: " + field + " must be an integer");
  const int v = j.get<int>();
  if (v < min_value) throw std::runtime_error("scenario JSON: " + field + " out of range");
  return v;
}

std::vector<double> checked_doubles(const json& j, const std::string& field, std::size_t n) {
  if (!j.is_array() || j.size() != n) {
    throw std::runtime_error("scenario JSON: " + field + " must be an array of length " +
                             std::to_string(n));
  }
  std::vector<double> out;
  out.reserve(n);
  for (const auto& v : j) {
    if (!v.is_number()) throw std::runtime_error("scenario JSON: " + field + " must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

json matrix_part(const ComplexMatrix& m, bool real_part) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(real_part ? m(r, c).real() : m(r, c).imag());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ComplexMatrix parse_matrix(const json& re, const json& im, int rows, int cols,
                           const std::string& field) {
  auto check = [&](const json& part, const char* name) {
    if (!part.is_array() || static_cast<int>(part.size()) != rows) {
      throw std::runtime_error("scenario JSON: " + field + "." + name + " must have " +
                               std::to_string(rows) + " rows");
    }
    for (const auto& row : part) {
      if (!row.is_array() || static_cast<int>(row.size()) != cols) {
        throw std::runtime_error("scenario JSON: " + field + "." + name + " must have " +
                                 std::to_string(cols) + " columns");
      }
    }
  };
  check(re, "re");
  check(im, "im");
  ComplexMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m(r, c) = std::complex<double>(re[r][c].get<double>(), im[r][c].get<double>());
    }
  }
  return m;
}

std::pair<int, int> parse_user_id(const std::string& id) {
  const auto sep = id.find(':');
  if (sep == std::string::npos) {
    throw std::runtime_error("scenario JSON: channels[].user must look like \"<cell>:<index>\"");
  }
  try {
    return {std::stoi(id.substr(0, sep)), std::stoi(id.substr(sep + 1))};
  } catch (const std::exception&) {
    throw std::runtime_error("scenario JSON: channels[].user must look like \"<cell>:<index>\"");
  }
}

std::string user_id(int cell, int i) { return std::to_string(cell) + ":" + std::to_string(i); }

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("scenario JSON parse error in " + path + ": " + e.what());
  }
  return j;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  out << j.dump(2) << '\n';
}

int flat_index(const std::vector<int>& per_group, int group, int i, const char* what) {
  if (group < 0 || group >= static_cast<int>(per_group.size()) || i < 0 || i >= per_group[group]) {
    throw std::runtime_error(std::string("scenario JSON: channels[].user references unknown ") + what);
  }
  int base = 0;
  for (int g = 0; g < group; ++g) base += per_group[g];
  return base + i;
}

}  // namespace

int IbcScenario::user_index(int cell, int i) const {
  int base = 0;
  for (int k = 0; k < cell; ++k) base += users_per_cell[k];
  return base + i;
}

int IbcScenario::cell_of(int user) const {
  int k = 0;
  while (user >= users_per_cell[k]) user -= users_per_cell[k++];
  return k;
}

void IbcScenario::validate() const {
  const int cells = num_cells();
  if (cells == 0) throw std::runtime_error("scenario: cells must be nonempty");
  if (static_cast<int>(users_per_cell.size()) != cells ||
      static_cast<int>(power.size()) != cells) {
    throw std::runtime_error("scenario: users_per_cell/power must match cell count");
  }
  int total = 0;
  for (int k = 0; k < cells; ++k) {
    if (tx_antennas[k] <= 0) throw std::runtime_error("scenario: tx_antennas must be positive");
    if (users_per_cell[k] <= 0) throw std::runtime_error("scenario: users_per_cell must be positive");
    if (power[k] <= 0) throw std::runtime_error("scenario: power must be positive");
    total += users_per_cell[k];
  }
  if (static_cast<int>(noise.size()) != total || static_cast<int>(alpha.size()) != total ||
      static_cast<int>(channel.size()) != total) {
    throw std::runtime_error("scenario: noise/alpha/channel must have one entry per user");
  }
  for (int u = 0; u < total; ++u) {
    if (noise[u] <= 0) throw std::runtime_error("scenario: noise must be positive");
    if (alpha[u] <= 0) throw std::runtime_error("scenario: alpha must be positive");
    if (static_cast<int>(channel[u].size()) != cells) {
      throw std::runtime_error("scenario: channel[u] must have one matrix per cell");
    }
    const Eigen::Index m = channel[u][0].rows();
    for (int l = 0; l < cells; ++l) {
      if (channel[u][l].rows() != m || channel[u][l].cols() != tx_antennas[l]) {
        throw std::runtime_error("scenario: channel dimension mismatch at user " +
                                 std::to_string(u) + ", cell " + std::to_string(l));
      }
    }
  }
}

int MmfScenario::user_index(int group, int i) const {
  int base = 0;
  for (int g = 0; g < group; ++g) base += users_per_group[g];
  return base + i;
}

int MmfScenario::group_of(int user) const {
  int g = 0;
  while (user >= users_per_group[g]) user -= users_per_group[g++];
  return g;
}

double MmfScenario::beta_max(int user) const {
  double peak = 0.0;
  for (int l = 0; l < num_groups(); ++l) {
    peak = std::max(peak, gram[user][l].norm());
  }
  double total_power = 0.0;
  for (double p : power) total_power += p;
  return peak * total_power + noise[user];
}

void MmfScenario::validate() const {
  const int groups = num_groups();
  if (groups == 0) throw std::runtime_error("scenario: groups must be nonempty");
  if (static_cast<int>(users_per_group.size()) != groups ||
      static_cast<int>(power.size()) != groups) {
    throw std::runtime_error("scenario: users_per_group/power must match group count");
  }
  int total = 0;
  for (int g = 0; g < groups; ++g) {
    if (tx_antennas[g] <= 0) throw std::runtime_error("scenario: tx_antennas must be positive");
    if (users_per_group[g] <= 0) throw std::runtime_error("scenario: users_per_group must be positive");
    if (power[g] <= 0) throw std::runtime_error("scenario: power must be positive");
    total += users_per_group[g];
  }
  if (static_cast<int>(noise.size()) != total || static_cast<int>(gram.size()) != total) {
    throw std::runtime_error("scenario: noise/gram must have one entry per user");
  }
  for (int u = 0; u < total; ++u) {
    if (noise[u] <= 0) throw std::runtime_error("scenario: noise must be positive");
    if (static_cast<int>(gram[u].size()) != groups) {
      throw std::runtime_error("scenario: gram[u] must have one matrix per transmitter");
    }
    for (int l = 0; l < groups; ++l) {
      const ComplexMatrix& g = gram[u][l];
      if (g.rows() != tx_antennas[l] || g.cols() != tx_antennas[l]) {
        throw std::runtime_error("scenario: gram dimension mismatch at user " + std::to_string(u) +
                                 ", transmitter " + std::to_string(l));
      }
      if ((g - g.adjoint()).cwiseAbs().maxCoeff() > 1e-8) {
        throw std::runtime_error("scenario: gram matrix not Hermitian at user " + std::to_string(u));
      }
      const EigenPair ep = herm_eig(g);
      if (ep.values(ep.values.size() - 1) < -1e-8) {
        throw std::runtime_error("scenario: gram matrix not PSD at user " + std::to_string(u));
      }
    }
  }
}

IbcScenario generate_ibc(const IbcGenConfig& cfg) {
  if (cfg.cells < 1 || cfg.users_per_cell < 1 || cfg.tx_antennas < 1 || cfg.rx_antennas < 1) {
    throw std::invalid_argument("generate_ibc: all sizes must be at least 1");
  }
  IbcScenario scn;
  scn.tx_antennas.assign(cfg.cells, cfg.tx_antennas);
  scn.users_per_cell.assign(cfg.cells, cfg.users_per_cell);
  scn.power.assign(cfg.cells, 1.0);
  const int total = cfg.cells * cfg.users_per_cell;
  const double noise = 1.0 / std::pow(10.0, cfg.snr_db / 10.0);
  scn.noise.assign(total, noise);
  scn.alpha.assign(total, 1.0);

  SplitRng root(cfg.seed);
  SplitRng geom = root.split(0);
  const std::vector<Point> bs = bs_ring(cfg.cells);
  std::vector<Point> users(total);
  for (int k = 0, u = 0; k < cfg.cells; ++k) {
    for (int i = 0; i < cfg.users_per_cell; ++i, ++u) {
      users[u] = drop_user(bs[k], geom);
    }
  }
  scn.channel.resize(total);
  for (int u = 0; u < total; ++u) {
    scn.channel[u].resize(cfg.cells);
    for (int l = 0; l < cfg.cells; ++l) {
      SplitRng ch = root.split(1 + static_cast<std::uint64_t>(u) * cfg.cells + l);
      scn.channel[u][l] =
          rayleigh_channel(cfg.rx_antennas, cfg.tx_antennas, path_loss(dist(users[u], bs[l])), ch);
    }
  }
  scn.validate();
  return scn;
}

MmfScenario generate_mmf(const MmfGenConfig& cfg) {
  if (cfg.groups < 1 || cfg.users_per_group < 1 || cfg.tx_antennas < 1) {
    throw std::invalid_argument("generate_mmf: all sizes must be at least 1");
  }
  MmfScenario scn;
  scn.tx_antennas.assign(cfg.groups, cfg.tx_antennas);
  scn.users_per_group.assign(cfg.groups, cfg.users_per_group);
  scn.power.assign(cfg.groups, 1.0);
  const int total = cfg.groups * cfg.users_per_group;
  const double noise = 1.0 / std::pow(10.0, cfg.snr_db / 10.0);
  scn.noise.assign(total, noise);

  SplitRng root(cfg.seed);
  SplitRng geom = root.split(0);
  const std::vector<Point> bs = bs_ring(cfg.groups);
  std::vector<Point> users(total);
  for (int g = 0, u = 0; g < cfg.groups; ++g) {
    for (int i = 0; i < cfg.users_per_group; ++i, ++u) {
      users[u] = drop_user(bs[g], geom);
    }
  }
  scn.gram.resize(total);
  for (int u = 0; u < total; ++u) {
    scn.gram[u].resize(cfg.groups);
    for (int l = 0; l < cfg.groups; ++l) {
      SplitRng ch = root.split(1 + static_cast<std::uint64_t>(u) * cfg.groups + l);
      const ComplexMatrix h =
          rayleigh_channel(cfg.tx_antennas, 1, path_loss(dist(users[u], bs[l])), ch);
      scn.gram[u][l] = h * h.adjoint();
    }
  }
  scn.validate();
  return scn;
}

ComplexMatrix interference_cov(const IbcScenario& scn, const IbcCovariances& q, int user) {
  const int m = scn.rx_antennas(user);
  ComplexMatrix cov = scn.noise[user] * ComplexMatrix::Identity(m, m);
  for (int l = 0; l < scn.num_cells(); ++l) {
    const ComplexMatrix& h = scn.channel[user][l];
    for (int j = 0; j < scn.users_per_cell[l]; ++j) {
      const int v = scn.user_index(l, j);
      if (v == user) continue;
      cov += h * q.q[v] * h.adjoint();
    }
  }
  return hermitize(cov);
}

ComplexMatrix total_rx_cov(const IbcScenario& scn, const IbcCovariances& q, int user) {
  const int m = scn.rx_antennas(user);
  ComplexMatrix cov = ComplexMatrix::Zero(m, m);
  for (int l = 0; l < scn.num_cells(); ++l) {
    const ComplexMatrix& h = scn.channel[user][l];
    for (int j = 0; j < scn.users_per_cell[l]; ++j) {
      cov += h * q.q[scn.user_index(l, j)] * h.adjoint();
    }
  }
  return hermitize(cov);
}

double rate(const IbcScenario& scn, const IbcCovariances& q, int user) {
  const ComplexMatrix bar = interference_cov(scn, q, user);
  const int k = scn.cell_of(user);
  const ComplexMatrix& h = scn.channel[user][k];
  return logdet_psd(bar + h * q.q[user] * h.adjoint()) - logdet_psd(bar);
}

double mmf_interference(const MmfScenario& scn, const std::vector<ComplexVector>& w, int user) {
  const int k = scn.group_of(user);
  double acc = scn.noise[user];
  for (int l = 0; l < scn.num_groups(); ++l) {
    if (l == k) continue;
    acc += (w[l].adjoint() * scn.gram[user][l] * w[l]).value().real();
  }
  return acc;
}

double mmf_sinr(const MmfScenario& scn, const std::vector<ComplexVector>& w, int user) {
  const int k = scn.group_of(user);
  const double sig = (w[k].adjoint() * scn.gram[user][k] * w[k]).value().real();
  return sig / mmf_interference(scn, w, user);
}

double mmf_utility(const MmfScenario& scn, const std::vector<ComplexVector>& w) {
  double best = std::numeric_limits<double>::infinity();
  for (int u = 0; u < scn.num_users(); ++u) {
    best = std::min(best, mmf_sinr(scn, w, u));
  }
  return best;
}

void save_scenario(const std::string& path, const IbcScenario& scn) {
  scn.validate();
  json j;
  j["kind"] = "ibc";
  json cells = json::array();
  for (int k = 0; k < scn.num_cells(); ++k) {
    cells.push_back({{"tx_antennas", scn.tx_antennas[k]}, {"users", scn.users_per_cell[k]}});
  }
  j["cells"] = std::move(cells);
  json channels = json::array();
  for (int k = 0; k < scn.num_cells(); ++k) {
    for (int i = 0; i < scn.users_per_cell[k]; ++i) {
      const int u = scn.user_index(k, i);
      for (int l = 0; l < scn.num_cells(); ++l) {
        channels.push_back({{"user", user_id(k, i)},
                            {"bs", l},
                            {"re", matrix_part(scn.channel[u][l], true)},
                            {"im", matrix_part(scn.channel[u][l], false)}});
      }
    }
  }
  j["channels"] = std::move(channels);
  j["noise"] = scn.noise;
  j["power"] = scn.power;
  j["alpha"] = scn.alpha;
  write_json(path, j);
}

void save_scenario(const std::string& path, const MmfScenario& scn) {
  scn.validate();
  json j;
  j["kind"] = "mmf";
  json cells = json::array();
  for (int g = 0; g < scn.num_groups(); ++g) {
    cells.push_back({{"tx_antennas", scn.tx_antennas[g]}, {"users", scn.users_per_group[g]}});
  }
  j["cells"] = std::move(cells);
  json channels = json::array();
  for (int g = 0; g < scn.num_groups(); ++g) {
    for (int i = 0; i < scn.users_per_group[g]; ++i) {
      const int u = scn.user_index(g, i);
      for (int l = 0; l < scn.num_groups(); ++l) {
        channels.push_back({{"user", user_id(g, i)},
                            {"bs", l},
                            {"re", matrix_part(scn.gram[u][l], true)},
                            {"im", matrix_part(scn.gram[u][l], false)}});
      }
    }
  }
  j["channels"] = std::move(channels);
  j["noise"] = scn.noise;
  j["power"] = scn.power;
  j["alpha"] = json::array();
  write_json(path, j);
}

std::string scenario_kind(const std::string& path) {
  const json j = load_json(path);
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    throw std::runtime_error("scenario JSON: missing string field kind");
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "ibc" && kind != "mmf") {
    throw std::runtime_error("scenario JSON: kind must be \"ibc\" or \"mmf\"");
  }
  return kind;
}

namespace {

// Shared shape handling for both kinds; fills dims, power/noise/alpha and the
// per-(user, transmitter) matrix grid.
struct ParsedCommon {
  std::vector<int> tx;
  std::vector<int> users;
  std::vector<double> power, noise, alpha;
  std::vector<std::vector<ComplexMatrix>> mats;
};

ParsedCommon parse_common(const json& j, bool square_matrices) {
  ParsedCommon out;
  if (!j.contains("cells") || !j.at("cells").is_array() || j.at("cells").empty()) {
    throw std::runtime_error("scenario JSON: cells must be a nonempty array");
  }
  for (std::size_t k = 0; k < j.at("cells").size(); ++k) {
    const json& c = j.at("cells")[k];
    const std::string base = "cells[" + std::to_string(k) + "]";
    if (!c.is_object()) throw std::runtime_error("scenario JSON: " + base + " must be an object");
    out.tx.push_back(checked_int(c.value("tx_antennas", json()), base + ".tx_antennas", 1));
    out.users.push_back(checked_int(c.value("users", json()), base + ".users", 1));
  }
  const int cells = static_cast<int>(out.tx.size());
  int total = 0;
  for (int v : out.users) total += v;
  out.power = checked_doubles(j.value("power", json()), "power", cells);
  out.noise = checked_doubles(j.value("noise", json()), "noise", total);
  if (j.contains("alpha") && j.at("alpha").is_array() && !j.at("alpha").empty()) {
    out.alpha = checked_doubles(j.at("alpha"), "alpha", total);
  }

  if (!j.contains("channels") || !j.at("channels").is_array()) {
    throw std::runtime_error("scenario JSON: channels must be an array");
  }
  out.mats.assign(total, std::vector<ComplexMatrix>(cells));
  std::vector<std::vector<bool>> seen(total, std::vector<bool>(cells, false));
  std::vector<int> rx(total, -1);
  for (std::size_t n = 0; n < j.at("channels").size(); ++n) {
    const json& e = j.at("channels")[n];
    const std::string base = "channels[" + std::to_string(n) + "]";
    if (!e.is_object() || !e.contains("user") || !e.at("user").is_string()) {
      throw std::runtime_error("scenario JSON: " + base + ".user must be a string");
    }
    const auto [cell, idx] = parse_user_id(e.at("user").get<std::string>());
    const int u = flat_index(out.users, cell, idx, "user");
    const int bs = checked_int(e.value("bs", json()), base + ".bs", 0);
    if (bs >= cells) throw std::runtime_error("scenario JSON: " + base + ".bs out of range");
    if (seen[u][bs]) throw std::runtime_error("scenario JSON: duplicate channel entry at " + base);
    int rows;
    if (square_matrices) {
      rows = out.tx[bs];
    } else {
      if (rx[u] < 0) {
        // Row count of the first entry for this user fixes its antenna count.
        const json& re = e.value("re", json());
        if (!re.is_array() || re.empty()) {
          throw std::runtime_error("scenario JSON: " + base + ".re must be a nonempty array");
        }
        rx[u] = static_cast<int>(re.size());
      }
      rows = rx[u];
    }
    out.mats[u][bs] = parse_matrix(e.value("re", json()), e.value("im", json()), rows, out.tx[bs], base);
    seen[u][bs] = true;
  }
  for (int u = 0; u < total; ++u) {
    for (int l = 0; l < cells; ++l) {
      if (!seen[u][l]) {
        throw std::runtime_error("scenario JSON: channels missing entry for user " +
                                 std::to_string(u) + ", bs " + std::to_string(l));
      }
    }
  }
  return out;
}

}  // namespace

IbcScenario load_ibc_scenario(const std::string& path) {
  const json j = load_json(path);
  if (scenario_kind(path) != "ibc") throw std::runtime_error("scenario JSON: kind is not ibc");
  ParsedCommon p = parse_common(j, false);
  IbcScenario scn;
  scn.tx_antennas = std::move(p.tx);
  scn.users_per_cell = std::move(p.users);
  scn.power = std::move(p.power);
  scn.noise = std::move(p.noise);
  scn.alpha = p.alpha.empty() ? std::vector<double>(scn.noise.size(), 1.0) : std::move(p.alpha);
  scn.channel = std::move(p.mats);
  scn.validate();
  return scn;
}

MmfScenario load_mmf_scenario(const std::string& path) {
  const json j = load_json(path);
  if (scenario_kind(path) != "mmf") throw std::runtime_error("scenario JSON: kind is not mmf");
  ParsedCommon p = parse_common(j, true);
  MmfScenario scn;
  scn.tx_antennas = std::move(p.tx);
  scn.users_per_group = std::move(p.users);
  scn.power = std::move(p.power);
  scn.noise = std::move(p.noise);
  scn.gram = std::move(p.mats);
  scn.validate();
  return scn;
}

}  // namespace nova

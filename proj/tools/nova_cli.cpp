// Command line front end: scenario generation, single solves with trace and
// certificate output, and seeded SNR sweeps with aggregate statistics.
//
// Exit codes: 0 success, 2 validation error, 3 solver non-convergence or
// runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nova/distsim.hpp"
#include "nova/ibc_nova.hpp"
#include "nova/mmf.hpp"
#include "nova/scenario.hpp"
#include "nova/trace.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct GenArgs {
  std::string kind = "ibc";
  std::string preset;
  int cells = 2;
  int users = 2;
  int tx = 2;
  int rx = 2;
  double snr_db = 10.0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen(GenArgs a) {
  if (a.preset == "paper-ibc") {
    a.kind = "ibc";
    a.cells = 4;
    a.users = 3;
    a.tx = 4;
    a.rx = 4;
  } else if (a.preset == "paper-mmf-dist") {
    a.kind = "mmf";
    a.cells = 4;
    a.users = 3;
    a.tx = 4;
  } else if (!a.preset.empty()) {
    std::fprintf(stderr, "unknown preset: %s\n", a.preset.c_str());
    return kExitValidation;
  }

  if (a.kind == "ibc") {
    nova::IbcGenConfig cfg;
    cfg.cells = a.cells;
    cfg.users_per_cell = a.users;
    cfg.tx_antennas = a.tx;
    cfg.rx_antennas = a.rx;
    cfg.snr_db = a.snr_db;
    cfg.seed = a.seed;
    const nova::IbcScenario scn = nova::generate_ibc(cfg);
    nova::save_scenario(a.out, scn);
  } else if (a.kind == "mmf") {
    nova::MmfGenConfig cfg;
    cfg.groups = a.cells;
    cfg.users_per_group = a.users;
    cfg.tx_antennas = a.tx;
    cfg.snr_db = a.snr_db;
    cfg.seed = a.seed;
    const nova::MmfScenario scn = nova::generate_mmf(cfg);
    nova::save_scenario(a.out, scn);
  } else {
    std::fprintf(stderr, "kind must be ibc or mmf\n");
    return kExitValidation;
  }
  std::printf("wrote %s\n", a.out.c_str());
  return kExitOk;
}

struct SolveArgs {
  std::string scenario;
  std::string mode = "centralized";
  std::string dual = "newton";
  std::string surrogate = "nova1";
  double tol = 1e-3;
  double tol_kkt = 0.0;
  double prox = 0.0;  // 0 keeps the per-problem default weights
  int max_iter = 0;   // 0 keeps the per-problem default
  double inner_tol = 0.0;
  int inner_max = 0;
  std::string out;
  bool timing = false;
  bool track_kkt = false;
  std::string message_log;
  double drop_prob = 0.0;
  std::uint64_t fault_seed = 0;
};

nlohmann::json kkt_json(double residual, double stationarity, double complementarity,
                        double feasibility, bool degenerate) {
  return nlohmann::json{{"residual", residual},
                        {"stationarity", stationarity},
                        {"complementarity", complementarity},
                        {"feasibility", feasibility},
                        {"degenerate", degenerate}};
}

nlohmann::json protocol_json(const nova::ProtocolStats& st) {
  return nlohmann::json{{"messages", st.messages},
                        {"rounds", st.rounds},
                        {"payload_doubles", st.payload_doubles},
                        {"retransmissions", st.retransmissions}};
}

int cmd_solve(const SolveArgs& a) {
  if (a.mode != "centralized" && a.mode != "distributed") {
    std::fprintf(stderr, "mode must be centralized or distributed\n");
    return kExitValidation;
  }
  if (a.dual != "newton" && a.dual != "first-order") {
    std::fprintf(stderr, "dual must be newton or first-order\n");
    return kExitValidation;
  }
  if (a.surrogate != "nova1" && a.surrogate != "nova2") {
    std::fprintf(stderr, "surrogate must be nova1 or nova2\n");
    return kExitValidation;
  }

  const std::string kind = nova::scenario_kind(a.scenario);
  const bool distributed = a.mode == "distributed";
  nova::ProtocolOptions popts;
  popts.drop_probability = a.drop_prob;
  popts.fault_seed = a.fault_seed;
  popts.log_path = a.message_log;

  nlohmann::json solution;
  solution["kind"] = kind;
  solution["mode"] = a.mode;
  solution["dual"] = a.dual;

  if (kind == "ibc") {
    const nova::IbcScenario scn = nova::load_ibc_scenario(a.scenario);
    const nova::DualMethod method =
        a.dual == "newton" ? nova::DualMethod::kNewton : nova::DualMethod::kFirstOrder;
    nova::OuterOptions opts = nova::OuterOptions::defaults(method);
    opts.tol_obj = a.tol;
    opts.tol_kkt = a.tol_kkt;
    if (a.prox > 0.0) opts.prox = {a.prox, a.prox, a.prox};
    if (a.max_iter > 0) opts.max_outer = a.max_iter;
    if (a.inner_tol > 0.0) opts.inner.tol = a.inner_tol;
    if (a.inner_max > 0) opts.inner.max_iters = a.inner_max;
    opts.timing = a.timing;
    opts.track_kkt = a.track_kkt;

    nova::IbcSolveResult res;
    nova::ProtocolStats stats;
    if (distributed) {
      nova::DistributedIbcResult dist = nova::run_distributed_ibc(scn, opts, popts);
      res = std::move(dist.solve);
      stats = dist.stats;
    } else {
      res = nova::solve_ibc(scn, opts);
    }

    const nova::IbcCovariances q = nova::covariances(res.iterate);
    nlohmann::json rates = nlohmann::json::array();
    for (int u = 0; u < scn.num_users(); ++u) rates.push_back(nova::rate(scn, q, u));
    solution["objective"] = res.objective;
    solution["rates"] = rates;
    solution["rate_profile"] = scn.alpha;
    solution["outer_iters"] = res.outer_iters;
    solution["converged"] = res.converged;

    nova::write_trace_csv(a.out + ".trace.csv", res.trace);
    write_json(a.out + ".solution.json", solution);
    write_json(a.out + ".kkt.json",
               kkt_json(res.kkt.residual, res.kkt.stationarity, res.kkt.complementarity,
                        res.kkt.feasibility, res.kkt.degenerate));
    if (distributed) write_json(a.out + ".protocol.json", protocol_json(stats));

    std::printf("objective %s after %d outer iterations (%s)\n", format_g(res.objective).c_str(),
                res.outer_iters, res.converged ? "converged" : "not converged");
    return res.converged ? kExitOk : kExitSolver;
  }

  const nova::MmfScenario scn = nova::load_mmf_scenario(a.scenario);
  nova::MmfOuterOptions opts;
  opts.surrogate = a.surrogate == "nova1" ? nova::MmfSurrogate::kRatioQuadratic
                                          : nova::MmfSurrogate::kSquareExpansion;
  opts.method =
      a.dual == "newton" ? nova::MmfDualMethod::kNewton : nova::MmfDualMethod::kFirstOrder;
  opts.tol_obj = a.tol;
  opts.tol_kkt = a.tol_kkt;
  if (a.prox > 0.0) opts.prox = {a.prox, a.prox, a.prox};
  if (a.max_iter > 0) opts.max_outer = a.max_iter;
  if (a.inner_tol > 0.0) opts.inner.tol = a.inner_tol;
  if (a.inner_max > 0) opts.inner.max_iters = a.inner_max;
  opts.timing = a.timing;
  opts.track_kkt = a.track_kkt;

  nova::MmfSolveResult res;
  nova::ProtocolStats stats;
  if (distributed) {
    nova::DistributedMmfResult dist = nova::run_distributed_mmf(scn, opts, popts);
    res = std::move(dist.solve);
    stats = dist.stats;
  } else {
    res = nova::solve_mmf(scn, opts);
  }

  nlohmann::json sinrs = nlohmann::json::array();
  for (int u = 0; u < scn.num_users(); ++u) sinrs.push_back(nova::mmf_sinr(scn, res.iterate.w, u));
  solution["surrogate"] = a.surrogate;
  solution["objective"] = res.objective;
  solution["sinrs"] = sinrs;
  solution["outer_iters"] = res.outer_iters;
  solution["converged"] = res.converged;

  nova::write_trace_csv(a.out + ".trace.csv", res.trace);
  write_json(a.out + ".solution.json", solution);
  write_json(a.out + ".kkt.json",
             kkt_json(res.kkt.residual, res.kkt.stationarity, res.kkt.complementarity,
                      res.kkt.feasibility, res.kkt.degenerate));
  if (distributed) write_json(a.out + ".protocol.json", protocol_json(stats));

  std::printf("objective %s after %d outer iterations (%s)\n", format_g(res.objective).c_str(),
              res.outer_iters, res.converged ? "converged" : "not converged");
  return res.converged ? kExitOk : kExitSolver;
}

struct SweepArgs {
  std::string kind = "ibc";
  int cells = 2;
  int users = 2;
  int tx = 2;
  int rx = 2;
  std::string snr_grid = "0,10,20,30";
  int seeds = 20;
  std::uint64_t seed = 0;
  std::string dual = "newton";
  double tol = 1e-3;
  int max_iter = 0;
  std::string out;
};

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    const std::string item = text.substr(pos, next - pos);
    if (item.empty()) throw std::invalid_argument("empty entry in snr grid");
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad snr grid entry: " + item);
    grid.push_back(v);
    pos = next + 1;
  }
  if (grid.empty()) throw std::invalid_argument("snr grid is empty");
  return grid;
}

double sweep_cell_objective(const SweepArgs& a, double snr_db, std::uint64_t scenario_seed) {
  if (a.kind == "ibc") {
    nova::IbcGenConfig cfg;
    cfg.cells = a.cells;
    cfg.users_per_cell = a.users;
    cfg.tx_antennas = a.tx;
    cfg.rx_antennas = a.rx;
    cfg.snr_db = snr_db;
    cfg.seed = scenario_seed;
    const nova::IbcScenario scn = nova::generate_ibc(cfg);
    const nova::DualMethod method =
        a.dual == "newton" ? nova::DualMethod::kNewton : nova::DualMethod::kFirstOrder;
    nova::OuterOptions opts = nova::OuterOptions::defaults(method);
    opts.tol_obj = a.tol;
    if (a.max_iter > 0) opts.max_outer = a.max_iter;
    return nova::solve_ibc(scn, opts).objective;
  }
  nova::MmfGenConfig cfg;
  cfg.groups = a.cells;
  cfg.users_per_group = a.users;
  cfg.tx_antennas = a.tx;
  cfg.snr_db = snr_db;
  cfg.seed = scenario_seed;
  const nova::MmfScenario scn = nova::generate_mmf(cfg);
  nova::MmfOuterOptions opts;
  opts.method =
      a.dual == "newton" ? nova::MmfDualMethod::kNewton : nova::MmfDualMethod::kFirstOrder;
  opts.tol_obj = a.tol;
  if (a.max_iter > 0) opts.max_outer = a.max_iter;
  return nova::solve_mmf(scn, opts).objective;
}

int cmd_sweep(const SweepArgs& a) {
  if (a.kind != "ibc" && a.kind != "mmf") {
    std::fprintf(stderr, "kind must be ibc or mmf\n");
    return kExitValidation;
  }
  if (a.seeds <= 0) {
    std::fprintf(stderr, "seeds must be positive\n");
    return kExitValidation;
  }
  const std::vector<double> grid = parse_grid(a.snr_grid);

  struct Cell {
    double snr_db;
    int seed_index;
    double objective;
  };
  std::vector<Cell> cells;
  for (double snr : grid) {
    for (int s = 0; s < a.seeds; ++s) cells.push_back({snr, s, 0.0});
  }

  // Cells run in parallel; results land in preassigned slots so the files
  // come out identical no matter how the pool schedules them.
  std::atomic<std::size_t> cursor{0};
  std::string failure;
  std::mutex failure_mu;
  const unsigned pool =
      std::min<std::size_t>(cells.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> workers;
  for (unsigned t = 0; t < pool; ++t) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= cells.size()) return;
        try {
          cells[i].objective = sweep_cell_objective(
              a, cells[i].snr_db, a.seed + static_cast<std::uint64_t>(cells[i].seed_index));
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (failure.empty()) failure = e.what();
        }
      }
    });
  }
  for (std::thread& w : workers) w.join();
  if (!failure.empty()) {
    std::fprintf(stderr, "sweep cell failed: %s\n", failure.c_str());
    return kExitSolver;
  }

  std::string rows = "snr_db,seed,objective\n";
  for (const Cell& c : cells) {
    rows += format_g(c.snr_db);
    rows += ',';
    rows += std::to_string(c.seed_index);
    rows += ',';
    rows += format_g(c.objective);
    rows += '\n';
  }
  write_text(a.out + ".rows.csv", rows);

  std::string agg = "snr_db,mean,stderr,count\n";
  for (double snr : grid) {
    double sum = 0.0;
    int n = 0;
    for (const Cell& c : cells) {
      if (c.snr_db == snr) {
        sum += c.objective;
        ++n;
      }
    }
    const double mean = sum / n;
    double var = 0.0;
    for (const Cell& c : cells) {
      if (c.snr_db == snr) var += (c.objective - mean) * (c.objective - mean);
    }
    const double se = n > 1 ? std::sqrt(var / (n - 1)) / std::sqrt(static_cast<double>(n)) : 0.0;
    agg += format_g(snr);
    agg += ',';
    agg += format_g(mean);
    agg += ',';
    agg += format_g(se);
    agg += ',';
    agg += std::to_string(n);
    agg += '\n';
  }
  write_text(a.out + ".agg.csv", agg);

  std::printf("wrote %s.rows.csv and %s.agg.csv\n", a.out.c_str(), a.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"max-min rate and max-min SINR solvers"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* cmd_g = app.add_subcommand("gen", "generate a scenario file");
  cmd_g->add_option("--kind", gen.kind, "ibc or mmf");
  cmd_g->add_option("--preset", gen.preset, "named configuration (paper-ibc, paper-mmf-dist)");
  cmd_g->add_option("--cells", gen.cells, "transmitters");
  cmd_g->add_option("--users", gen.users, "users per transmitter");
  cmd_g->add_option("--tx", gen.tx, "transmit antennas");
  cmd_g->add_option("--rx", gen.rx, "receive antennas (ibc only)");
  cmd_g->add_option("--snr", gen.snr_db, "SNR in dB");
  cmd_g->add_option("--seed", gen.seed, "channel seed");
  cmd_g->add_option("--out", gen.out, "output path")->required();

  SolveArgs solve;
  CLI::App* cmd_s = app.add_subcommand("solve", "solve one scenario");
  cmd_s->add_option("--scenario", solve.scenario, "scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_s->add_option("--mode", solve.mode, "centralized or distributed");
  cmd_s->add_option("--dual", solve.dual, "newton or first-order");
  cmd_s->add_option("--surrogate", solve.surrogate, "nova1 or nova2 (mmf only)");
  cmd_s->add_option("--tol", solve.tol, "objective stall tolerance");
  cmd_s->add_option("--tol-kkt", solve.tol_kkt, "stationarity stopping tolerance");
  cmd_s->add_option("--prox", solve.prox, "uniform proximal weight override");
  cmd_s->add_option("--max-iter", solve.max_iter, "outer iteration cap");
  cmd_s->add_option("--inner-tol", solve.inner_tol, "dual solver tolerance");
  cmd_s->add_option("--inner-max", solve.inner_max, "dual solver iteration cap");
  cmd_s->add_option("--out", solve.out, "output prefix")->required();
  cmd_s->add_flag("--timing", solve.timing, "record wall time per iteration");
  cmd_s->add_flag("--track-kkt", solve.track_kkt, "fill the kkt trace column every iteration");
  cmd_s->add_option("--message-log", solve.message_log, "JSON-lines message log (distributed)");
  cmd_s->add_option("--drop-prob", solve.drop_prob, "simulated drop probability (distributed)");
  cmd_s->add_option("--fault-seed", solve.fault_seed, "seed for simulated drops");

  SweepArgs sweep;
  CLI::App* cmd_w = app.add_subcommand("sweep", "solve a seeded SNR grid");
  cmd_w->add_option("--kind", sweep.kind, "ibc or mmf");
  cmd_w->add_option("--cells", sweep.cells, "transmitters");
  cmd_w->add_option("--users", sweep.users, "users per transmitter");
  cmd_w->add_option("--tx", sweep.tx, "transmit antennas");
  cmd_w->add_option("--rx", sweep.rx, "receive antennas (ibc only)");
  cmd_w->add_option("--snr-grid", sweep.snr_grid, "comma separated dB values");
  cmd_w->add_option("--seeds", sweep.seeds, "seeds per grid point");
  cmd_w->add_option("--seed", sweep.seed, "base seed");
  cmd_w->add_option("--dual", sweep.dual, "newton or first-order");
  cmd_w->add_option("--tol", sweep.tol, "objective stall tolerance");
  cmd_w->add_option("--max-iter", sweep.max_iter, "outer iteration cap");
  cmd_w->add_option("--out", sweep.out, "output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (cmd_g->parsed()) return cmd_gen(gen);
    if (cmd_s->parsed()) return cmd_solve(solve);
    return cmd_sweep(sweep);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
}

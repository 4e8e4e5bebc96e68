#include <json.hpp>

#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "nova/distsim.hpp"
#include "nova/rng.hpp"

namespace nova {

namespace {

void put_complex(const ComplexMatrix& m, std::vector<double>& out) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      out.push_back(m(r, c).real());
      out.push_back(m(r, c).imag());
    }
  }
}

void put_complex(const ComplexVector& v, std::vector<double>& out) {
  for (int j = 0; j < v.size(); ++j) {
    out.push_back(v(j).real());
    out.push_back(v(j).imag());
  }
}

// Sequential bounds-checked reads; every unpack must drain its payload.
class PayloadReader {
 public:
  explicit PayloadReader(const std::vector<double>& data) : data_(data) {}

  double real() {
    if (pos_ >= data_.size()) throw std::runtime_error("payload truncated");
    return data_[pos_++];
  }

  ComplexMatrix matrix(int rows, int cols) {
    ComplexMatrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double re = real();
        const double im = real();
        m(r, c) = {re, im};
      }
    }
    return m;
  }

  ComplexVector vector(int n) {
    ComplexVector v(n);
    for (int j = 0; j < n; ++j) {
      const double re = real();
      const double im = real();
      v(j) = {re, im};
    }
    return v;
  }

  void finish() const {
    if (pos_ != data_.size()) throw std::runtime_error("payload has trailing data");
  }

 private:
  const std::vector<double>& data_;
  std::size_t pos_ = 0;
};

// Star transport: counts deliveries, simulates drops, optionally logs one
// JSON record per delivered message. Payload values never hit the log.
class Transport {
 public:
  Transport(const ProtocolOptions& opts, ProtocolStats* stats)
      : opts_(opts), stats_(stats), rng_(opts.fault_seed) {
    if (!(opts_.drop_probability >= 0.0 && opts_.drop_probability < 1.0)) {
      throw std::invalid_argument("drop_probability must lie in [0, 1)");
    }
    if (!opts_.log_path.empty()) {
      log_.open(opts_.log_path);
      if (!log_) throw std::runtime_error("cannot open message log: " + opts_.log_path);
    }
  }

  // Delivers one message and hands back the payload the receiver sees.
  // Drops are resolved by immediate retransmission, so delivery is certain
  // and deterministic; only the attempt count varies with the fault seed.
  std::vector<double> send(long round, const char* type, int from, int to,
                           std::vector<double> payload) {
    while (opts_.drop_probability > 0.0 && rng_.uniform() < opts_.drop_probability) {
      ++stats_->retransmissions;
    }
    ++stats_->messages;
    stats_->payload_doubles += static_cast<long>(payload.size());
    if (log_.is_open()) {
      const nlohmann::json rec{{"round", round},
                               {"type", type},
                               {"from", from},
                               {"to", to},
                               {"doubles", payload.size()}};
      log_ << rec.dump() << '\n';
    }
    return payload;
  }

  void flush() {
    if (log_.is_open()) log_.flush();
  }

 private:
  ProtocolOptions opts_;
  ProtocolStats* stats_;
  SplitRng rng_;
  std::ofstream log_;
};

constexpr int kBroadcast = -1;

}  // namespace

std::vector<double> pack_ibc_duals(const IbcScenario& scn, const IbcDualVars& duals) {
  std::vector<double> out;
  for (int u = 0; u < scn.num_users(); ++u) out.push_back(duals.lambda(u));
  for (int u = 0; u < scn.num_users(); ++u) put_complex(duals.omega[u], out);
  return out;
}

IbcDualVars unpack_ibc_duals(const IbcScenario& scn, const std::vector<double>& payload) {
  PayloadReader in(payload);
  IbcDualVars d;
  d.lambda.resize(scn.num_users());
  for (int u = 0; u < scn.num_users(); ++u) d.lambda(u) = in.real();
  d.omega.resize(scn.num_users());
  for (int u = 0; u < scn.num_users(); ++u) {
    const int n = scn.rx_antennas(u);
    d.omega[u] = in.matrix(n, n);
  }
  in.finish();
  return d;
}

std::vector<double> pack_cell_primal(const IbcScenario& scn, int cell, const CellPrimal& cp) {
  (void)scn;
  (void)cell;
  std::vector<double> out;
  for (const ComplexMatrix& q : cp.q) put_complex(q, out);
  for (const ComplexMatrix& y : cp.y) put_complex(y, out);
  out.insert(out.end(), cp.own_rate_part.begin(), cp.own_rate_part.end());
  out.push_back(cp.xi);
  out.push_back(cp.prox_cost);
  return out;
}

CellPrimal unpack_cell_primal(const IbcScenario& scn, int cell,
                              const std::vector<double>& payload) {
  PayloadReader in(payload);
  CellPrimal cp;
  const int own = scn.users_per_cell[cell];
  const int tx = scn.tx_antennas[cell];
  for (int i = 0; i < own; ++i) cp.q.push_back(in.matrix(tx, tx));
  for (int i = 0; i < own; ++i) {
    const int rx = scn.rx_antennas(scn.user_index(cell, i));
    cp.y.push_back(in.matrix(rx, rx));
  }
  for (int i = 0; i < own; ++i) cp.own_rate_part.push_back(in.real());
  cp.xi = in.real();
  cp.prox_cost = in.real();
  in.finish();
  return cp;
}

std::vector<double> pack_cell_contribution(const IbcScenario& scn, const CellContribution& cc) {
  (void)scn;
  std::vector<double> out(cc.lin_term.begin(), cc.lin_term.end());
  for (const ComplexMatrix& m : cc.rx_cov) put_complex(m, out);
  return out;
}

CellContribution unpack_cell_contribution(const IbcScenario& scn,
                                          const std::vector<double>& payload) {
  PayloadReader in(payload);
  CellContribution cc;
  for (int u = 0; u < scn.num_users(); ++u) cc.lin_term.push_back(in.real());
  for (int u = 0; u < scn.num_users(); ++u) {
    const int rx = scn.rx_antennas(u);
    cc.rx_cov.push_back(in.matrix(rx, rx));
  }
  in.finish();
  return cc;
}

std::vector<double> pack_mmf_duals(const MmfDualVars& duals) {
  std::vector<double> out;
  for (int i = 0; i < duals.lambda.size(); ++i) out.push_back(duals.lambda(i));
  for (int i = 0; i < duals.eta.size(); ++i) out.push_back(duals.eta(i));
  return out;
}

MmfDualVars unpack_mmf_duals(const MmfScenario& scn, const std::vector<double>& payload) {
  PayloadReader in(payload);
  MmfDualVars d;
  d.lambda.resize(scn.num_users());
  for (int i = 0; i < scn.num_users(); ++i) d.lambda(i) = in.real();
  d.eta.resize(scn.num_users());
  for (int i = 0; i < scn.num_users(); ++i) d.eta(i) = in.real();
  in.finish();
  return d;
}

std::vector<double> pack_mmf_cell_primal(const MmfCellPrimal& cp) {
  std::vector<double> out;
  put_complex(cp.w, out);
  out.push_back(cp.prox_cost);
  out.insert(out.end(), cp.signal_lin.begin(), cp.signal_lin.end());
  return out;
}

MmfCellPrimal unpack_mmf_cell_primal(const MmfScenario& scn, int group,
                                     const std::vector<double>& payload) {
  PayloadReader in(payload);
  MmfCellPrimal cp;
  cp.w = in.vector(scn.tx_antennas[group]);
  cp.prox_cost = in.real();
  for (int i = 0; i < scn.users_per_group[group]; ++i) cp.signal_lin.push_back(in.real());
  in.finish();
  return cp;
}

std::vector<double> pack_mmf_cell_contribution(const MmfCellContribution& cc) {
  return cc.interference;
}

MmfCellContribution unpack_mmf_cell_contribution(const MmfScenario& scn,
                                                 const std::vector<double>& payload) {
  PayloadReader in(payload);
  MmfCellContribution cc;
  for (int i = 0; i < scn.num_users(); ++i) cc.interference.push_back(in.real());
  in.finish();
  return cc;
}

namespace {

DualEval ibc_protocol_round(const IbcScenario& scn, const RateLinearization& lin,
                            const LiftedIterate& base, const ProxParams& prox,
                            const IbcDualVars& duals, bool simulate, Transport& tp,
                            ProtocolStats* stats) {
  const long round = ++stats->rounds;
  const int cells = scn.num_cells();

  std::vector<double> query = pack_ibc_duals(scn, duals);
  const std::vector<double> delivered = tp.send(round, "duals", 0, kBroadcast, std::move(query));
  const IbcDualVars agent_duals = simulate ? unpack_ibc_duals(scn, delivered) : duals;

  std::vector<CellPrimal> primal(cells);
  std::vector<CellContribution> contribs(cells);
  for (int k = 0; k < cells; ++k) {
    CellPrimal cp = cell_primal(scn, lin, base, prox, agent_duals, k);
    CellContribution cc = cell_contribution(scn, lin, base, cp, k);
    const std::vector<double> pp = tp.send(round, "primal", k, 0, pack_cell_primal(scn, k, cp));
    const std::vector<double> cpay =
        tp.send(round, "contrib", k, 0, pack_cell_contribution(scn, cc));
    primal[k] = simulate ? unpack_cell_primal(scn, k, pp) : std::move(cp);
    contribs[k] = simulate ? unpack_cell_contribution(scn, cpay) : std::move(cc);
  }
  return assemble_dual_eval(scn, base, prox, duals, primal, contribs);
}

MmfDualEval mmf_protocol_round(const MmfScenario& scn, MmfSurrogate kind, const MmfIterate& base,
                               const MmfProx& prox, const MmfDualVars& duals, bool simulate,
                               Transport& tp, ProtocolStats* stats) {
  const long round = ++stats->rounds;
  const int groups = scn.num_groups();

  std::vector<double> query = pack_mmf_duals(duals);
  const std::vector<double> delivered = tp.send(round, "duals", 0, kBroadcast, std::move(query));
  const MmfDualVars agent_duals = simulate ? unpack_mmf_duals(scn, delivered) : duals;

  std::vector<MmfCellPrimal> primal(groups);
  std::vector<MmfCellContribution> contribs(groups);
  for (int k = 0; k < groups; ++k) {
    MmfCellPrimal cp = mmf_cell_primal(scn, base, prox, agent_duals, k);
    MmfCellContribution cc = mmf_cell_contribution(scn, cp, k);
    const std::vector<double> pp = tp.send(round, "primal", k, 0, pack_mmf_cell_primal(cp));
    const std::vector<double> cpay =
        tp.send(round, "contrib", k, 0, pack_mmf_cell_contribution(cc));
    primal[k] = simulate ? unpack_mmf_cell_primal(scn, k, pp) : std::move(cp);
    contribs[k] = simulate ? unpack_mmf_cell_contribution(scn, cpay) : std::move(cc);
  }
  return mmf_assemble_eval(scn, kind, base, prox, duals, primal, contribs);
}

}  // namespace

DistributedIbcResult run_distributed_ibc(const IbcScenario& scn, const OuterOptions& opts,
                                         const ProtocolOptions& popts) {
  DistributedIbcResult out;
  Transport tp(popts, &out.stats);

  const InnerSolverFn inner = [&](const IbcScenario& s, const RateLinearization& lin,
                                  const LiftedIterate& base, const ProxParams& prox,
                                  const IbcDualVars& warm, const DualOptions& dopts) {
    const long before = out.stats.messages;
    const DualEvaluator evaluate = [&](const IbcDualVars& d) {
      return ibc_protocol_round(s, lin, base, prox, d, popts.simulate_transport, tp, &out.stats);
    };
    InnerResult in;
    in.dual = opts.method == DualMethod::kNewton
                  ? solve_dual_newton_via(s, lin, base, prox, evaluate, warm, dopts)
                  : solve_dual_first_order_via(evaluate, warm, dopts);
    in.messages = out.stats.messages - before;
    return in;
  };

  out.solve = solve_ibc(scn, opts, inner);
  tp.flush();
  return out;
}

DistributedMmfResult run_distributed_mmf(const MmfScenario& scn, const MmfOuterOptions& opts,
                                         const ProtocolOptions& popts) {
  DistributedMmfResult out;
  Transport tp(popts, &out.stats);

  const MmfInnerSolverFn inner = [&](const MmfScenario& s, MmfSurrogate kind,
                                     const MmfIterate& base, const MmfProx& prox,
                                     const MmfDualVars& warm, const MmfDualOptions& dopts) {
    const long before = out.stats.messages;
    const MmfDualEvaluator evaluate = [&](const MmfDualVars& d) {
      return mmf_protocol_round(s, kind, base, prox, d, popts.simulate_transport, tp,
                                &out.stats);
    };
    MmfInnerResult in;
    in.dual = solve_mmf_subproblem_via(s, kind, base, prox, evaluate, warm, opts.method, dopts);
    in.messages = out.stats.messages - before;
    return in;
  };

  out.solve = solve_mmf(scn, opts, inner);
  tp.flush();
  return out;
}

}  // namespace nova

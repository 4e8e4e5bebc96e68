#pragma once
// Simulated message-passing runtime for the dual decomposition. Agents sit in
// a star around a header node that owns the outer loop and the dual updates;
// each dual query costs one protocol round: a broadcast of the duals, then a
// primal and a contribution report from every agent. The transport serializes
// payloads losslessly, so the distributed run reproduces the in-process path
// bit for bit while message and round counts stay observable.

#include <cstdint>
#include <string>
#include <vector>

#include "nova/ibc_dual.hpp"
#include "nova/ibc_nova.hpp"
#include "nova/mmf.hpp"

namespace nova {

struct ProtocolOptions {
  bool simulate_transport = true;  // route every payload through pack/unpack
  double drop_probability = 0.0;   // chance a delivery needs retransmission
  std::uint64_t fault_seed = 0;
  std::string log_path;  // JSON-lines message log; empty disables logging
};

struct ProtocolStats {
  long messages = 0;         // delivered messages (broadcast counts once)
  long rounds = 0;           // dual evaluations served by the protocol
  long payload_doubles = 0;  // total payload volume across deliveries
  long retransmissions = 0;  // extra attempts forced by simulated drops
};

// Payload packing; exact round trips for IEEE doubles. Complex blocks are
// stored row major as (re, im) pairs, fields in declaration order.
std::vector<double> pack_ibc_duals(const IbcScenario& scn, const IbcDualVars& duals);
IbcDualVars unpack_ibc_duals(const IbcScenario& scn, const std::vector<double>& payload);
std::vector<double> pack_cell_primal(const IbcScenario& scn, int cell, const CellPrimal& cp);
CellPrimal unpack_cell_primal(const IbcScenario& scn, int cell, const std::vector<double>& payload);
std::vector<double> pack_cell_contribution(const IbcScenario& scn, const CellContribution& cc);
CellContribution unpack_cell_contribution(const IbcScenario& scn,
                                          const std::vector<double>& payload);

std::vector<double> pack_mmf_duals(const MmfDualVars& duals);
MmfDualVars unpack_mmf_duals(const MmfScenario& scn, const std::vector<double>& payload);
std::vector<double> pack_mmf_cell_primal(const MmfCellPrimal& cp);
MmfCellPrimal unpack_mmf_cell_primal(const MmfScenario& scn, int group,
                                     const std::vector<double>& payload);
std::vector<double> pack_mmf_cell_contribution(const MmfCellContribution& cc);
MmfCellContribution unpack_mmf_cell_contribution(const MmfScenario& scn,
                                                 const std::vector<double>& payload);

struct DistributedIbcResult {
  IbcSolveResult solve;
  ProtocolStats stats;
};
DistributedIbcResult run_distributed_ibc(const IbcScenario& scn, const OuterOptions& opts,
                                         const ProtocolOptions& popts);

struct DistributedMmfResult {
  MmfSolveResult solve;
  ProtocolStats stats;
};
DistributedMmfResult run_distributed_mmf(const MmfScenario& scn, const MmfOuterOptions& opts,
                                         const ProtocolOptions& popts);

}  // namespace nova

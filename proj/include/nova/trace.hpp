#pragma once

// Per-iteration solver trace shared by both problem families, plus the CSV
// writer used by the command line tool. Values are printed with %.17g so a
// rerun with the same seed reproduces the file byte for byte.

#include <string>
#include <vector>

namespace nova {

struct TraceRow {
  int iter = 0;
  double objective = 0.0;   // min weighted rate / min SINR at the iterate
  double rate_var = 0.0;    // lifted common-rate or common-SINR variable
  double kkt_residual = 0.0;
  double gamma = 0.0;
  int inner_iters = 0;
  long messages = 0;
  double time_ms = 0.0;
};

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);
std::string trace_csv_string(const std::vector<TraceRow>& rows);

// One ascent iteration of a dual solver, recorded on request.
struct DualIterRecord {
  double value = 0.0;
  double residual = 0.0;
  double step = 0.0;     // accepted damped step, 0 when nothing was accepted
  double damping = 0.0;  // curvature regularization in effect (Newton only)
  bool fallback = false; // gradient step taken after the Newton system failed
};

}  // namespace nova

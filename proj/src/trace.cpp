#include "nova/trace.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace nova {

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string trace_csv_string(const std::vector<TraceRow>& rows) {
  std::string out = "iter,objective,R,kkt_residual,gamma,inner_iters,messages,time_ms\n";
  for (const TraceRow& r : rows) {
    out += std::to_string(r.iter);
    out += ',';
    append_double(out, r.objective);
    out += ',';
    append_double(out, r.rate_var);
    out += ',';
    append_double(out, r.kkt_residual);
    out += ',';
    append_double(out, r.gamma);
    out += ',';
    out += std::to_string(r.inner_iters);
    out += ',';
    out += std::to_string(r.messages);
    out += ',';
    append_double(out, r.time_ms);
    out += '\n';
  }
  return out;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open trace file: " + path);
  f << trace_csv_string(rows);
}

}  // namespace nova

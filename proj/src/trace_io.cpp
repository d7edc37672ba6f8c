#include "vvcguard/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "vvcguard/errors.hpp"

namespace vvcguard::sim {

namespace {

constexpr const char* kHeader = "t,V1,V2,V3,I1,I2,I3,v_angle,i_angle,Vd,Vq,Id,Iq,Q,curve_id";
constexpr std::size_t kColumns = 15;

}  // namespace

void write_trace_csv(std::ostream& out, const SimTrace& trace) {
  out << kHeader << '\n';
  char buf[512];
  for (const auto& r : trace.rows) {
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  r.t, r.v_mag[0], r.v_mag[1], r.v_mag[2], r.i_mag[0], r.i_mag[1], r.i_mag[2], r.v_angle,
                  r.i_angle, r.vd, r.vq, r.id, r.iq, r.q, r.curve_id);
    out << buf;
  }
}

void save_trace(const std::string& path, const SimTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_trace_csv(out, trace);
}

SimTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trace file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw FormatError("unexpected trace header");

  SimTrace trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size() && cell.substr(used) != "\r") throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError("bad number on trace line " + std::to_string(lineno));
      }
    }
    if (v.size() != kColumns) throw FormatError("trace line " + std::to_string(lineno) + " has the wrong column count");
    TraceRow r;
    r.t = v[0];
    r.v_mag = {v[1], v[2], v[3]};
    r.i_mag = {v[4], v[5], v[6]};
    r.v_angle = v[7];
    r.i_angle = v[8];
    r.vd = v[9];
    r.vq = v[10];
    r.id = v[11];
    r.iq = v[12];
    r.q = v[13];
    r.curve_id = static_cast<int>(v[14]);
    trace.rows.push_back(r);
  }
  if (trace.rows.size() < 2) throw FormatError("trace needs at least two rows");
  trace.dt = trace.rows[1].t - trace.rows[0].t;
  if (!(trace.dt > 0.0)) throw FormatError("trace time must increase");
  for (std::size_t k = 1; k < trace.rows.size(); ++k) {
    if (std::abs(trace.rows[k].t - trace.rows[k - 1].t - trace.dt) > 1e-9) {
      throw FormatError("trace step is not uniform at row " + std::to_string(k));
    }
  }
  std::size_t switch_row = trace.rows.size() - 1;
  for (std::size_t k = 0; k < trace.rows.size(); ++k) {
    if (trace.rows[k].curve_id == 1) {
      switch_row = k;
      break;
    }
  }
  trace.attack_time = trace.rows[switch_row].t;
  trace.theta_ref = trace.rows[switch_row].v_angle;
  return trace;
}

SimTrace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return read_trace_csv(in);
}

}  // namespace vvcguard::sim

#pragma once

#include <iosfwd>
#include <string>

#include "vvcguard/simulator.hpp"

namespace vvcguard::sim {

/// Comma-separated, one row per step, header naming each column.
void write_trace_csv(std::ostream& out, const SimTrace& trace);
void save_trace(const std::string& path, const SimTrace& trace);

/// Inverse of write_trace_csv. The update instant is the first row whose
/// curve_id is 1 (the trace end when there is none).
SimTrace read_trace_csv(std::istream& in);
SimTrace load_trace(const std::string& path);

}  // namespace vvcguard::sim

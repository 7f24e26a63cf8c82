#pragma once

// Persistence of optimisation traces: one JSON object per line plus a flat
// CSV summary. Wall-clock times go to a separate file so that trace files
// of identically seeded runs are byte-identical.

#include <iosfwd>
#include <string>
#include <vector>

#include "microforge/bo.hpp"

namespace microforge {

std::string trace_record_json(const TraceRecord& r);
TraceRecord parse_trace_record(const std::string& line);

void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& records);
std::vector<TraceRecord> read_trace_jsonl(std::istream& in);

/// Columns: index, kind, iteration, alpha, objective, best_so_far, phi_pore,
/// phi_nmc, phi_cbd, ssa_nmc, drel_x, drel_y, drel_z, ok.
std::string trace_csv_header();
std::string trace_csv_row(const TraceRecord& r);

std::string timings_csv_header();
std::string timings_csv_row(const TraceRecord& r);

}  // namespace microforge

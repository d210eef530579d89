#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tsiv/sim.hpp"

namespace tsiv {

// Shortest round-trip decimal form, locale-free; non-finite values
// become "nan" / "inf" / "-inf".
std::string format_double(double v);

// Writes via a sibling temp file and renames it into place, so
// readers never observe a half-written report.
void write_text_atomic(const std::string& path, const std::string& content);

struct SimTableRow {
  int scenario = 1;
  int setting = 1;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  MonteCarloResult result;
};

// One row per catalog entry, mirroring the result-table layout
// (bias and MSE scaled by 100).  Wall time is opt-in so the default
// output is byte-stable across runs.
std::string render_simulate_csv(const std::vector<SimTableRow>& rows,
                                bool timing);

// Two-column key,value listing.
std::string render_kv_csv(
    const std::vector<std::pair<std::string, std::string>>& rows);

// '#'-prefixed preamble lines followed by an a,c_hat table.
std::string render_diagnose_csv(
    const std::vector<std::pair<std::string, std::string>>& preamble,
    const std::vector<double>& grid_a, const std::vector<double>& grid_c);

}  // namespace tsiv

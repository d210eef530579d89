#include "tsiv/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace tsiv {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(tmp + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error(tmp + ": write failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error(path + ": rename failed");
  }
}

std::string render_simulate_csv(const std::vector<SimTableRow>& rows,
                                bool timing) {
  std::string out =
      "scenario,setting,n1,n2,reps,n_failed,bias_x100,mse_x100,coverage_pct";
  if (timing) out += ",wall_seconds";
  out += '\n';
  for (const SimTableRow& row : rows) {
    out += std::to_string(row.scenario);
    out += ',';
    out += std::to_string(row.setting);
    out += ',';
    out += std::to_string(row.n1);
    out += ',';
    out += std::to_string(row.n2);
    out += ',';
    out += std::to_string(row.result.n_reps);
    out += ',';
    out += std::to_string(row.result.n_failed);
    out += ',';
    out += format_double(row.result.bias_x100);
    out += ',';
    out += format_double(row.result.mse_x100);
    out += ',';
    out += format_double(row.result.coverage_pct);
    if (timing) {
      out += ',';
      out += format_double(row.result.wall_seconds);
    }
    out += '\n';
  }
  return out;
}

std::string render_kv_csv(
    const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string out = "key,value\n";
  for (const auto& [key, value] : rows) {
    out += key;
    out += ',';
    out += value;
    out += '\n';
  }
  return out;
}

std::string render_diagnose_csv(
    const std::vector<std::pair<std::string, std::string>>& preamble,
    const std::vector<double>& grid_a, const std::vector<double>& grid_c) {
  std::string out;
  for (const auto& [key, value] : preamble) {
    out += "# ";
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  out += "a,c_hat\n";
  for (std::size_t i = 0; i < grid_a.size(); ++i) {
    out += format_double(grid_a[i]);
    out += ',';
    out += format_double(grid_c[i]);
    out += '\n';
  }
  return out;
}

}  // namespace tsiv

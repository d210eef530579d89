#include "tsiv/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "tsiv/errors.hpp"

namespace tsiv {

namespace {

std::string read_whole_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

double parse_field(const std::string& path, std::size_t line_no,
                   const char* column, std::string_view token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw ParseError(path + ": line " + std::to_string(line_no) +
                     ", column \"" + column + "\": invalid number \"" +
                     std::string(token) + "\"");
  return value;
}

// Streams records of `columns` fields to `emit(line_no, fields)`.
template <std::size_t N, typename Emit>
void read_csv(const std::string& path, const std::array<const char*, N>& columns,
              Emit&& emit) {
  const std::string content = read_whole_file(path);

  std::string header;
  for (std::size_t i = 0; i < N; ++i) {
    if (i > 0) header += ',';
    header += columns[i];
  }

  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (pos <= content.size()) {
    const std::size_t eol = content.find('\n', pos);
    std::string_view line(content.data() + pos,
                          (eol == std::string::npos ? content.size() : eol) -
                              pos);
    pos = eol == std::string::npos ? content.size() + 1 : eol + 1;
    ++line_no;
    line = strip_cr(line);

    if (!saw_header) {
      if (line != header)
        throw ParseError(path + ": expected header \"" + header +
                         "\", got \"" + std::string(line) + "\"");
      saw_header = true;
      continue;
    }
    if (line.empty()) {
      // A trailing newline leaves one empty tail; anything else is a
      // malformed record.
      if (pos > content.size()) break;
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": empty line");
    }

    std::array<double, N> fields{};
    std::size_t field = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view token =
          line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                             : comma - start);
      if (field >= N)
        throw ParseError(path + ": line " + std::to_string(line_no) +
                         ": expected " + std::to_string(N) + " fields");
      fields[field] = parse_field(path, line_no, columns[field], token);
      ++field;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (field != N)
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": expected " + std::to_string(N) + " fields, got " +
                       std::to_string(field));
    emit(fields);
  }
  if (!saw_header)
    throw ParseError(path + ": expected header \"" + header + "\", got \"\"");
}

}  // namespace

std::vector<AuxiliaryRow> read_aux_csv(const std::string& path) {
  std::vector<AuxiliaryRow> rows;
  read_csv(path, std::array<const char*, 2>{"z", "a"},
           [&](const std::array<double, 2>& f) {
             rows.push_back(AuxiliaryRow{f[0], f[1]});
           });
  return rows;
}

std::vector<PrimaryRow> read_primary_csv(const std::string& path) {
  std::vector<PrimaryRow> rows;
  read_csv(path, std::array<const char*, 2>{"a", "y"},
           [&](const std::array<double, 2>& f) {
             rows.push_back(PrimaryRow{f[0], f[1]});
           });
  return rows;
}

std::vector<JointRow> read_joint_csv(const std::string& path) {
  std::vector<JointRow> rows;
  read_csv(path, std::array<const char*, 3>{"z", "a", "y"},
           [&](const std::array<double, 3>& f) {
             rows.push_back(JointRow{f[0], f[1], f[2]});
           });
  return rows;
}

}  // namespace tsiv

#pragma once

#include <string>
#include <vector>

#include "tsiv/core.hpp"

namespace tsiv {

// Strict CSV readers: exact lowercase headers, comma separation, one
// record per line, '\r' tolerated before '\n'.  Malformed input
// raises ParseError citing the file, line, and column.
std::vector<AuxiliaryRow> read_aux_csv(const std::string& path);    // "z,a"
std::vector<PrimaryRow> read_primary_csv(const std::string& path);  // "a,y"
std::vector<JointRow> read_joint_csv(const std::string& path);      // "z,a,y"

}  // namespace tsiv

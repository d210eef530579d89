#pragma once

namespace tsiv::cli {

// Parses argv, dispatches to the estimate/simulate/diagnose
// subcommand, and maps failures to the exit-code contract:
// 0 ok, 2 input parsing, 3 validation/config, 4 estimation.
int run(int argc, const char* const* argv);

}  // namespace tsiv::cli

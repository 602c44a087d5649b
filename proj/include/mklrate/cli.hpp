#pragma once

#include <ostream>

namespace mklrate {

/// Entry point for the `mklrate` tool.
///
///   mklrate <solve|sweep|compare|diagnose|spectrum> --config PATH
///           [--out DIR] [--seed U64] [--jobs N] [--quiet]
///
/// Exit codes: 0 success, 1 usage or validation error (the message names the
/// offending field), 2 runtime failure. MKLRATE_SEED supplies the seed when
/// neither --seed nor the config file sets one.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mklrate

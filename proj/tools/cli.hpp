// Command-line front end. run_cli is the whole program minus process setup,
// so tests drive it in-process.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xamr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;      // usage, config, data or file errors
inline constexpr int kExitNumerical = 3;  // non-finite values during training

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xamr::cli

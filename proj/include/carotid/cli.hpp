#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace carotid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Batch driver. `args` excludes the program name. Results go to files named by
/// the flags; progress to `out`, diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace carotid::cli

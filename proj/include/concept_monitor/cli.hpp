#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace concept_monitor::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCompute = 1;
inline constexpr int kExitInput = 2;

/// `args` excludes the program name. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace concept_monitor::cli

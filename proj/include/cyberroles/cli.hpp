#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cyberroles {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command: stats, prepare, synth, train-binary, train-roles, cv,
/// eval or predict. `args` excludes the program name. Returns 0 on success,
/// 1 for invalid input or configuration, 2 when training or prediction fails.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace cyberroles

#pragma once

#include <iosfwd>

namespace preqinfo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitAcceptance = 3;

/// Entry point of the `preqinfo` tool; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace preqinfo::cli

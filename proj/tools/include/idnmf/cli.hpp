#pragma once

#include <iosfwd>

namespace idnmf::cli {

/// Process exit codes of the idnmf tool.
enum ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kData = 3,
  kSingular = 4,
};

/// Environment variable that sets the number of restart worker threads.
inline constexpr const char* kThreadsEnv = "IDNMF_THREADS";

/// Entry point of the `idnmf` tool with explicit output streams.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace idnmf::cli

#pragma once

namespace adamatch {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitIo = 4,
  kExitFormat = 5,
  kExitPairFailure = 6,
  kExitSelftest = 7,
  kExitInternal = 8,
};

// Output directories fall back to this variable when no flag is given.
constexpr const char* kOutDirEnv = "ADAMATCH_OUT_DIR";

int run_cli(int argc, char** argv);

}  // namespace adamatch

#pragma once

#include <iosfwd>

namespace langdepth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericalError = 3;

// Environment variable consulted for the default seed.
inline constexpr const char* kSeedEnvVar = "LANGDEPTH_SEED";

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace langdepth::cli

#pragma once

#include <string>
#include <vector>

namespace specattn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "SPECATTN_OUT_DIR";

/// Parses and runs one command. Never throws; returns the exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args exclude the program name

}  // namespace specattn::cli

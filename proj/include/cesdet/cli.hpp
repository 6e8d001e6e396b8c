#pragma once

namespace cesdet::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kSelftestFailed = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kNumericalFailure = 3;

/// Entry point for the `cesdet` tool: simulate | roc | asymptotics | selftest.
int run(int argc, char** argv);

}  // namespace cesdet::cli

#pragma once

namespace oasis {

// Entry point of the `oasis` binary; split out so tests can drive the CLI
// in-process. Returns the process exit code (0 ok, 1 usage/validation,
// 2 runtime failure).
int run_cli(int argc, const char* const* argv);

}  // namespace oasis

#pragma once

namespace curricle {

// Full command-line entry point; returns the process exit code. Split from
// main() so tests can drive subcommands in-process.
int run_cli(int argc, const char* const* argv);

}  // namespace curricle

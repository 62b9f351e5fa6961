#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace exvqa::cli {

/// Runs one subcommand (build-vocab, index, retrieve, train, generate,
/// evaluate, selftest). Returns the process exit code: 0 on success, 2 for
/// usage errors, 1 for every other failure. Failures print exactly one line
/// "error: <code>: <message>" to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// Environment variable naming the directory that relative paths resolve
/// against.
inline constexpr const char* kRunDirEnv = "EXVQA_RUN_DIR";

}  // namespace exvqa::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nops::cli {

/// Runs one subcommand (gen-data, train, eval, baseline, ablate). Returns 0
/// on success, 2 on a usage error and 1 on a runtime failure. Progress goes
/// to `err`, tables to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace nops::cli

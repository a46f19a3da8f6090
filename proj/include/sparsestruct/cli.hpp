#ifndef SPARSESTRUCT_CLI_HPP_
#define SPARSESTRUCT_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "sparsestruct/io.hpp"

namespace sparsestruct {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitParse = 2,
  kExitDegenerate = 3,
  kExitInvariant = 4,
};

/// Runs a manifest and writes its outputs; returns the structure JSON text.
std::string run_discover(RunManifest& manifest, std::ostream& log);

/// Whole command line, argv[0] included. Errors are reported on `err` and
/// mapped to exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_CLI_HPP_

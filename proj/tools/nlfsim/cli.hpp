#ifndef NLFSIM_CLI_HPP
#define NLFSIM_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace nlfsim {

enum ExitCode : int { Ok = 0, ConfigFailure = 2, SolverFailure = 3, IoFailure = 4 };

/// Runs one invocation; args excludes the program name.  Diagnostics go to
/// `err`, progress lines to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Experiments understood by the executable, in subcommand spelling.
std::vector<std::string> experiment_names();

}  // namespace nlfsim

#endif  // NLFSIM_CLI_HPP

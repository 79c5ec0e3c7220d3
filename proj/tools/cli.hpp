#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tstereo {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIo = 2 };

/// Entry point of the `tstereo` tool: subcommands run, eval, synth, selftest.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Convenience overload; args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tstereo

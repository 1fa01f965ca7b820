#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gridsens::cli {

enum ExitCode : int { ok = 0, usage = 2, data_error = 3, numerical_failure = 4 };

/// Runs one command line (args[0] is the program name). Normal output goes to
/// `out`, warnings and errors to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_dispatch(int argc, char** argv);

}  // namespace gridsens::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posce::cli {

/// Runs the `posce` command line. Returns the process exit status: 0 on
/// success, otherwise the ErrorKind code of the failure (usage errors are 2).
/// Errors are reported on `err` as a single line `error: <class>: <message>`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace posce::cli

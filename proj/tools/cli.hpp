#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lnforge::cli {

/// Runs one `lnforge` invocation. args excludes the program name. Returns
/// the process exit code; errors are reported on `err` as a single line
///   lnforge: error[<category>]: <detail>
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lnforge::cli

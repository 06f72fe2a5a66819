#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lipquot::cli {

/// Runs one command line (without the program name). Exit codes: 0 all claims
/// met, 1 a claim failed, 2 usage error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lipquot::cli

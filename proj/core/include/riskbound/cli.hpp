#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace riskbound::cli {

// Runs one subcommand: risk | bound | sweep | optimize | verify | compare,
// with --config PATH (JSON, required) and --out PATH (optional copy of the
// primary output). Returns the process exit code: 0 success, 2 invalid
// configuration (the message names the offending key), 3 numerical failure,
// 4 verify found a failing check.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace riskbound::cli

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace liesup::cli {

// Runs the command-line tool on `args` (excluding the program name) and
// returns the process exit code: 0 = pass, 1 = fail / no evidence,
// 2 = inconclusive or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace liesup::cli

#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace vspf {

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 on usage errors, 2 on runtime errors; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace vspf

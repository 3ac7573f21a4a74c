#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace latim::cli {

enum exit_code : int { ok = 0, usage = 2, data = 3, numeric = 4 };

// Entry point shared by the latim binary and the in-process tests.
// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace latim::cli

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ipal::cli {

enum ExitCode : int { ok = 0, usage = 1, data_error = 2, internal = 3 };

/// Runs one `ipal` invocation. `args` excludes the program name. Normal
/// output goes to `out`; usage text and the machine-readable error record
/// go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace ipal::cli

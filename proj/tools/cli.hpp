#pragma once

#include <string>
#include <vector>

namespace nmil::cli {

/// Runs one `nmil` invocation. `args` excludes the program name.
/// Returns 0 on success, 1 on usage or validation errors, 2 on runtime errors.
int run(const std::vector<std::string>& args);

}  // namespace nmil::cli

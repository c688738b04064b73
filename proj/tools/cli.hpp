// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prunekit::cli {

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kUsageError = 2 };

/// Entry point behind the `prunekit` binary. `args` excludes the program name.
/// The last line written to `out` on success is a single JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prunekit::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vamix {

/// Exit codes: 0 success, 1 usage error, 2 processing error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

/// Expands `--config <file.json>` into command-line tokens for every key not
/// already given explicitly. Exposed for tests.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace vamix

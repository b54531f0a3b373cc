#pragma once

#include <string>
#include <vector>

namespace uspcov {

/// CLI entry point. Subcommands: fit, evaluate, campaign, reproduce,
/// datasets. Returns 0 on success, 1 on configuration/usage errors (the
/// run-config schema is printed), 2 on numeric failures.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);

}  // namespace uspcov

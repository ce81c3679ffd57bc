#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "app/run_config.hpp"

namespace ccan {

const std::vector<std::string>& command_names();

// Runs one command against a resolved configuration, writing progress lines to
// log. Throws the library's Error types; UsageError for an unknown command.
void dispatch(const std::string& command, const RunConfig& config, std::ostream& log);

}  // namespace ccan

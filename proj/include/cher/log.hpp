#pragma once

#include <spdlog/spdlog.h>

namespace cher {

// stderr logger. Verbosity comes from CHER_LOG_LEVEL
// (trace|debug|info|warn|error|off); default info.
spdlog::logger& log();

}  // namespace cher

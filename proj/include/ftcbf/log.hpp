#pragma once

#include <spdlog/spdlog.h>

namespace ftcbf {

/// Shared stderr logger. Level comes from FTCBF_LOG (error, info, debug;
/// default error) the first time this is called.
spdlog::logger& logger();

/// Parses a FTCBF_LOG value; unknown strings map to error.
spdlog::level::level_enum parse_log_level(const char* value);

}  // namespace ftcbf

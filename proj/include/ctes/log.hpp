#pragma once

#include <memory>
#include <string>

#include <spdlog/spdlog.h>

namespace ctes {

/// Shared library logger (stderr). Level comes from the CTES_LOG environment
/// variable: trace, debug, info, warn, error, critical or off. Default: warn.
std::shared_ptr<spdlog::logger> logger();

/// Logs a warning the first time a given message is seen in this process.
void warn_once(const std::string& message);

}  // namespace ctes

#include "ctes/log.hpp"

#include <cstdlib>
#include <mutex>
#include <set>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace ctes {

std::shared_ptr<spdlog::logger> logger() {
  static std::once_flag once;
  static std::shared_ptr<spdlog::logger> log;
  std::call_once(once, [] {
    log = spdlog::stderr_color_mt("ctes");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("CTES_LOG")) {
      level = spdlog::level::from_str(env);
      // from_str maps unknown names to off
      if (level == spdlog::level::off && std::string_view(env) != "off") level = spdlog::level::warn;
    }
    log->set_level(level);
    log->set_pattern("[%l] %v");
  });
  return log;
}

void warn_once(const std::string& message) {
  static std::mutex mutex;
  static std::set<std::string> seen;
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (!seen.insert(message).second) return;
  }
  logger()->warn("{}", message);
}

}  // namespace ctes

#include "popproj/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace popproj {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto log = spdlog::stderr_color_mt("popproj");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("POPPROJ_LOG_LEVEL")) {
      level = spdlog::level::from_str(env);
    }
    log->set_level(level);
    log->set_pattern("[%l] %v");
    return log;
  }();
  return *instance;
}

}  // namespace popproj

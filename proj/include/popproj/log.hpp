#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace popproj {

/// Shared logger writing to stderr. The level is read once from the
/// POPPROJ_LOG_LEVEL environment variable (trace, debug, info, warn, error,
/// off); default is warn.
spdlog::logger& logger();

}  // namespace popproj

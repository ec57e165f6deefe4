#pragma once

#include <string_view>

namespace safelayer::detail {

// Logs a warning through spdlog. Repeated warnings with the same key are
// thinned out after the first few so hot loops cannot flood the log.
void warn_throttled(std::string_view key, std::string_view message);

}  // namespace safelayer::detail

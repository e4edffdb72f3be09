#include "ftcbf/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_sinks.h>

namespace ftcbf {

spdlog::level::level_enum parse_log_level(const char* value) {
  const std::string_view v = value ? value : "";
  if (v == "debug") return spdlog::level::debug;
  if (v == "info") return spdlog::level::info;
  return spdlog::level::err;
}

spdlog::logger& logger() {
  static const auto instance = [] {
    auto l = std::make_shared<spdlog::logger>(
        "ftcbf", std::make_shared<spdlog::sinks::stderr_sink_st>());
    l->set_level(parse_log_level(std::getenv("FTCBF_LOG")));
    l->set_pattern("[%l] %v");
    return l;
  }();
  return *instance;
}

}  // namespace ftcbf

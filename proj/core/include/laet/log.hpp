#pragma once

#include <spdlog/spdlog.h>

#include <utility>

// Thin wrapper over a stderr spdlog logger whose level comes from the
// LAET_LOG environment variable (error | warn | info | debug; default warn).
namespace laet::log {

spdlog::logger& logger();

template <typename... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
    logger().debug(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
    logger().info(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
    logger().warn(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void error(fmt::format_string<Args...> fmt, Args&&... args) {
    logger().error(fmt, std::forward<Args>(args)...);
}

} // namespace laet::log

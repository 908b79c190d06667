#include "laet/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <string_view>

namespace laet::log {

namespace {

spdlog::level::level_enum level_from_env() {
    const char* raw = std::getenv("LAET_LOG");
    const std::string_view v = raw == nullptr ? "" : raw;
    if (v == "error") {
        return spdlog::level::err;
    }
    if (v == "info") {
        return spdlog::level::info;
    }
    if (v == "debug") {
        return spdlog::level::debug;
    }
    return spdlog::level::warn;
}

} // namespace

spdlog::logger& logger() {
    static const std::shared_ptr<spdlog::logger> instance = [] {
        auto l = spdlog::stderr_color_mt("laet");
        l->set_level(level_from_env());
        l->set_pattern("[%H:%M:%S] [%^%l%$] %v");
        return l;
    }();
    return *instance;
}

} // namespace laet::log

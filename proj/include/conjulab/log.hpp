#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace conjulab::log {

enum class Level { off = 0, error = 1, warn = 2, info = 3, debug = 4 };

inline Level level_from_env() {
    const char* raw = std::getenv("CONJULAB_LOG");
    if (raw == nullptr) return Level::warn;
    std::string v(raw);
    if (v == "off" || v == "0") return Level::off;
    if (v == "error") return Level::error;
    if (v == "warn") return Level::warn;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::warn;
}

inline Level& threshold() {
    static Level lvl = level_from_env();
    return lvl;
}

inline void emit(Level lvl, const char* tag, const std::string& msg) {
    if (static_cast<int>(lvl) <= static_cast<int>(threshold()))
        std::cerr << "[conjulab " << tag << "] " << msg << '\n';
}

inline void error(const std::string& msg) { emit(Level::error, "error", msg); }
inline void warn(const std::string& msg) { emit(Level::warn, "warn", msg); }
inline void info(const std::string& msg) { emit(Level::info, "info", msg); }
inline void debug(const std::string& msg) { emit(Level::debug, "debug", msg); }

} // namespace conjulab::log

#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace spectag::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Verbosity comes from the SPECTAG_LOG environment variable
// (error|warn|info|debug); default is warn.
inline Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("SPECTAG_LOG");
        if (!env) return Level::kWarn;
        const std::string v(env);
        if (v == "error") return Level::kError;
        if (v == "warn") return Level::kWarn;
        if (v == "info") return Level::kInfo;
        if (v == "debug") return Level::kDebug;
        return Level::kWarn;
    }();
    return level;
}

inline std::mutex& mutex() {
    static std::mutex m;
    return m;
}

inline void write(Level level, const std::string& msg) {
    if (level > threshold()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(mutex());
    std::cerr << "[spectag:" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

inline void error(const std::string& msg) { write(Level::kError, msg); }
inline void warn(const std::string& msg) { write(Level::kWarn, msg); }
inline void info(const std::string& msg) { write(Level::kInfo, msg); }
inline void debug(const std::string& msg) { write(Level::kDebug, msg); }

} // namespace spectag::log

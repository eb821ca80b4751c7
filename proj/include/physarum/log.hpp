#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace physarum::log {

enum class Level { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

/// Log level from PHYSARUM_BP_LOG (quiet|warn|info|debug), default warn.
inline Level level() {
    static const Level cached = [] {
        const char* env = std::getenv("PHYSARUM_BP_LOG");
        if (!env) return Level::Warn;
        if (std::strcmp(env, "quiet") == 0) return Level::Quiet;
        if (std::strcmp(env, "info") == 0) return Level::Info;
        if (std::strcmp(env, "debug") == 0) return Level::Debug;
        return Level::Warn;
    }();
    return cached;
}

inline void emit(Level at, const char* fmt, ...) {
    if (static_cast<int>(at) > static_cast<int>(level())) return;
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
    va_end(args);
}

#define PHYSARUM_WARN(...) ::physarum::log::emit(::physarum::log::Level::Warn, __VA_ARGS__)
#define PHYSARUM_INFO(...) ::physarum::log::emit(::physarum::log::Level::Info, __VA_ARGS__)
#define PHYSARUM_DEBUG(...) ::physarum::log::emit(::physarum::log::Level::Debug, __VA_ARGS__)

}  // namespace physarum::log

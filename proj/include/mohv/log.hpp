#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace mohv::log {

enum class Level { debug = 0, info = 1, warning = 2, error = 3, off = 4 };

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {
inline std::mutex& mutex() {
    static std::mutex m;
    return m;
}
inline Level& threshold() {
    static Level level = Level::warning;
    return level;
}
inline Sink& sink() {
    static Sink s = [](Level level, std::string_view msg) {
        static constexpr char const* names[] = {"debug", "info", "warning", "error", "off"};
        std::clog << "[mohv " << names[static_cast<int>(level)] << "] " << msg << '\n';
    };
    return s;
}
} // namespace detail

inline void set_level(Level level) {
    std::lock_guard lock(detail::mutex());
    detail::threshold() = level;
}

inline Level level() {
    std::lock_guard lock(detail::mutex());
    return detail::threshold();
}

// Replace the output sink. Returns the previous one so tests can restore it.
inline Sink set_sink(Sink sink) {
    std::lock_guard lock(detail::mutex());
    std::swap(detail::sink(), sink);
    return sink;
}

inline void write(Level lvl, std::string_view msg) {
    std::lock_guard lock(detail::mutex());
    if (lvl < detail::threshold()) return;
    if (detail::sink()) detail::sink()(lvl, msg);
}

inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warning, msg); }
inline void error(std::string_view msg) { write(Level::error, msg); }

} // namespace mohv::log

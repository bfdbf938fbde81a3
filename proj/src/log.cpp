#include "dcnar/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace dcnar::log {

namespace {
std::atomic<Level> current_level{Level::warning};
std::mutex sink_mutex;
} // namespace

void set_level(Level level) { current_level = level; }
Level level() { return current_level; }

void warn(std::string_view message)
{
    if (current_level.load() < Level::warning)
        return;
    std::lock_guard lock(sink_mutex);
    std::clog << "warning: " << message << '\n';
}

void info(std::string_view message)
{
    if (current_level.load() < Level::info)
        return;
    std::lock_guard lock(sink_mutex);
    std::clog << message << '\n';
}

} // namespace dcnar::log

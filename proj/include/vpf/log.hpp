#pragma once

#include <string_view>

namespace vpf::log {

enum class Level { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

void set_level(Level level);
Level level();

void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

/// Number of warnings emitted since process start (counted even when muted).
std::size_t warning_count();

}  // namespace vpf::log

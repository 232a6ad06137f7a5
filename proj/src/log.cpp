#include "vpf/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace vpf::log {

namespace {
std::atomic<Level> g_level{Level::Warn};
std::atomic<std::size_t> g_warnings{0};
std::mutex g_mutex;

void emit(const char* tag, std::string_view msg) {
  std::lock_guard lock(g_mutex);
  std::clog << '[' << tag << "] " << msg << '\n';
}
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void warn(std::string_view msg) {
  ++g_warnings;
  if (g_level >= Level::Warn) emit("warn", msg);
}

void info(std::string_view msg) {
  if (g_level >= Level::Info) emit("info", msg);
}

void debug(std::string_view msg) {
  if (g_level >= Level::Debug) emit("debug", msg);
}

std::size_t warning_count() { return g_warnings; }

}  // namespace vpf::log

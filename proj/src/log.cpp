#include "kgcal/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace kgcal::log {
namespace {

std::atomic<Level> g_level{Level::warning};
std::mutex g_mutex;

void emit(Level at, std::string_view tag, std::string_view message) {
  if (at < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[kgcal " << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void debug(std::string_view message) { emit(Level::debug, "debug", message); }
void info(std::string_view message) { emit(Level::info, "info", message); }
void warn(std::string_view message) { emit(Level::warning, "warn", message); }
void error(std::string_view message) { emit(Level::error, "error", message); }

}  // namespace kgcal::log

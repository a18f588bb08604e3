#include "atp/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace atp::log {
namespace {

std::atomic<Level> g_level{Level::warning};
std::mutex g_mutex;

void emit(Level lvl, std::string_view tag, std::string_view msg) {
  if (lvl < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::cerr << '[' << tag << "] " << msg << '\n';
}

}  // namespace

void set_level(Level lvl) { g_level.store(lvl); }
Level level() { return g_level.load(); }

void debug(std::string_view msg) { emit(Level::debug, "debug", msg); }
void info(std::string_view msg) { emit(Level::info, "info", msg); }
void warning(std::string_view msg) { emit(Level::warning, "warn", msg); }
void error(std::string_view msg) { emit(Level::error, "error", msg); }

}  // namespace atp::log

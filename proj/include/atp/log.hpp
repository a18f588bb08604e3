#pragma once

#include <string_view>

namespace atp::log {

enum class Level { debug = 0, info = 1, warning = 2, error = 3, silent = 4 };

void set_level(Level level);
Level level();

void debug(std::string_view msg);
void info(std::string_view msg);
void warning(std::string_view msg);
void error(std::string_view msg);

}  // namespace atp::log

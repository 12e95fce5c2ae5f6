#pragma once

#include <iostream>
#include <sstream>
#include <string_view>

namespace verse::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, quiet = 4 };

Level threshold();
void set_threshold(Level level);

void write(Level level, std::string_view message);

template <class... Args>
void info(const Args&... args) {
  if (threshold() > Level::info) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::info, os.str());
}

template <class... Args>
void warn(const Args&... args) {
  if (threshold() > Level::warn) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::warn, os.str());
}

template <class... Args>
void debug(const Args&... args) {
  if (threshold() > Level::debug) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::debug, os.str());
}

}  // namespace verse::log

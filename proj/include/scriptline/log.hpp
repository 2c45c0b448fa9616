// Copyright 2026 The scriptline Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iostream>
#include <mutex>
#include <sstream>
#include <string_view>

namespace scriptline::log {

enum class Level { kQuiet = 0, kWarning = 1, kInfo = 2 };

inline Level& threshold() {
  static Level level = Level::kInfo;
  return level;
}

inline void set_level(Level level) { threshold() = level; }

namespace detail {
inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

template <typename... Args>
void emit(Level level, std::string_view tag, Args&&... args) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::ostringstream oss;
  oss << tag;
  (oss << ... << std::forward<Args>(args));
  oss << '\n';
  std::lock_guard<std::mutex> lock(sink_mutex());
  std::clog << oss.str();
}
}  // namespace detail

template <typename... Args>
void info(Args&&... args) {
  detail::emit(Level::kInfo, "[scriptline] ", std::forward<Args>(args)...);
}

template <typename... Args>
void warn(Args&&... args) {
  detail::emit(Level::kWarning, "[scriptline] warning: ", std::forward<Args>(args)...);
}

}  // namespace scriptline::log

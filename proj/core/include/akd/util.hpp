// Copyright 2026 The akd Authors
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

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "akd/error.hpp"
#include "akd/rng.hpp"

namespace akd {

/// Shortest decimal form that parses back to the identical float.
inline std::string format_float(float v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline float parse_float(std::string_view s, const std::string& context) {
  float v = 0.0f;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(context + ": not a float: '" + std::string(s) + "'");
  }
  return v;
}

inline long long parse_int(std::string_view s, const std::string& context) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(context + ": not an integer: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_view(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::uint64_t hash_floats(const std::vector<float>& v,
                                 std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(v.data(), v.size() * sizeof(float), h);
}

inline std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::uint64_t hash_file(const std::string& path);

/// Keep large allocations on the heap free lists instead of handing them back
/// to the OS after every training step. Call once at program start; no-op on
/// non-glibc platforms and never affects results, only syscall traffic.
void tune_allocator();

}  // namespace akd

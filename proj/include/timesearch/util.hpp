#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace timesearch {

// 64-bit FNV-1a, used to fingerprint prompt templates and output artifacts.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fnv1a64_hex(std::string_view data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return std::string(buf);
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Timestamp token rendered next to each retrieved frame, one decimal place.
inline std::string format_timestamp(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1fs", seconds);
  return std::string(buf);
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return std::string(buf);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("short write: " + path);
}

inline bool file_exists(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return static_cast<bool>(in);
}

// Even-stride subsample: `want` picks out of `available`, index i maps to
// round(i * (available-1) / (want-1)). Strictly increasing when want > 1.
inline std::vector<int> strided_indices(int available, int want) {
  std::vector<int> out;
  if (available <= 0 || want <= 0) return out;
  if (want >= available) {
    out.resize(static_cast<std::size_t>(available));
    for (int i = 0; i < available; ++i) out[static_cast<std::size_t>(i)] = i;
    return out;
  }
  if (want == 1) {
    out.push_back(0);
    return out;
  }
  out.reserve(static_cast<std::size_t>(want));
  for (int i = 0; i < want; ++i) {
    double pos = static_cast<double>(i) * static_cast<double>(available - 1) /
                 static_cast<double>(want - 1);
    out.push_back(static_cast<int>(std::llround(pos)));
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace timesearch

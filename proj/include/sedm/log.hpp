#pragma once

#include <cstdio>
#include <initializer_list>
#include <string>
#include <utility>

namespace sedm {

using KvList = std::initializer_list<std::pair<const char*, std::string>>;

// Structured log line: `LEVEL key=value key=value ...`
inline void logkv(const char* level, KvList kvs) {
    std::string line(level);
    for (const auto& [k, v] : kvs) {
        line += ' ';
        line += k;
        line += '=';
        const bool needs_quotes = v.find(' ') != std::string::npos || v.empty();
        if (needs_quotes) line += '"';
        line += v;
        if (needs_quotes) line += '"';
    }
    std::fprintf(stderr, "%s\n", line.c_str());
}

inline void log_info(KvList kvs) { logkv("INFO", kvs); }
inline void log_warn(KvList kvs) { logkv("WARN", kvs); }
inline void log_error(KvList kvs) { logkv("ERROR", kvs); }

}  // namespace sedm

#pragma once

#include <map>
#include <string>
#include <vector>

namespace sedm {

/// Flat key-value configuration with `[section]` headers; keys are stored as
/// "section.key". Lines starting with '#' and blank lines are ignored.
struct KvConfig {
    std::map<std::string, std::string> values;

    static KvConfig parse_string(const std::string& text);
    static KvConfig parse_file(const std::string& path);
    std::string serialize() const;

    bool has(const std::string& key) const { return values.count(key) != 0; }
    void set(const std::string& key, const std::string& v) { values[key] = v; }

    std::string get_str(const std::string& key, const std::string& def) const;
    int get_int(const std::string& key, int def) const;
    long long get_i64(const std::string& key, long long def) const;
    double get_double(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::vector<int> get_int_list(const std::string& key,
                                  const std::vector<int>& def) const;
    std::vector<std::string> get_str_list(const std::string& key) const;
};

}  // namespace sedm

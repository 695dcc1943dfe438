#include "sedm/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sedm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::parse_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config: bad section header at line " +
                                         std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value at line " +
                                     std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config: empty key at line " +
                                     std::to_string(lineno));
        cfg.values[section.empty() ? key : section + "." + key] = val;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_string(ss.str());
}

std::string KvConfig::serialize() const {
    std::ostringstream os;
    std::string section;
    for (const auto& [k, v] : values) {
        const auto dot = k.find('.');
        const std::string sec = dot == std::string::npos ? "" : k.substr(0, dot);
        const std::string name = dot == std::string::npos ? k : k.substr(dot + 1);
        if (sec != section) {
            section = sec;
            os << "[" << section << "]\n";
        }
        os << name << " = " << v << "\n";
    }
    return os.str();
}

std::string KvConfig::get_str(const std::string& key, const std::string& def) const {
    const auto it = values.find(key);
    return it == values.end() ? def : it->second;
}

int KvConfig::get_int(const std::string& key, int def) const {
    const auto it = values.find(key);
    if (it == values.end()) return def;
    return std::stoi(it->second);
}

long long KvConfig::get_i64(const std::string& key, long long def) const {
    const auto it = values.find(key);
    if (it == values.end()) return def;
    return std::stoll(it->second);
}

double KvConfig::get_double(const std::string& key, double def) const {
    const auto it = values.find(key);
    if (it == values.end()) return def;
    return std::stod(it->second);
}

bool KvConfig::get_bool(const std::string& key, bool def) const {
    const auto it = values.find(key);
    if (it == values.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: bad boolean for " + key + ": " + v);
}

std::vector<int> KvConfig::get_int_list(const std::string& key,
                                        const std::vector<int>& def) const {
    const auto it = values.find(key);
    if (it == values.end()) return def;
    std::vector<int> out;
    std::istringstream is(it->second);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

std::vector<std::string> KvConfig::get_str_list(const std::string& key) const {
    const auto it = values.find(key);
    std::vector<std::string> out;
    if (it == values.end()) return out;
    std::istringstream is(it->second);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

}  // namespace sedm

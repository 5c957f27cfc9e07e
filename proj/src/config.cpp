#include "matchlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace matchlab {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        cfg.set(section, key, value);
    }
    return cfg;
}

const std::string* Config::find(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return nullptr;
    for (const auto& [k, v] : it->second)
        if (k == key) return &v;
    return nullptr;
}

bool Config::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::string Config::get(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
    const std::string* v = find(section, key);
    return v ? *v : fallback;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    try {
        return std::stod(*v);
    } catch (...) {
        throw ConfigError("config: [" + section + "] " + key + " is not a number: " + *v);
    }
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    try {
        return std::stoi(*v);
    } catch (...) {
        throw ConfigError("config: [" + section + "] " + key + " is not an integer: " + *v);
    }
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key,
                              std::uint64_t fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    try {
        return std::stoull(*v);
    } catch (...) {
        throw ConfigError("config: [" + section + "] " + key + " is not an integer: " + *v);
    }
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(), ::tolower);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config: [" + section + "] " + key + " is not a boolean: " + *v);
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ConfigError("config: [" + section + "] " + key + " has a bad number: " + item);
        }
    }
    if (out.empty())
        throw ConfigError("config: [" + section + "] " + key + " is an empty list");
    return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    auto& entries = sections_[section];
    for (auto& [k, v] : entries) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries.emplace_back(key, value);
}

void Config::validate_known_keys(
    const std::map<std::string, std::set<std::string>>& allowed) const {
    for (const auto& [section, entries] : sections_) {
        auto it = allowed.find(section);
        if (it == allowed.end()) throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, value] : entries) {
            if (!it->second.count(key)) {
                throw ConfigError("config: unknown key '" + key + "' in section [" + section +
                                  "]");
            }
        }
    }
}

std::string Config::to_string() const {
    std::ostringstream out;
    auto emit = [&out](const std::vector<std::pair<std::string, std::string>>& entries) {
        for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
    };
    auto global = sections_.find("");
    if (global != sections_.end()) emit(global->second);
    for (const auto& [section, entries] : sections_) {
        if (section.empty()) continue;
        out << "[" << section << "]\n";
        emit(entries);
    }
    return out.str();
}

void Config::write(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw IoFailure("cannot write config: " + path.string());
    f << to_string();
}

}  // namespace matchlab

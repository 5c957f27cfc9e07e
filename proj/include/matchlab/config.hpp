#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "matchlab/types.hpp"

namespace matchlab {

// Flat sections of `key = value` lines; '#' starts a comment. Keys outside
// any section live in the "" section. Unknown keys are rejected against the
// per-section registries declared by the consumers.
class Config {
  public:
    Config() = default;

    static Config parse_file(const std::filesystem::path& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);

    // Throws ConfigError on any key not covered by `allowed`
    // (section -> key set); sections absent from `allowed` are rejected too.
    void validate_known_keys(const std::map<std::string, std::set<std::string>>& allowed) const;

    // Resolved-config snapshot, parse_file-compatible.
    void write(const std::filesystem::path& path) const;
    std::string to_string() const;

  private:
    // section -> key -> value, insertion-ordered per section for stable output
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
    const std::string* find(const std::string& section, const std::string& key) const;
};

}  // namespace matchlab

// Minimal INI-style config: `[section]` headers, `key = value` pairs,
// `#`/`;` comments, comma-separated lists.
#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mindiff/errors.hpp"

namespace mindiff {

class IniConfig {
public:
    static IniConfig parse_string(const std::string& text, const std::string& origin = "<string>") {
        IniConfig cfg;
        std::istringstream in(text);
        std::string line, section;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = trim(strip_comment(line));
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
                section = trim(s.substr(1, s.size() - 2));
                if (section.empty())
                    throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
                cfg.sections_[section];
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(s.substr(0, eq));
            const std::string value = trim(s.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            auto& sec = cfg.sections_[section];
            if (sec.count(key))
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                                  "' in section [" + section + "]");
            sec[key] = value;
        }
        return cfg;
    }

    static IniConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        return parse_string(buf.str(), path);
    }

    bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

    bool has(const std::string& section, const std::string& key) const {
        auto it = sections_.find(section);
        return it != sections_.end() && it->second.count(key) > 0;
    }

    std::optional<std::string> find(const std::string& section, const std::string& key) const {
        auto it = sections_.find(section);
        if (it == sections_.end()) return std::nullopt;
        auto jt = it->second.find(key);
        if (jt == it->second.end()) return std::nullopt;
        return jt->second;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        auto v = find(section, key);
        return v ? *v : fallback;
    }

    std::string require_string(const std::string& section, const std::string& key) const {
        auto v = find(section, key);
        if (!v) throw ConfigError("config: missing required key '" + key + "' in section [" + section + "]");
        return *v;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        auto v = find(section, key);
        return v ? to_double(section, key, *v) : fallback;
    }

    std::size_t get_size(const std::string& section, const std::string& key, std::size_t fallback) const {
        auto v = find(section, key);
        if (!v) return fallback;
        const double d = to_double(section, key, *v);
        if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
            throw ConfigError("config: [" + section + "] " + key + " must be a non-negative integer");
        return static_cast<std::size_t>(d);
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const {
        auto v = find(section, key);
        if (!v) return fallback;
        std::uint64_t out = 0;
        const std::string s = *v;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw ConfigError("config: [" + section + "] " + key + " must be an unsigned integer");
        return out;
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        auto v = find(section, key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
        if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
        throw ConfigError("config: [" + section + "] " + key + " must be a boolean");
    }

    std::vector<std::string> get_string_list(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        auto v = find(section, key);
        if (!v) return out;
        std::size_t start = 0;
        const std::string& s = *v;
        while (start <= s.size()) {
            auto comma = s.find(',', start);
            if (comma == std::string::npos) comma = s.size();
            const std::string item = trim(s.substr(start, comma - start));
            if (!item.empty()) out.push_back(item);
            start = comma + 1;
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : get_string_list(section, key)) out.push_back(to_double(section, key, item));
        return out;
    }

    // Strict validation: every key present in the file must be declared.
    void check_known_keys(const std::map<std::string, std::vector<std::string>>& allowed) const {
        for (const auto& [section, kv] : sections_) {
            auto it = allowed.find(section);
            if (it == allowed.end())
                throw ConfigError("config: unknown section [" + section + "]");
            for (const auto& [key, _] : kv) {
                bool ok = false;
                for (const auto& k : it->second)
                    if (k == key) {
                        ok = true;
                        break;
                    }
                if (!ok)
                    throw ConfigError("config: unknown key '" + key + "' in section [" + section + "]");
            }
        }
    }

private:
    static std::string strip_comment(const std::string& s) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (!quoted && (s[i] == '#' || s[i] == ';')) return s.substr(0, i);
        }
        return s;
    }

    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double to_double(const std::string& section, const std::string& key, const std::string& s) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw ConfigError("config: [" + section + "] " + key + " = '" + s + "' is not a number");
        return v;
    }

    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace mindiff

#pragma once

// Flat `key = value` configuration files (TOML subset): numbers, booleans,
// quoted strings, flat or nested numeric arrays, `#` comments. Section
// headers and dotted keys are not supported.

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "xresponse/common.hpp"

namespace xresponse {

class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in) {
        KeyValueConfig cfg;
        std::string line;
        int line_no = 0;
        std::string pending_key, pending_value;
        int depth = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string_view t = strip_comment(line);
            t = trim(t);
            if (t.empty()) continue;
            if (depth > 0) {  // continuation of a multi-line array
                pending_value += ' ';
                pending_value += t;
                depth += bracket_delta(t);
                if (depth == 0) cfg.values_[pending_key] = pending_value;
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string_view::npos || t.front() == '[')
                throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(line_no) + ": expected key = value");
            const std::string key(trim(t.substr(0, eq)));
            const std::string value(trim(t.substr(eq + 1)));
            if (key.empty() || value.empty())
                throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(line_no) + ": empty key or value");
            if (cfg.values_.count(key) != 0)
                throw Error(ErrorCode::InvalidConfig, "config key '" + key + "' set twice");
            depth = bracket_delta(value);
            if (depth > 0) {
                pending_key = key;
                pending_value = value;
            } else {
                cfg.values_[key] = value;
            }
        }
        if (depth != 0) throw Error(ErrorCode::InvalidConfig, "unterminated array for key '" + pending_key + "'");
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& raw() const noexcept { return values_; }

    std::string get_string(const std::string& key) const {
        std::string_view v = at(key);
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
        return std::string(v);
    }

    double get_double(const std::string& key) const {
        double out = 0.0;
        if (!parse_double(at(key), out)) throw bad(key, "a number");
        return out;
    }

    std::int64_t get_int(const std::string& key) const {
        std::int64_t out = 0;
        if (!parse_int(at(key), out)) throw bad(key, "an integer");
        return out;
    }

    std::uint64_t get_uint(const std::string& key) const {
        std::uint64_t out = 0;
        if (!parse_int(at(key), out)) throw bad(key, "a non-negative integer");
        return out;
    }

    bool get_bool(const std::string& key) const {
        const auto v = at(key);
        if (v == "true") return true;
        if (v == "false") return false;
        throw bad(key, "true or false");
    }

    /// A scalar is returned as a one-element list.
    std::vector<double> get_list(const std::string& key) const {
        std::string_view v = at(key);
        if (v.front() != '[') return {get_double(key)};
        if (v.back() != ']') throw bad(key, "an array");
        return parse_numbers(key, v.substr(1, v.size() - 2));
    }

    std::vector<std::string> get_string_list(const std::string& key) const {
        std::string_view v = at(key);
        if (v.front() != '[' || v.back() != ']') throw bad(key, "an array of strings");
        std::vector<std::string> out;
        for (auto f : split(v.substr(1, v.size() - 2), ',')) {
            f = trim(f);
            if (f.empty()) continue;
            if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
            out.emplace_back(f);
        }
        return out;
    }

    std::vector<std::vector<double>> get_matrix(const std::string& key) const {
        std::string_view v = trim(at(key));
        if (v.size() < 4 || v.front() != '[' || v.back() != ']') throw bad(key, "a nested array");
        v = trim(v.substr(1, v.size() - 2));
        std::vector<std::vector<double>> rows;
        while (!v.empty()) {
            if (v.front() != '[') throw bad(key, "a nested array");
            const auto close = v.find(']');
            if (close == std::string_view::npos) throw bad(key, "a nested array");
            rows.push_back(parse_numbers(key, v.substr(1, close - 1)));
            v = trim(v.substr(close + 1));
            if (!v.empty() && v.front() == ',') v = trim(v.substr(1));
        }
        return rows;
    }

private:
    std::string_view at(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw Error(ErrorCode::InvalidConfig, "missing config key '" + key + "'");
        return it->second;
    }

    static Error bad(const std::string& key, const char* what) {
        return Error(ErrorCode::InvalidConfig, "config key '" + key + "' must be " + what);
    }

    static std::vector<double> parse_numbers(const std::string& key, std::string_view body) {
        std::vector<double> out;
        for (auto f : split(body, ',')) {
            f = trim(f);
            if (f.empty()) continue;
            double d = 0.0;
            if (!parse_double(f, d)) throw bad(key, "an array of numbers");
            out.push_back(d);
        }
        return out;
    }

    static std::string_view strip_comment(std::string_view s) {
        bool in_str = false;
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (s[k] == '"') in_str = !in_str;
            if (s[k] == '#' && !in_str) return s.substr(0, k);
        }
        return s;
    }

    static int bracket_delta(std::string_view s) {
        int d = 0;
        for (char c : s) d += (c == '[') - (c == ']');
        return d;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace xresponse

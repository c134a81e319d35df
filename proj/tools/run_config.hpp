#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xresponse/config.hpp"
#include "xresponse/response.hpp"

namespace xresponse::cli {

namespace fs = std::filesystem;

/// Thrown by commands to end the run with a specific exit status.
struct ExitError : std::runtime_error {
    ExitError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
    int code;
};

inline constexpr int kExitParse = 2;
inline constexpr int kExitMissing = 3;
inline constexpr int kExitDegenerate = 4;
inline constexpr int kExitValidation = 5;

/// Resolved run settings: defaults, then the config file, then flags.
struct RunConfig {
    fs::path data_dir = "data";
    fs::path cache_dir;  // empty: <output_dir>/cache
    fs::path output_dir = "out";
    fs::path sector_map;
    std::vector<std::string> symbols;  // empty: discover
    std::string lags = "default";
    std::string convention = "both";
    int jobs = 1;
    KeyValueConfig file;  // raw config-file keys, for the synth section

    fs::path cache() const { return cache_dir.empty() ? output_dir / "cache" : cache_dir; }

    LagSpec lag_spec() const {
        if (lags == "default") return LagSpec::defaults();
        return LagSpec::parse(lags);
    }

    std::vector<Convention> conventions() const {
        if (convention == "both") return {Convention::include_zeros, Convention::exclude_zeros};
        return {parse_convention(convention)};
    }

    /// Everything that can change an output; `jobs` is left out on purpose.
    nlohmann::json to_json() const {
        nlohmann::json extra = nlohmann::json::object();
        for (const auto& [k, v] : file.raw())
            if (!is_run_key(k)) extra[k] = v;
        return nlohmann::json{{"data_dir", data_dir.generic_string()},
                              {"cache_dir", cache().generic_string()},
                              {"output_dir", output_dir.generic_string()},
                              {"sector_map", sector_map.generic_string()},
                              {"symbols", symbols},
                              {"lags", lag_spec().to_string()},
                              {"convention", convention},
                              {"extra", extra}};
    }

    static bool is_run_key(const std::string& k) {
        static const std::set<std::string> keys{"data_dir",  "cache_dir",  "output_dir", "sector_map",
                                                "symbols",   "lags",       "convention", "jobs"};
        return keys.count(k) != 0;
    }

    static bool is_known_key(const std::string& k) {
        static const std::set<std::string> synth{"n_stocks",     "n_days",      "seed",         "trade_prob",
                                                 "persist_prob", "impact",      "impact_self",  "impact_cross",
                                                 "noise_sigma",  "base_price",  "spread",       "start_day",
                                                 "session_length"};
        return is_run_key(k) || synth.count(k) != 0;
    }

    void load_file(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw ExitError(kExitParse, "cannot open config file " + path.string());
        file = KeyValueConfig::parse(in);
        for (const auto& [k, v] : file.raw())
            if (!is_known_key(k)) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + k + "'");
        if (file.has("data_dir")) data_dir = file.get_string("data_dir");
        if (file.has("cache_dir")) cache_dir = file.get_string("cache_dir");
        if (file.has("output_dir")) output_dir = file.get_string("output_dir");
        if (file.has("sector_map")) sector_map = file.get_string("sector_map");
        if (file.has("lags")) lags = file.get_string("lags");
        if (file.has("convention")) convention = file.get_string("convention");
        if (file.has("jobs")) jobs = static_cast<int>(file.get_int("jobs"));
        if (file.has("symbols")) {
            const auto raw = file.raw().at("symbols");
            if (!raw.empty() && raw.front() == '[')
                symbols = file.get_string_list("symbols");
            else
                symbols = split_symbols(file.get_string("symbols"));
        }
    }

    void validate() const {
        if (jobs < 1) throw Error(ErrorCode::InvalidConfig, "jobs must be >= 1");
        if (convention != "both") (void)parse_convention(convention);
        (void)lag_spec();
    }

    static std::vector<std::string> split_symbols(std::string_view s) {
        std::vector<std::string> out;
        for (auto f : split(s, ',')) {
            f = trim(f);
            if (!f.empty()) out.emplace_back(f);
        }
        return out;
    }
};

}  // namespace xresponse::cli

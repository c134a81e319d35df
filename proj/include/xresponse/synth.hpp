#pragma once

// Synthetic multi-stock tick data with known sign persistence and linear
// permanent cross-impact, plus the closed-form response it implies.
//
// Generator, per day and per second t (one trade per stock per second at most):
//   1. every stock quotes bid/ask = m_i(t) -/+ spread/2;
//   2. stock j trades with probability q_j; the sign repeats the previous
//      trade's sign with probability p_j and flips otherwise (first trade
//      of a day: fair coin); buys lift the ask, sells hit the bid;
//   3. log m_i(t+1) = log m_i(t) + sum_j lambda_ij eps_j(t) + N(0, sigma^2).
//
// Closed form. Stocks are independent and the sign chain has lag-one
// correlation rho = 2p - 1 per trade, so for s >= 1 seconds
//   E[eps_j(t+s) eps_j(t)] = q^2 rho (1 - q + q rho)^(s-1),
// (s-1 intermediate seconds each carry a further factor rho with
// probability q), and E[eps_j(t)^2] = q. Since r_i(t,tau) is the sum of the
// increments at seconds t..t+tau-1,
//   R_ij(tau) = lambda_ij [ q + sum_{s=1}^{tau-1} q^2 rho (1-q+q rho)^(s-1) ]
// including zero signs, and R_ij / q excluding them.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xresponse/common.hpp"
#include "xresponse/config.hpp"
#include "xresponse/ingest.hpp"
#include "xresponse/response.hpp"

namespace xresponse {

struct SynthConfig {
    int n_stocks = 4;
    int n_days = 5;
    std::uint64_t seed = 42;
    std::vector<double> trade_prob;              // per stock
    std::vector<double> persist_prob;            // per stock
    std::vector<std::vector<double>> impact;     // impact[i][j]: i's log-price per unit sign of j
    double noise_sigma = 1e-5;
    double base_price = 100.0;
    double spread = 0.05;
    int session_length = kSessionSeconds;
    std::string start_day = "2008-01-02";

    /// Default universe: trade probabilities spread over [0.4, 0.8],
    /// persistence 0.75, self-impact 1e-4, cross-impact 5e-6 to 1.5e-5.
    static SynthConfig defaults(int n_stocks = 4) {
        SynthConfig c;
        c.n_stocks = n_stocks;
        c.fill_defaults();
        return c;
    }

    /// Fills any per-stock field left empty.
    void fill_defaults() {
        const auto n = static_cast<std::size_t>(std::max(n_stocks, 0));
        if (trade_prob.empty())
            for (std::size_t k = 0; k < n; ++k)
                trade_prob.push_back(n == 1 ? 0.8 : 0.8 - 0.4 * static_cast<double>(k) / static_cast<double>(n - 1));
        if (persist_prob.empty()) persist_prob.assign(n, 0.75);
        if (impact.empty()) {
            impact.assign(n, std::vector<double>(n, 0.0));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    impact[i][j] = i == j ? 1e-4 : 5e-6 * static_cast<double>(1 + (i + 2 * j) % 3);
        }
    }

    void validate() const {
        auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
        if (n_stocks < 1) fail("n_stocks must be >= 1");
        if (n_days < 1) fail("n_days must be >= 1");
        if (session_length < 2) fail("session_length must be >= 2");
        const auto n = static_cast<std::size_t>(n_stocks);
        if (trade_prob.size() != n) fail("trade_prob needs one entry per stock");
        if (persist_prob.size() != n) fail("persist_prob needs one entry per stock");
        for (double q : trade_prob)
            if (!(q >= 0.0 && q <= 1.0)) fail("trade_prob outside [0,1]");
        for (double p : persist_prob)
            if (!(p >= 0.0 && p <= 1.0)) fail("persist_prob outside [0,1]");
        if (impact.size() != n) fail("impact must be n_stocks x n_stocks");
        for (const auto& row : impact) {
            if (row.size() != n) fail("impact must be n_stocks x n_stocks");
            for (double v : row)
                if (!std::isfinite(v)) fail("impact entries must be finite");
        }
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be >= 0");
        if (!(spread > 0.0)) fail("spread must be > 0");
        if (!(base_price > spread / 2.0)) fail("base_price must exceed spread/2");
        Day check(start_day);
        (void)check;
    }

    std::string symbol(int k) const {
        std::string s = std::to_string(k);
        while (s.size() < 2) s.insert(s.begin(), '0');
        return "SYN" + s;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"n_stocks", n_stocks},     {"n_days", n_days},
                              {"seed", seed},             {"trade_prob", trade_prob},
                              {"persist_prob", persist_prob}, {"impact", impact},
                              {"noise_sigma", noise_sigma}, {"base_price", base_price},
                              {"spread", spread},         {"session_length", session_length},
                              {"start_day", start_day}};
    }

    /// Reads the synthetic-market keys from a config file; other keys are ignored.
    static SynthConfig from(const KeyValueConfig& kv) {
        SynthConfig c;
        if (kv.has("n_stocks")) c.n_stocks = static_cast<int>(kv.get_int("n_stocks"));
        if (kv.has("n_days")) c.n_days = static_cast<int>(kv.get_int("n_days"));
        if (kv.has("seed")) c.seed = kv.get_uint("seed");
        if (kv.has("noise_sigma")) c.noise_sigma = kv.get_double("noise_sigma");
        if (kv.has("base_price")) c.base_price = kv.get_double("base_price");
        if (kv.has("spread")) c.spread = kv.get_double("spread");
        if (kv.has("start_day")) c.start_day = kv.get_string("start_day");
        if (kv.has("session_length")) c.session_length = static_cast<int>(kv.get_int("session_length"));
        const auto n = static_cast<std::size_t>(std::max(c.n_stocks, 0));
        auto per_stock = [&](const std::string& key) {
            auto v = kv.get_list(key);
            if (v.size() == 1 && n > 1) v.assign(n, v.front());
            return v;
        };
        if (kv.has("trade_prob")) c.trade_prob = per_stock("trade_prob");
        if (kv.has("persist_prob")) c.persist_prob = per_stock("persist_prob");
        if (kv.has("impact")) {
            c.impact = kv.get_matrix("impact");
        } else if (kv.has("impact_self") || kv.has("impact_cross")) {
            const double self = kv.has("impact_self") ? kv.get_double("impact_self") : 0.0;
            const double cross = kv.has("impact_cross") ? kv.get_double("impact_cross") : 0.0;
            c.impact.assign(n, std::vector<double>(n, cross));
            for (std::size_t i = 0; i < n; ++i) c.impact[i][i] = self;
        }
        c.fill_defaults();
        return c;
    }
};

/// Generated market: tables[stock][day] plus the true per-trade signs.
struct SynthMarket {
    std::vector<std::string> symbols;
    std::vector<Day> days;
    std::vector<std::vector<TickTable>> tables;
    std::vector<std::vector<std::vector<std::int8_t>>> true_signs;
};

/// Weekdays starting at `start` (inclusive).
inline std::vector<Day> weekday_calendar(const std::string& start, int n) {
    int y = std::stoi(start.substr(0, 4)), m = std::stoi(start.substr(5, 2)), d = std::stoi(start.substr(8, 2));
    auto days_in_month = [](int yy, int mm) {
        static constexpr int dm[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        const bool leap = (yy % 4 == 0 && yy % 100 != 0) || yy % 400 == 0;
        return mm == 2 && leap ? 29 : dm[mm - 1];
    };
    // Sakamoto's day-of-week, 0 = Sunday.
    auto weekday = [](int yy, int mm, int dd) {
        static constexpr int t[] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
        if (mm < 3) yy -= 1;
        return (yy + yy / 4 - yy / 100 + yy / 400 + t[mm - 1] + dd) % 7;
    };
    std::vector<Day> out;
    while (static_cast<int>(out.size()) < n) {
        const int wd = weekday(y, m, d);
        if (wd != 0 && wd != 6) {
            char buf[11];
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
            out.emplace_back(buf);
        }
        if (++d > days_in_month(y, m)) {
            d = 1;
            if (++m > 12) {
                m = 1;
                ++y;
            }
        }
    }
    return out;
}

inline SynthMarket generate(const SynthConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(config.n_stocks);
    const int len = config.session_length;
    SynthMarket market;
    for (int k = 0; k < config.n_stocks; ++k) market.symbols.push_back(config.symbol(k));
    market.days = weekday_calendar(config.start_day, config.n_days);
    market.tables.assign(n, {});
    market.true_signs.assign(n, {});

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> lots(1, 10);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> log_mid(n, std::log(config.base_price));
    const double half = config.spread / 2.0;
    std::vector<int> eps(n, 0);

    for (const auto& day : market.days) {
        std::vector<TickTable> tables(n);
        std::vector<std::vector<std::int8_t>> signs(n);
        std::vector<int> last_sign(n, 0);
        for (std::size_t k = 0; k < n; ++k) {
            tables[k].symbol = market.symbols[k];
            tables[k].day = day;
            tables[k].session_length = len;
            tables[k].quotes.reserve(static_cast<std::size_t>(len));
        }
        for (int t = 0; t < len; ++t) {
            for (std::size_t k = 0; k < n; ++k) {
                const double mid = std::exp(log_mid[k]);
                tables[k].quotes.push_back(QuoteRecord{t, 0, mid - half, mid + half, false});
            }
            for (std::size_t j = 0; j < n; ++j) {
                eps[j] = 0;
                if (unif(rng) >= config.trade_prob[j]) continue;
                int s = 0;
                if (last_sign[j] == 0)
                    s = unif(rng) < 0.5 ? 1 : -1;
                else
                    s = unif(rng) < config.persist_prob[j] ? last_sign[j] : -last_sign[j];
                last_sign[j] = s;
                eps[j] = s;
                const auto& q = tables[j].quotes.back();
                tables[j].trades.push_back(TradeRecord{t, 0, s > 0 ? q.ask : q.bid, 100 * lots(rng)});
                signs[j].push_back(static_cast<std::int8_t>(s));
            }
            for (std::size_t i = 0; i < n; ++i) {
                double dx = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    if (eps[j] != 0) dx += config.impact[i][j] * eps[j];
                if (config.noise_sigma > 0.0) dx += config.noise_sigma * gauss(rng);
                log_mid[i] += dx;
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            market.tables[k].push_back(std::move(tables[k]));
            market.true_signs[k].push_back(std::move(signs[k]));
        }
    }
    return market;
}

/// Lag-s autocovariance E[eps_j(t+s) eps_j(t)] of stock j's one-second signs.
inline double expected_sign_covariance(const SynthConfig& config, int j, int s) {
    const double q = config.trade_prob.at(static_cast<std::size_t>(j));
    const double rho = 2.0 * config.persist_prob.at(static_cast<std::size_t>(j)) - 1.0;
    if (s == 0) return q;
    return q * q * rho * std::pow(1.0 - q + q * rho, s - 1);
}

/// Closed-form R_ij(tau) under the generator (see file comment).
inline double expected_response(const SynthConfig& config, int i, int j, int tau,
                                Convention convention = Convention::include_zeros) {
    config.validate();
    if (i < 0 || j < 0 || i >= config.n_stocks || j >= config.n_stocks || tau < 0)
        throw Error(ErrorCode::InvalidConfig, "expected_response: index or lag out of range");
    const double lambda = config.impact[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    double persistence = 0.0;
    for (int s = 0; s < tau; ++s) persistence += expected_sign_covariance(config, j, s);
    const double inc = lambda * persistence;
    if (convention == Convention::include_zeros) return inc;
    const double q = config.trade_prob[static_cast<std::size_t>(j)];
    return q > 0.0 ? inc / q : 0.0;
}

/// Closed-form Theta_ij(tau); zero across distinct stocks.
inline double expected_correlator(const SynthConfig& config, int i, int j, int tau,
                                  Convention convention = Convention::include_zeros) {
    if (i != j) return 0.0;
    const double cov = expected_sign_covariance(config, j, tau);
    if (convention == Convention::include_zeros) return cov;
    const double q = config.trade_prob.at(static_cast<std::size_t>(j));
    return q > 0.0 ? cov / q : 0.0;
}

/// 64-bit FNV-1a, used for config fingerprints in manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int k = 15; k >= 0; --k, v >>= 4) s[static_cast<std::size_t>(k)] = digits[v & 0xF];
    return s;
}

/// Path layout shared with the CLI: <root>/<SYMBOL>/<YYYY-MM-DD>.{trades,quotes}.csv
inline std::filesystem::path trades_path(const std::filesystem::path& root, const std::string& sym, const Day& day) {
    return root / sym / (day.str() + ".trades.csv");
}

inline std::filesystem::path quotes_path(const std::filesystem::path& root, const std::string& sym, const Day& day) {
    return root / sym / (day.str() + ".quotes.csv");
}

/// Writes the trades/quotes CSVs plus sectors.csv (every stock in sector "SYN").
/// The returned manifest, also saved as manifest.json, records seed and config hash.
inline nlohmann::json write_market(const SynthMarket& market, const SynthConfig& config,
                                   const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    SessionWindow window;
    window.close = window.open + config.session_length;
    fs::create_directories(root);
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t k = 0; k < market.symbols.size(); ++k) {
        fs::create_directories(root / market.symbols[k]);
        for (std::size_t d = 0; d < market.days.size(); ++d) {
            const auto& table = market.tables[k][d];
            const auto tp = trades_path(root, market.symbols[k], market.days[d]);
            const auto qp = quotes_path(root, market.symbols[k], market.days[d]);
            std::ofstream tout(tp, std::ios::binary), qout(qp, std::ios::binary);
            if (!tout || !qout) throw Error(ErrorCode::Io, "cannot write " + tp.string());
            write_trades_csv(tout, table, window);
            write_quotes_csv(qout, table, window);
            files.push_back(fs::relative(tp, root).generic_string());
            files.push_back(fs::relative(qp, root).generic_string());
        }
    }
    {
        std::ofstream sec(root / "sectors.csv", std::ios::binary);
        sec << "symbol,sector\n";
        for (const auto& s : market.symbols) sec << s << ",SYN\n";
    }
    const auto cfg = config.to_json();
    nlohmann::json manifest{{"seed", config.seed},
                            {"config", cfg},
                            {"config_hash", hex64(fnv1a64(cfg.dump()))},
                            {"symbols", market.symbols},
                            {"files", files}};
    std::vector<std::string> days;
    for (const auto& d : market.days) days.push_back(d.str());
    manifest["days"] = days;
    std::ofstream mout(root / "manifest.json", std::ios::binary);
    mout << manifest.dump(2) << '\n';
    return manifest;
}

}  // namespace xresponse

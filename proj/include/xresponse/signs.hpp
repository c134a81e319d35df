#pragma once

// Trade signs, one-second aggregation, midpoint series and activity stats.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "xresponse/common.hpp"
#include "xresponse/ingest.hpp"

namespace xresponse {

/// One stock, one day on the uniform one-second grid.
///
/// `mid` uses NaN for "no quote yet"; `eps` is the aggregated sign in
/// {-1, 0, +1}; `n_trades` is N(t).
struct SecondGrid {
    std::string symbol;
    Day day;
    std::vector<std::int8_t> eps;
    std::vector<double> mid;
    std::vector<std::uint16_t> n_trades;

    int length() const noexcept { return static_cast<int>(eps.size()); }
    bool has_mid(int t) const noexcept { return !std::isnan(mid[static_cast<std::size_t>(t)]); }

    friend bool operator==(const SecondGrid& a, const SecondGrid& b) {
        if (a.symbol != b.symbol || a.day != b.day || a.eps != b.eps || a.n_trades != b.n_trades ||
            a.mid.size() != b.mid.size())
            return false;
        for (std::size_t k = 0; k < a.mid.size(); ++k) {
            const bool na = std::isnan(a.mid[k]), nb = std::isnan(b.mid[k]);
            if (na != nb || (!na && a.mid[k] != b.mid[k])) return false;
        }
        return true;
    }
};

/// Per-trade signs from consecutive price changes.
///
/// A price move sets the sign; an unchanged price inherits the previous
/// sign. Trades before the first price change of the day have no
/// predecessor sign and get 0.
inline std::vector<std::int8_t> trade_signs(std::span<const TradeRecord> trades) {
    std::vector<std::int8_t> signs(trades.size(), 0);
    for (std::size_t n = 1; n < trades.size(); ++n) {
        const double diff = trades[n].price - trades[n - 1].price;
        if (diff > 0.0)
            signs[n] = 1;
        else if (diff < 0.0)
            signs[n] = -1;
        else
            signs[n] = signs[n - 1];
    }
    return signs;
}

struct SecondSigns {
    std::vector<std::int8_t> eps;
    std::vector<std::uint16_t> n_trades;
};

/// eps[t] = sgn(sum of trade signs in second t); 0 with no trades.
/// n_trades saturates at 65535 to fit the cache column.
inline SecondSigns second_signs(std::span<const TradeRecord> trades, std::span<const std::int8_t> signs,
                                int length) {
    if (trades.size() != signs.size())
        throw Error(ErrorCode::InvalidArgument, "trades and signs differ in length");
    SecondSigns out;
    out.eps.assign(static_cast<std::size_t>(length), 0);
    out.n_trades.assign(static_cast<std::size_t>(length), 0);
    std::vector<std::int64_t> net(static_cast<std::size_t>(length), 0);
    for (std::size_t n = 0; n < trades.size(); ++n) {
        const int t = trades[n].timestamp;
        if (t < 0 || t >= length) throw Error(ErrorCode::InvalidArgument, "trade outside grid");
        net[static_cast<std::size_t>(t)] += signs[n];
        auto& count = out.n_trades[static_cast<std::size_t>(t)];
        if (count < std::numeric_limits<std::uint16_t>::max()) ++count;
    }
    for (std::size_t t = 0; t < net.size(); ++t)
        out.eps[t] = static_cast<std::int8_t>((net[t] > 0) - (net[t] < 0));
    return out;
}

/// Forward-filled quote midpoint; NaN before the first quote.
inline std::vector<double> midpoint_series(std::span<const QuoteRecord> quotes, int length) {
    if (quotes.empty()) throw Error(ErrorCode::NoQuotes, "no quotes for the day");
    std::vector<double> mid(static_cast<std::size_t>(length), std::numeric_limits<double>::quiet_NaN());
    std::size_t q = 0;
    double current = std::numeric_limits<double>::quiet_NaN();
    for (int t = 0; t < length; ++t) {
        while (q < quotes.size() && quotes[q].timestamp <= t) current = quotes[q++].midpoint();
        mid[static_cast<std::size_t>(t)] = current;
    }
    return mid;
}

inline SecondGrid build_grid(const TickTable& table) {
    const auto signs = trade_signs(table.trades);
    auto agg = second_signs(table.trades, signs, table.session_length);
    return SecondGrid{table.symbol, table.day, std::move(agg.eps),
                      midpoint_series(table.quotes, table.session_length), std::move(agg.n_trades)};
}

// ---------------------------------------------------------------------------
// Activity statistics
// ---------------------------------------------------------------------------

struct ActivityStats {
    std::string symbol;
    double f = 0.0;                  // relative trading frequency
    double avg_daily_trades = 0.0;   // mean over days of sum |eps|
    std::int64_t t_trading = 0;      // seconds with eps != 0
    std::int64_t t_quiet = 0;        // seconds with eps == 0
    std::int64_t n_days = 0;
};

inline ActivityStats activity_stats(std::span<const SecondGrid> grids) {
    if (grids.empty()) throw Error(ErrorCode::InvalidArgument, "activity_stats needs at least one day");
    ActivityStats s;
    s.symbol = grids.front().symbol;
    for (const auto& g : grids) {
        for (const auto e : g.eps) {
            if (e != 0)
                ++s.t_trading;
            else
                ++s.t_quiet;
        }
    }
    s.n_days = static_cast<std::int64_t>(grids.size());
    s.f = static_cast<double>(s.t_trading) / static_cast<double>(s.t_trading + s.t_quiet);
    s.avg_daily_trades = static_cast<double>(s.t_trading) / static_cast<double>(s.n_days);
    return s;
}

// ---------------------------------------------------------------------------
// Columnar grid cache
//
// Layout, little-endian:
//   bytes 0..11   "XRSPGRID0001"
//   bytes 12..15  reserved, zero
//   L x i8        eps
//   L x f64       mid (NaN = absent)
//   L x u16       n_trades
// L is recovered from the payload size (11 bytes per second).
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 12> kGridMagic{'X', 'R', 'S', 'P', 'G', 'R', 'I', 'D', '0', '0', '0', '1'};
inline constexpr std::size_t kGridHeaderSize = 16;

namespace detail {

template <typename T>
void put_le(std::string& buf, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace detail

inline std::string encode_grid(const SecondGrid& grid) {
    const auto n = static_cast<std::size_t>(grid.length());
    std::string buf;
    buf.reserve(kGridHeaderSize + n * 11);
    buf.append(kGridMagic.data(), kGridMagic.size());
    buf.append(4, '\0');
    for (const auto e : grid.eps) detail::put_le(buf, e);
    for (const auto m : grid.mid)
        detail::put_le(buf, std::isnan(m) ? std::numeric_limits<double>::quiet_NaN() : m);
    for (const auto c : grid.n_trades) detail::put_le(buf, c);
    return buf;
}

inline SecondGrid decode_grid(std::string_view bytes, std::string symbol, Day day) {
    if (bytes.size() < kGridHeaderSize || std::memcmp(bytes.data(), kGridMagic.data(), kGridMagic.size()) != 0)
        throw Error(ErrorCode::CacheFormat, "bad grid cache magic for " + symbol + " " + day.str());
    const auto payload = bytes.size() - kGridHeaderSize;
    if (payload % 11 != 0)
        throw Error(ErrorCode::CacheFormat, "truncated grid cache for " + symbol + " " + day.str());
    const auto n = payload / 11;
    SecondGrid g{std::move(symbol), std::move(day), {}, {}, {}};
    g.eps.resize(n);
    g.mid.resize(n);
    g.n_trades.resize(n);
    const char* p = bytes.data() + kGridHeaderSize;
    for (std::size_t t = 0; t < n; ++t, p += 1) {
        const auto e = detail::get_le<std::int8_t>(p);
        if (e < -1 || e > 1) throw Error(ErrorCode::CacheFormat, "eps out of range in grid cache");
        g.eps[t] = e;
    }
    for (std::size_t t = 0; t < n; ++t, p += 8) g.mid[t] = detail::get_le<double>(p);
    for (std::size_t t = 0; t < n; ++t, p += 2) g.n_trades[t] = detail::get_le<std::uint16_t>(p);
    return g;
}

inline void write_grid(std::ostream& out, const SecondGrid& grid) {
    const auto buf = encode_grid(grid);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline SecondGrid read_grid(std::istream& in, std::string symbol, Day day) {
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_grid(bytes, std::move(symbol), std::move(day));
}

}  // namespace xresponse

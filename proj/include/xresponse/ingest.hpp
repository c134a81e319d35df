#pragma once

// Trades/quotes CSV ingestion, session-window filtering and calendar rules.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xresponse/common.hpp"

namespace xresponse {

// ---------------------------------------------------------------------------
// Clock and calendar types
// ---------------------------------------------------------------------------

/// Parses `HH:MM:SS` or `HH:MM:SS.f...` into seconds since midnight.
/// Fractional seconds are truncated. Returns -1 when malformed.
inline int parse_wall_time(std::string_view s) {
    s = trim(s);
    if (s.size() < 8 || s[2] != ':' || s[5] != ':') return -1;
    int hh = 0, mm = 0, ss = 0;
    if (!parse_int(s.substr(0, 2), hh) || !parse_int(s.substr(3, 2), mm) ||
        !parse_int(s.substr(6, 2), ss))
        return -1;
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59) return -1;
    if (s.size() > 8) {
        if (s[8] != '.' || s.size() == 9) return -1;
        for (char c : s.substr(9))
            if (c < '0' || c > '9') return -1;
    }
    return hh * 3600 + mm * 60 + ss;
}

inline std::string format_wall_time(int seconds_since_midnight) {
    const int hh = seconds_since_midnight / 3600;
    const int mm = (seconds_since_midnight / 60) % 60;
    const int ss = seconds_since_midnight % 60;
    std::string out(8, '0');
    out[0] = static_cast<char>('0' + hh / 10);
    out[1] = static_cast<char>('0' + hh % 10);
    out[2] = ':';
    out[3] = static_cast<char>('0' + mm / 10);
    out[4] = static_cast<char>('0' + mm % 10);
    out[5] = ':';
    out[6] = static_cast<char>('0' + ss / 10);
    out[7] = static_cast<char>('0' + ss % 10);
    return out;
}

/// Half-open trading session [open, close) in seconds since midnight.
struct SessionWindow {
    int open = 9 * 3600 + 40 * 60;
    int close = 15 * 3600 + 50 * 60;

    int length() const noexcept { return close - open; }

    /// Session-relative second for a wall-clock second, or -1 outside the window.
    int to_session(int wall) const noexcept {
        return (wall >= open && wall < close) ? wall - open : -1;
    }

    static SessionWindow parse(std::string_view text) {
        const auto dash = text.find('-');
        if (dash == std::string_view::npos)
            throw Error(ErrorCode::InvalidConfig, "session window must be HH:MM:SS-HH:MM:SS, got '" +
                                                      std::string(text) + "'");
        SessionWindow w;
        w.open = parse_wall_time(text.substr(0, dash));
        w.close = parse_wall_time(text.substr(dash + 1));
        if (w.open < 0 || w.close < 0 || w.close <= w.open)
            throw Error(ErrorCode::InvalidConfig, "invalid session window '" + std::string(text) + "'");
        return w;
    }

    /// Default window, overridden by XRESPONSE_SESSION when set.
    static SessionWindow from_env() {
        if (const char* env = std::getenv("XRESPONSE_SESSION"); env != nullptr && *env != '\0')
            return parse(env);
        return SessionWindow{};
    }

    std::string to_string() const { return format_wall_time(open) + "-" + format_wall_time(close); }

    friend bool operator==(const SessionWindow&, const SessionWindow&) = default;
};

/// Calendar date in ISO `YYYY-MM-DD` form; ordering is chronological.
class Day {
public:
    Day() = default;

    explicit Day(std::string iso) : iso_(std::move(iso)) {
        int y = 0, m = 0, d = 0;
        const bool ok = iso_.size() == 10 && iso_[4] == '-' && iso_[7] == '-' &&
                        parse_int(std::string_view(iso_).substr(0, 4), y) &&
                        parse_int(std::string_view(iso_).substr(5, 2), m) &&
                        parse_int(std::string_view(iso_).substr(8, 2), d) && m >= 1 && m <= 12 &&
                        d >= 1 && d <= 31;
        if (!ok) throw Error(ErrorCode::InvalidArgument, "day must be YYYY-MM-DD, got '" + iso_ + "'");
    }

    const std::string& str() const noexcept { return iso_; }

    friend auto operator<=>(const Day&, const Day&) = default;

private:
    std::string iso_;
};

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct TradeRecord {
    int timestamp = 0;  // seconds since session open
    int sequence = 0;   // file order within the second
    double price = 0.0;
    std::int64_t volume = 0;

    friend bool operator==(const TradeRecord&, const TradeRecord&) = default;
};

struct QuoteRecord {
    int timestamp = 0;
    int sequence = 0;
    double bid = 0.0;
    double ask = 0.0;
    bool crossed = false;  // bid >= ask; retained, midpoint still computed

    double midpoint() const noexcept { return (bid + ask) / 2.0; }

    friend bool operator==(const QuoteRecord&, const QuoteRecord&) = default;
};

struct TickTable {
    std::string symbol;
    Day day;
    int session_length = kSessionSeconds;
    std::vector<TradeRecord> trades;
    std::vector<QuoteRecord> quotes;

    friend bool operator==(const TickTable&, const TickTable&) = default;
};

/// Sorts records by (timestamp, sequence) and rejects duplicate keys or
/// timestamps outside [0, session_length).
template <typename Record>
void sort_records(std::vector<Record>& records, int session_length) {
    std::stable_sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.sequence < b.sequence;
    });
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        if (r.timestamp < 0 || r.timestamp >= session_length)
            throw Error(ErrorCode::InvalidArgument,
                        "timestamp " + std::to_string(r.timestamp) + " outside session");
        if (k > 0 && records[k - 1].timestamp == r.timestamp && records[k - 1].sequence == r.sequence)
            throw Error(ErrorCode::NonMonotonicTimestamps,
                        "duplicate (timestamp, sequence) = (" + std::to_string(r.timestamp) + ", " +
                            std::to_string(r.sequence) + ")");
    }
}

/// Builds a table from already-stamped records, enforcing ordering invariants.
inline TickTable make_tick_table(std::string symbol, Day day, std::vector<TradeRecord> trades,
                                 std::vector<QuoteRecord> quotes,
                                 int session_length = kSessionSeconds) {
    sort_records(trades, session_length);
    sort_records(quotes, session_length);
    for (const auto& t : trades)
        if (!(t.price > 0.0) || t.volume <= 0)
            throw Error(ErrorCode::InvalidArgument, "trade with non-positive price or volume");
    for (auto& q : quotes) {
        if (!(q.bid > 0.0) || !(q.ask > 0.0))
            throw Error(ErrorCode::InvalidArgument, "quote with non-positive bid or ask");
        q.crossed = q.bid >= q.ask;
    }
    return TickTable{std::move(symbol), std::move(day), session_length, std::move(trades),
                     std::move(quotes)};
}

// ---------------------------------------------------------------------------
// CSV parsing
// ---------------------------------------------------------------------------

/// Line accounting for one input file. Header and blank lines are not counted.
struct FileReport {
    std::int64_t lines_in = 0;
    std::int64_t retained = 0;
    std::int64_t dropped_window = 0;
    std::int64_t malformed = 0;
    std::int64_t crossed = 0;
    std::vector<std::string> diagnostics;  // first few malformed lines

    bool conserved() const noexcept { return lines_in == retained + dropped_window + malformed; }
};

struct ParseReport {
    FileReport trades;
    FileReport quotes;
};

struct ParsedDay {
    TickTable table;
    ParseReport report;
};

namespace detail {

inline constexpr std::size_t kMaxDiagnostics = 8;

inline void note_malformed(FileReport& rep, std::int64_t line_no, std::string_view line,
                           std::string_view why) {
    ++rep.malformed;
    if (rep.diagnostics.size() < kMaxDiagnostics)
        rep.diagnostics.push_back("line " + std::to_string(line_no) + ": " + std::string(why) +
                                  " ('" + std::string(line) + "')");
}

/// Reads the header line; returns false if the stream carries no bytes at all.
inline bool read_header(std::istream& in, std::string& header, std::int64_t& line_no) {
    std::string line;
    bool any = false;
    while (std::getline(in, line)) {
        any = true;
        ++line_no;
        auto t = trim(line);
        if (t.size() >= 3 && static_cast<unsigned char>(t[0]) == 0xEF &&
            static_cast<unsigned char>(t[1]) == 0xBB && static_cast<unsigned char>(t[2]) == 0xBF)
            t.remove_prefix(3);
        if (t.empty()) continue;
        header.assign(t);
        return true;
    }
    header.clear();
    return any;
}

/// Shared loop: `parse_fields` returns false on malformed content and
/// fills the wall time and payload otherwise.
template <typename Record, typename ParseFields>
std::vector<Record> parse_body(std::istream& in, std::string_view expected_header,
                               std::string_view what, const SessionWindow& window,
                               FileReport& rep, ParseFields parse_fields) {
    std::string header;
    std::int64_t line_no = 0;
    if (!read_header(in, header, line_no))
        throw Error(ErrorCode::EmptyFile, std::string(what) + " file is empty");
    if (header != expected_header)
        throw Error(ErrorCode::UnparseableHeader, std::string(what) + " header '" + header +
                                                      "', expected '" +
                                                      std::string(expected_header) + "'");

    std::vector<Record> out;
    std::string line;
    int file_index = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        ++rep.lines_in;
        const auto fields = split(t, ',');
        if (fields.size() != 3) {
            note_malformed(rep, line_no, t, "expected 3 fields");
            continue;
        }
        const int wall = parse_wall_time(fields[0]);
        if (wall < 0) {
            note_malformed(rep, line_no, t, "bad time");
            continue;
        }
        Record rec{};
        if (!parse_fields(fields, rec)) {
            note_malformed(rep, line_no, t, "bad value");
            continue;
        }
        const int sec = window.to_session(wall);
        if (sec < 0) {
            ++rep.dropped_window;
            continue;
        }
        rec.timestamp = sec;
        rec.sequence = file_index++;
        out.push_back(rec);
        ++rep.retained;
    }

    // File order breaks ties inside a second; renumber so sequence counts
    // from zero within each second.
    std::stable_sort(out.begin(), out.end(),
                     [](const Record& a, const Record& b) { return a.timestamp < b.timestamp; });
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k].sequence = (k > 0 && out[k - 1].timestamp == out[k].timestamp) ? out[k - 1].sequence + 1 : 0;
    return out;
}

}  // namespace detail

/// Parses one (symbol, day) pair of trades and quotes CSV streams.
///
/// Records outside the session window are dropped; lines that fail to
/// parse are counted in the report, never silently discarded. A stream
/// with a header and no rows is a valid empty day; a stream with no bytes
/// at all raises EmptyFile.
inline ParsedDay parse_ticks(std::istream& trades_in, std::istream& quotes_in, std::string symbol,
                             Day day, const SessionWindow& window = SessionWindow{}) {
    ParsedDay result;
    auto trades = detail::parse_body<TradeRecord>(
        trades_in, "time,price,volume", "trades", window, result.report.trades,
        [](const std::vector<std::string_view>& f, TradeRecord& r) {
            return parse_double(f[1], r.price) && parse_int(f[2], r.volume) && r.price > 0.0 &&
                   std::isfinite(r.price) && r.volume > 0;
        });
    auto quotes = detail::parse_body<QuoteRecord>(
        quotes_in, "time,bid,ask", "quotes", window, result.report.quotes,
        [](const std::vector<std::string_view>& f, QuoteRecord& r) {
            return parse_double(f[1], r.bid) && parse_double(f[2], r.ask) && r.bid > 0.0 &&
                   r.ask > 0.0 && std::isfinite(r.bid) && std::isfinite(r.ask);
        });
    for (auto& q : quotes) {
        q.crossed = q.bid >= q.ask;
        if (q.crossed) ++result.report.quotes.crossed;
    }
    result.table = TickTable{std::move(symbol), std::move(day), window.length(), std::move(trades),
                             std::move(quotes)};
    return result;
}

/// Writes trades back in the input schema, wall-clock seconds resolution.
inline void write_trades_csv(std::ostream& out, const TickTable& table,
                             const SessionWindow& window = SessionWindow{}) {
    out << "time,price,volume\n";
    for (const auto& t : table.trades)
        out << format_wall_time(window.open + t.timestamp) << ',' << format_double(t.price) << ','
            << t.volume << '\n';
}

inline void write_quotes_csv(std::ostream& out, const TickTable& table,
                             const SessionWindow& window = SessionWindow{}) {
    out << "time,bid,ask\n";
    for (const auto& q : table.quotes)
        out << format_wall_time(window.open + q.timestamp) << ',' << format_double(q.bid) << ','
            << format_double(q.ask) << '\n';
}

// ---------------------------------------------------------------------------
// Calendar rules
// ---------------------------------------------------------------------------

using Calendar = std::set<Day>;

/// Intersection of the trading calendars of `symbols`.
inline Calendar common_days(const std::map<std::string, Calendar>& calendars,
                            const std::set<std::string>& symbols) {
    if (symbols.empty()) throw Error(ErrorCode::InvalidArgument, "common_days needs at least one symbol");
    Calendar result;
    bool first = true;
    for (const auto& sym : symbols) {
        const auto it = calendars.find(sym);
        if (it == calendars.end())
            throw Error(ErrorCode::InvalidArgument, "no calendar for symbol '" + sym + "'");
        if (first) {
            result = it->second;
            first = false;
            continue;
        }
        Calendar next;
        std::set_intersection(result.begin(), result.end(), it->second.begin(), it->second.end(),
                              std::inserter(next, next.begin()));
        result = std::move(next);
    }
    return result;
}

/// Days on which the symbol actually traded; zero-trade days are excluded.
inline Calendar trading_calendar(std::span<const TickTable> tables) {
    Calendar days;
    for (const auto& t : tables)
        if (!t.trades.empty()) days.insert(t.day);
    return days;
}

/// Mean over trades of price x volume.
inline double average_market_cap(std::span<const TradeRecord> trades) {
    if (trades.empty()) throw Error(ErrorCode::NoTrades, "average_market_cap over zero trades");
    CompensatedSum sum;
    for (const auto& t : trades) sum.add(t.price * static_cast<double>(t.volume));
    return sum.value() / static_cast<double>(trades.size());
}

// ---------------------------------------------------------------------------
// Sector map
// ---------------------------------------------------------------------------

/// symbol -> sector, remembering file order of symbols and of first
/// appearance of each sector label.
class SectorMap {
public:
    void add(const std::string& symbol, const std::string& sector) {
        if (symbol.empty() || sector.empty())
            throw Error(ErrorCode::InvalidConfig, "empty symbol or sector in sector map");
        if (sector_of_.count(symbol) != 0)
            throw Error(ErrorCode::InvalidConfig, "symbol '" + symbol + "' listed twice in sector map");
        sector_of_.emplace(symbol, sector);
        symbols_.push_back(symbol);
        if (std::find(sectors_.begin(), sectors_.end(), sector) == sectors_.end())
            sectors_.push_back(sector);
    }

    /// Accepts an optional `symbol,sector` header; `#` starts a comment line.
    static SectorMap parse(std::istream& in) {
        SectorMap map;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto t = trim(line);
            if (t.empty() || t.front() == '#') continue;
            const auto f = split(t, ',');
            if (f.size() != 2)
                throw Error(ErrorCode::InvalidConfig,
                            "sector map line " + std::to_string(line_no) + ": expected symbol,sector");
            const auto sym = trim(f[0]);
            const auto sec = trim(f[1]);
            if (line_no == 1 && sym == "symbol" && sec == "sector") continue;
            map.add(std::string(sym), std::string(sec));
        }
        return map;
    }

    bool contains(const std::string& symbol) const { return sector_of_.count(symbol) != 0; }

    const std::string& sector_of(const std::string& symbol) const {
        const auto it = sector_of_.find(symbol);
        if (it == sector_of_.end())
            throw Error(ErrorCode::InvalidArgument, "symbol '" + symbol + "' not in sector map");
        return it->second;
    }

    std::vector<std::string> members(const std::string& sector) const {
        std::vector<std::string> out;
        for (const auto& s : symbols_)
            if (sector_of_.at(s) == sector) out.push_back(s);
        return out;
    }

    const std::vector<std::string>& symbols() const noexcept { return symbols_; }
    const std::vector<std::string>& sectors() const noexcept { return sectors_; }
    std::size_t size() const noexcept { return symbols_.size(); }

    /// Stable regrouping of `symbols` by sector, sectors in map order.
    /// Symbols absent from the map go last, in input order.
    std::vector<std::string> group_by_sector(const std::vector<std::string>& symbols) const {
        std::vector<std::string> out;
        out.reserve(symbols.size());
        for (const auto& sector : sectors_)
            for (const auto& s : symbols)
                if (contains(s) && sector_of(s) == sector) out.push_back(s);
        for (const auto& s : symbols)
            if (!contains(s)) out.push_back(s);
        return out;
    }

private:
    std::unordered_map<std::string, std::string> sector_of_;
    std::vector<std::string> symbols_;
    std::vector<std::string> sectors_;
};

}  // namespace xresponse

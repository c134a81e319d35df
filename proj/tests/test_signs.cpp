#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_support.hpp"
#include "xresponse/signs.hpp"

using namespace xresponse;
using testing_support::fixture;

namespace {

std::vector<TradeRecord> trades_at(const std::vector<double>& prices, int second = 0) {
    std::vector<TradeRecord> out;
    for (std::size_t k = 0; k < prices.size(); ++k)
        out.push_back(TradeRecord{second, static_cast<int>(k), prices[k], 100});
    return out;
}

std::vector<int> as_int(const std::vector<std::int8_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(TradeSigns, SpecExamples) {
    EXPECT_EQ(as_int(trade_signs(trades_at({10.00, 10.01}))), (std::vector<int>{0, 1}));
    EXPECT_EQ(as_int(trade_signs(trades_at({10.00, 10.01, 10.01, 9.99}))), (std::vector<int>{0, 1, 1, -1}));
    EXPECT_TRUE(trade_signs(std::vector<TradeRecord>{}).empty());
}

TEST(TradeSigns, TwentyTradeFixture) {
    const std::vector<double> prices{10.00, 10.00, 10.01, 10.01, 10.01, 10.00, 9.99,  9.99,  10.02, 10.02,
                                     10.03, 10.03, 10.01, 10.01, 10.01, 10.05, 10.04, 10.04, 10.04, 10.06};
    const auto got = as_int(trade_signs(trades_at(prices)));
    EXPECT_EQ(got, oracle::trade_signs(prices));
    // Written out by hand: the leading run has no prior move.
    EXPECT_EQ(got, (std::vector<int>{0, 0, 1, 1, 1, -1, -1, -1, 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1}));
}

TEST(TradeSigns, FuzzAgainstOracle) {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> step(-2, 2);
    for (int round = 0; round < 200; ++round) {
        std::vector<double> prices{50.0};
        const int n = 1 + static_cast<int>(rng() % 60);
        for (int k = 1; k < n; ++k) prices.push_back(prices.back() + 0.01 * step(rng));
        EXPECT_EQ(as_int(trade_signs(trades_at(prices))), oracle::trade_signs(prices));
    }
}

TEST(SecondSigns, BalancedSecondAndEmptySecond) {
    std::vector<TradeRecord> trades{{0, 0, 10.0, 1}, {0, 1, 10.0, 1}};
    const std::vector<std::int8_t> signs{1, -1};
    const auto s = second_signs(trades, signs, 3);
    EXPECT_EQ(s.eps[0], 0);
    EXPECT_EQ(s.n_trades[0], 2);
    EXPECT_EQ(s.eps[1], 0);
    EXPECT_EQ(s.n_trades[1], 0);
}

TEST(SecondSigns, FixtureDayAgainstPerSecondOracle) {
    std::mt19937 rng(17);
    const int len = 300;
    std::vector<TradeRecord> trades;
    std::vector<double> prices;
    for (int t = 0; t < len; ++t) {
        const int n = static_cast<int>(rng() % 4);
        for (int k = 0; k < n; ++k) {
            const double p = 20.0 + 0.01 * static_cast<double>(rng() % 7);
            trades.push_back(TradeRecord{t, k, p, 100});
            prices.push_back(p);
        }
    }
    const auto signs = trade_signs(trades);
    const auto s = second_signs(trades, signs, len);
    const auto osigns = oracle::trade_signs(prices);
    std::vector<std::pair<int, int>> sec_sign;
    for (std::size_t k = 0; k < trades.size(); ++k) sec_sign.emplace_back(trades[k].timestamp, osigns[k]);
    EXPECT_EQ(as_int(s.eps), oracle::second_eps(sec_sign, len));
    for (int t = 0; t < len; ++t) {
        int count = 0;
        for (const auto& tr : trades) count += tr.timestamp == t;
        EXPECT_EQ(s.n_trades[static_cast<std::size_t>(t)], count);
    }
}

TEST(MidpointSeries, Examples) {
    const auto one = midpoint_series(std::vector<QuoteRecord>{{0, 0, 10.0, 11.0, false}}, 5);
    for (double m : one) EXPECT_EQ(m, 10.5);
    const auto two = midpoint_series(std::vector<QuoteRecord>{{5, 0, 10.0, 10.2, false}, {10, 0, 11.0, 11.2, false}}, 12);
    EXPECT_TRUE(std::isnan(two[4]));
    EXPECT_EQ(two[7], two[5]);
    EXPECT_EQ(two[7], 10.1);
    EXPECT_EQ(two[11], 11.1);
    EXPECT_THROW(midpoint_series(std::vector<QuoteRecord>{}, 3), Error);
}

TEST(MidpointSeries, ThirtyQuoteFixtureAgainstStepOracle) {
    std::mt19937 rng(23);
    const int len = 120;
    std::vector<QuoteRecord> quotes;
    std::vector<std::tuple<int, double, double>> raw;
    for (int k = 0; k < 30; ++k) {
        const int t = 3 + static_cast<int>(rng() % 110);
        const double bid = 30.0 + 0.01 * static_cast<double>(rng() % 50);
        quotes.push_back(QuoteRecord{t, k, bid, bid + 0.02, false});
    }
    std::stable_sort(quotes.begin(), quotes.end(),
                     [](const QuoteRecord& a, const QuoteRecord& b) { return a.timestamp < b.timestamp; });
    for (const auto& q : quotes) raw.emplace_back(q.timestamp, q.bid, q.ask);
    const auto got = midpoint_series(quotes, len);
    const auto want = oracle::midpoints(raw, len);
    for (int t = 0; t < len; ++t) {
        if (std::isnan(want[static_cast<std::size_t>(t)]))
            EXPECT_TRUE(std::isnan(got[static_cast<std::size_t>(t)])) << t;
        else
            EXPECT_EQ(got[static_cast<std::size_t>(t)], want[static_cast<std::size_t>(t)]) << t;
    }
}

TEST(ActivityStats, Examples) {
    SecondGrid g{"A", Day("2008-01-02"), std::vector<std::int8_t>(22200, 0), std::vector<double>(22200, 1.0),
                 std::vector<std::uint16_t>(22200, 0)};
    EXPECT_EQ(activity_stats(std::vector<SecondGrid>{g}).f, 0.0);
    for (std::size_t t = 0; t < 22200; t += 2) g.eps[t] = 1;
    const auto s = activity_stats(std::vector<SecondGrid>{g});
    EXPECT_EQ(s.f, 0.5);
    EXPECT_EQ(s.t_trading, 11100);
    EXPECT_EQ(s.t_quiet, 11100);
}

TEST(ActivityStats, MultiDayCountingOracle) {
    std::mt19937 rng(29);
    std::vector<SecondGrid> grids;
    long long nonzero = 0, total = 0;
    for (int d = 0; d < 4; ++d) {
        SecondGrid g{"A", Day("2008-01-0" + std::to_string(d + 2)), {}, {}, {}};
        for (int t = 0; t < 1000; ++t) {
            const int e = static_cast<int>(rng() % 3) - 1;
            g.eps.push_back(static_cast<std::int8_t>(e));
            g.mid.push_back(1.0);
            g.n_trades.push_back(e != 0);
            nonzero += e != 0;
            ++total;
        }
        grids.push_back(g);
    }
    const auto s = activity_stats(grids);
    EXPECT_EQ(s.t_trading, nonzero);
    EXPECT_EQ(s.t_quiet, total - nonzero);
    EXPECT_EQ(s.f, static_cast<double>(nonzero) / static_cast<double>(total));
    EXPECT_EQ(s.avg_daily_trades, static_cast<double>(nonzero) / 4.0);
    EXPECT_EQ(s.n_days, 4);
}

TEST(GridCache, TinyDayGoldenBytes) {
    std::ifstream t(fixture("tiny_day.trades.csv")), q(fixture("tiny_day.quotes.csv"));
    const auto day = parse_ticks(t, q, "TINY", Day("2008-03-03"), SessionWindow::parse("09:40:00-09:40:08"));
    const auto bytes = encode_grid(build_grid(day.table));

    // Hand-built expectation: second 0 holds trades 10.01 then 10.02 (signs
    // 0, +1 -> eps +1, N = 2); the 10:00:00 trade is outside the window;
    // both quotes have midpoint 10.01.
    std::string want = "XRSPGRID0001";
    want.append(4, '\0');
    want.push_back('\x01');
    want.append(7, '\0');
    double mid = 10.01;
    char raw[8];
    std::memcpy(raw, &mid, 8);
    for (int k = 0; k < 8; ++k) want.append(raw, 8);
    want.append("\x02\x00", 2);
    want.append(14, '\0');
    ASSERT_EQ(bytes.size(), 16u + 8u * 11u);
    EXPECT_EQ(bytes, want);
}

TEST(GridCache, RoundTripPreservesNaNAndCounts) {
    SecondGrid g{"X", Day("2008-01-02"), {0, 1, -1, 0}, {std::nan(""), 10.5, 10.25, 10.25}, {0, 3, 65535, 0}};
    std::stringstream buf;
    write_grid(buf, g);
    const auto back = read_grid(buf, "X", Day("2008-01-02"));
    EXPECT_EQ(back, g);
    EXPECT_EQ(encode_grid(back), encode_grid(g));
}

TEST(GridCache, RejectsBadMagicAndTruncation) {
    SecondGrid g{"X", Day("2008-01-02"), {0, 1}, {1.0, 1.0}, {0, 1}};
    auto bytes = encode_grid(g);
    auto bad = bytes;
    bad[0] = 'Y';
    EXPECT_THROW(decode_grid(bad, "X", Day("2008-01-02")), Error);
    EXPECT_THROW(decode_grid(bytes.substr(0, bytes.size() - 1), "X", Day("2008-01-02")), Error);
}

TEST(GridCache, EncodingIsIdempotent) {
    std::ifstream t(fixture("tiny_day.trades.csv")), q(fixture("tiny_day.quotes.csv"));
    const auto a = parse_ticks(t, q, "TINY", Day("2008-03-03"));
    std::ifstream t2(fixture("tiny_day.trades.csv")), q2(fixture("tiny_day.quotes.csv"));
    const auto b = parse_ticks(t2, q2, "TINY", Day("2008-03-03"));
    EXPECT_EQ(encode_grid(build_grid(a.table)), encode_grid(build_grid(b.table)));
}

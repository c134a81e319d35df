#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_support.hpp"
#include "xresponse/aggregate.hpp"

using namespace xresponse;

namespace {

ResponseSeries make_series(SeriesKind kind, Convention conv, std::string i, std::string j,
                           const std::map<int, double>& values) {
    ResponseSeries s;
    s.kind = kind;
    s.convention = conv;
    s.i = std::move(i);
    s.j = std::move(j);
    for (const auto& [tau, v] : values) s.points[tau] = SeriesPoint{v, 0.0, 100};
    return s;
}

void put_cross(SeriesStore& store, const std::string& i, const std::string& j, const std::map<int, double>& v,
               Convention conv = Convention::include_zeros) {
    store.put(make_series(SeriesKind::cross_response, conv, i, j, v));
}

/// Every ordered pair of `syms` gets a random value at each lag.
SeriesStore random_store(const std::vector<std::string>& syms, const std::vector<int>& taus, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1e-4, 1e-4);
    SeriesStore store;
    for (const auto& i : syms)
        for (const auto& j : syms) {
            std::map<int, double> v;
            for (int t : taus) v[t] = u(rng);
            put_cross(store, i, j, v);
        }
    return store;
}

}  // namespace

TEST(Average, SinglePartnerEqualsPair) {
    SeriesStore store;
    put_cross(store, "A", "B", {{1, 2.5e-5}, {5, 3.0e-5}});
    const auto a = passive_average("A", {"A", "B"}, Convention::include_zeros, store);
    ASSERT_EQ(a.universe, (std::vector<std::string>{"B"}));
    EXPECT_EQ(a.at(1)->value, 2.5e-5);
    EXPECT_EQ(a.at(5)->value, 3.0e-5);
    EXPECT_EQ(a.at(1)->std_error, 0.0);
    EXPECT_EQ(a.at(1)->n_pairs, 1);
}

TEST(Average, OpposingPartnersCancel) {
    SeriesStore store;
    put_cross(store, "B", "A", {{1, 0.3}});
    put_cross(store, "C", "A", {{1, -0.3}});
    const auto a = active_average("A", {"A", "B", "C"}, Convention::include_zeros, store);
    EXPECT_EQ(a.at(1)->value, 0.0);
}

TEST(Average, FivePartnersAgainstSummationOracle) {
    const std::vector<std::string> syms{"A", "B", "C", "D", "E", "F"};
    const std::vector<int> taus{1, 2, 10, 100};
    const auto store = random_store(syms, taus, 3);
    const std::set<std::string> universe(syms.begin(), syms.end());
    for (const auto dir : {Direction::passive, Direction::active}) {
        const auto avg = average_series(SeriesKind::cross_response, dir, "C", universe, Convention::include_zeros, store);
        for (int tau : taus) {
            long double sum = 0, sq = 0;
            for (const auto& p : syms) {
                if (p == "C") continue;
                const auto* s = dir == Direction::passive
                                    ? store.find(SeriesKind::cross_response, Convention::include_zeros, "C", p)
                                    : store.find(SeriesKind::cross_response, Convention::include_zeros, p, "C");
                sum += s->at(tau)->value;
                sq += static_cast<long double>(s->at(tau)->value) * s->at(tau)->value;
            }
            const long double mean = sum / 5;
            const long double var = (sq - 5 * mean * mean) / 4;
            EXPECT_NEAR(avg.at(tau)->value, static_cast<double>(mean), 1e-18);
            EXPECT_NEAR(avg.at(tau)->std_error, static_cast<double>(std::sqrt(var / 5)), 1e-15);
            EXPECT_EQ(avg.at(tau)->n_pairs, 5);
        }
    }
}

TEST(Average, MissingPairIsNamed) {
    SeriesStore store;
    put_cross(store, "A", "B", {{1, 1.0}});
    try {
        passive_average("A", {"A", "B", "C"}, Convention::include_zeros, store);
        FAIL() << "expected MissingPairSeries";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingPairSeries);
        EXPECT_NE(std::string(e.what()).find("A->C"), std::string::npos);
    }
}

TEST(Average, AnchorOnlyUniverseRejected) {
    SeriesStore store;
    EXPECT_THROW(passive_average("A", {"A"}, Convention::include_zeros, store), Error);
}

TEST(Average, ConventionsAreKeptApart) {
    SeriesStore store;
    put_cross(store, "A", "B", {{1, 1.0}}, Convention::include_zeros);
    put_cross(store, "A", "B", {{1, 4.0}}, Convention::exclude_zeros);
    EXPECT_EQ(passive_average("A", {"B"}, Convention::exclude_zeros, store).at(1)->value, 4.0);
}

TEST(Sector, EmptySectorAndSingleMember) {
    SectorMap map;
    map.add("A", "X");
    map.add("B", "Y");
    SeriesStore store;
    put_cross(store, "A", "B", {{1, 0.7}});
    try {
        sector_average("A", Direction::passive, "X", map, Convention::include_zeros, store);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptySector);
    }
    EXPECT_EQ(sector_average("A", Direction::passive, "Y", map, Convention::include_zeros, store).at(1)->value, 0.7);
}

TEST(Sector, ThreeSectorFixture) {
    std::istringstream in("symbol,sector\nA,S1\nB,S1\nC,S2\nD,S2\nE,S2\nF,S3\n");
    const auto map = SectorMap::parse(in);
    const std::vector<std::string> syms{"A", "B", "C", "D", "E", "F"};
    const auto store = random_store(syms, {1, 60}, 9);
    for (const auto& sector : map.sectors()) {
        for (const auto& anchor : syms) {
            std::vector<double> vals;
            for (const auto& m : map.members(sector))
                if (m != anchor)
                    vals.push_back(store.find(SeriesKind::cross_response, Convention::include_zeros, m, anchor)
                                       ->at(60)
                                       ->value);
            if (vals.empty()) continue;
            long double sum = 0;
            for (double v : vals) sum += v;
            const auto avg =
                sector_average(anchor, Direction::active, sector, map, Convention::include_zeros, store);
            EXPECT_NEAR(avg.at(60)->value, static_cast<double>(sum / vals.size()), 1e-18) << anchor << sector;
            EXPECT_EQ(avg.at(60)->n_pairs, static_cast<std::int64_t>(vals.size()));
        }
    }
}

TEST(Matrix, TwoByTwo) {
    SeriesStore store;
    put_cross(store, "A", "B", {{60, 0.5}});
    put_cross(store, "B", "A", {{60, -1.0}});
    const auto m = response_matrix({"A", "B"}, 60, Convention::include_zeros, store);
    EXPECT_EQ(m(0, 1), 0.5);
    EXPECT_EQ(m(1, 0), -1.0);
    EXPECT_TRUE(std::isnan(m(0, 0)));
    EXPECT_EQ(m.max_abs, 1.0);
}

TEST(Matrix, AllEqualEntriesNormalizeToOne) {
    const std::vector<std::string> syms{"A", "B", "C"};
    SeriesStore store;
    for (const auto& i : syms)
        for (const auto& j : syms) put_cross(store, i, j, {{5, 3e-5}});
    const auto m = response_matrix(syms, 5, Convention::include_zeros, store);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            if (r != c) { EXPECT_EQ(m(r, c), 1.0); }
        }
    ASSERT_TRUE(m.diagonal[1].has_value());
    EXPECT_EQ(*m.diagonal[1], 3e-5);
}

TEST(Matrix, FourSymbolOracle) {
    const std::vector<std::string> syms{"A", "B", "C", "D"};
    const auto store = random_store(syms, {60}, 11);
    const auto m = response_matrix(syms, 60, Convention::include_zeros, store);
    double mx = 0.0;
    for (const auto& i : syms)
        for (const auto& j : syms)
            if (i != j)
                mx = std::max(mx, std::abs(store.find(SeriesKind::cross_response, Convention::include_zeros, i, j)
                                               ->at(60)
                                               ->value));
    double seen = 0.0;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            if (r == c) continue;
            const double raw =
                store.find(SeriesKind::cross_response, Convention::include_zeros, syms[r], syms[c])->at(60)->value;
            EXPECT_EQ(m(r, c), raw / mx);
            seen = std::max(seen, std::abs(m(r, c)));
        }
    EXPECT_EQ(seen, 1.0);
}

TEST(Matrix, DegenerateAndMissing) {
    SeriesStore store;
    put_cross(store, "A", "B", {{1, 0.0}});
    put_cross(store, "B", "A", {{1, 0.0}});
    try {
        response_matrix({"A", "B"}, 1, Convention::include_zeros, store);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateMax);
    }
    try {
        response_matrix({"A", "B"}, 2, Convention::include_zeros, store);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingPairSeries);
    }
}

TEST(Matrix, SectorBoundaries) {
    std::istringstream in("A,X\nB,Y\nC,X\nD,Y\n");
    const auto map = SectorMap::parse(in);
    const auto order = map.group_by_sector({"A", "B", "C", "D"});
    EXPECT_EQ(order, (std::vector<std::string>{"A", "C", "B", "D"}));
    const auto store = random_store(order, {1}, 2);
    const auto m = response_matrix(order, 1, Convention::include_zeros, store, &map);
    ASSERT_EQ(m.sector_boundaries.size(), 2u);
    EXPECT_EQ(m.sector_boundaries[0].sector, "X");
    EXPECT_EQ(m.sector_boundaries[0].end, 2u);
    EXPECT_EQ(m.sector_boundaries[1].begin, 2u);
    EXPECT_EQ(m.sector_boundaries[1].end, 4u);
}

TEST(Rank, Examples) {
    auto top = rank_values({{"A", 0.2}, {"B", 0.5}}, 1);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_EQ(top[0].symbol, "B");
    EXPECT_EQ(top[0].value, 1.0);

    const auto tie = rank_values({{"Z", 0.3}, {"M", 0.3}, {"A", 0.3}}, 3);
    EXPECT_EQ(tie[0].symbol, "A");
    EXPECT_EQ(tie[1].symbol, "M");
    EXPECT_EQ(tie[2].symbol, "Z");

    const auto by_abs = rank_values({{"A", 0.2}, {"B", -0.9}}, 2, true);
    EXPECT_EQ(by_abs[0].symbol, "B");
    EXPECT_EQ(by_abs[0].value, -1.0);
    const auto signed_order = rank_values({{"A", 0.2}, {"B", -0.9}}, 2, false);
    EXPECT_EQ(signed_order[0].symbol, "A");
}

TEST(Rank, TenSymbolsAgainstSortOracle) {
    std::vector<std::string> syms;
    for (char c = 'A'; c < 'A' + 10; ++c) syms.emplace_back(1, c);
    const std::vector<int> taus{1, 2, 60, 300};
    const auto store = random_store(syms, taus, 21);
    const std::set<std::string> universe(syms.begin(), syms.end());
    for (int tau : taus) {
        for (const auto dir : {Direction::passive, Direction::active}) {
            std::vector<std::pair<double, std::string>> oracle_vals;
            for (const auto& s : syms) {
                long double sum = 0;
                for (const auto& p : syms) {
                    if (p == s) continue;
                    const auto& [i, j] = dir == Direction::passive ? std::pair{s, p} : std::pair{p, s};
                    sum += store.find(SeriesKind::cross_response, Convention::include_zeros, i, j)->at(tau)->value;
                }
                oracle_vals.emplace_back(static_cast<double>(sum / 9), s);
            }
            std::sort(oracle_vals.begin(), oracle_vals.end(),
                      [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
            const auto r = rank_stocks(dir, tau, Convention::include_zeros, 5, universe, store);
            ASSERT_EQ(r.entries.size(), 5u);
            for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(r.entries[k].symbol, oracle_vals[k].second) << tau << k;
            for (std::size_t k = 1; k < 5; ++k) EXPECT_GE(r.entries[k - 1].value, r.entries[k].value);
        }
    }
}

TEST(Pearson, Examples) {
    EXPECT_EQ(pearson({1, 2, 3, 4}, {2, 4, 6, 8}), 1.0);
    EXPECT_EQ(pearson({1, 2, 3, 4}, {-2, -4, -6, -8}), -1.0);
    try {
        pearson({1, 2, 3}, {5, 5, 5});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateVariance);
    }
    EXPECT_THROW(pearson({1, 2}, {1, 2}), Error);
}

TEST(Pearson, TwentySymbolOracle) {
    std::mt19937 rng(31);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x, y;
    for (int k = 0; k < 20; ++k) {
        x.push_back(1e-5 * g(rng));
        y.push_back(1000.0 + 300.0 * g(rng) + 2e7 * x.back());
    }
    EXPECT_NEAR(pearson(x, y), oracle::pearson(x, y), 1e-12);
}

TEST(Pearson, TradeCountCorrelation) {
    std::map<std::string, double> active{{"A", 1.0}, {"B", 2.0}, {"C", 3.0}};
    std::map<std::string, ActivityStats> act;
    act["A"].avg_daily_trades = 10;
    act["B"].avg_daily_trades = 20;
    act["C"].avg_daily_trades = 30;
    EXPECT_EQ(trade_count_correlation(active, act), 1.0);
    act.erase("C");
    EXPECT_THROW(trade_count_correlation(active, act), Error);
}

TEST(AggregateIO, AverageCsvRoundTrip) {
    SeriesStore store;
    put_cross(store, "A", "B", {{1, 1.0 / 3.0}, {7, -2.5e-7}});
    put_cross(store, "A", "C", {{1, 0.1}, {7, 1e-300}});
    const auto avg = passive_average("A", {"B", "C"}, Convention::include_zeros, store);
    std::stringstream buf;
    write_average_csv(buf, avg);
    const auto back = read_average_csv(buf);
    ASSERT_EQ(back.size(), 2u);
    for (const auto& [tau, p] : avg.points) {
        EXPECT_EQ(back.at(tau).value, p.value);
        EXPECT_EQ(back.at(tau).std_error, p.std_error);
        EXPECT_EQ(back.at(tau).n_pairs, p.n_pairs);
    }
    std::istringstream bad("tau,value\n1,2\n");
    EXPECT_THROW(read_average_csv(bad), Error);
}

TEST(AggregateIO, MatrixAndRankingCsv) {
    SeriesStore store;
    put_cross(store, "A", "B", {{60, 0.5}});
    put_cross(store, "B", "A", {{60, -1.0}});
    std::ostringstream m;
    write_matrix_csv(m, response_matrix({"A", "B"}, 60, Convention::include_zeros, store));
    EXPECT_EQ(m.str(), "i\\j,A,B\nA,,0.5\nB,-1,\n");

    SectorMap map;
    map.add("A", "IT");
    std::ostringstream r;
    write_ranking_csv(r, Ranking{Direction::active, 60, Convention::include_zeros, false,
                                 rank_values({{"A", 0.5}, {"B", 0.25}}, 2)},
                      &map);
    EXPECT_EQ(r.str(), "rank,symbol,value,sector\n1,A,1,IT\n2,B,0.5,\n");
}

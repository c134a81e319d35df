#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "xresponse/response.hpp"

using namespace xresponse;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SecondGrid grid(const std::string& sym, const std::string& day, const std::vector<int>& eps,
                const std::vector<double>& mid) {
    SecondGrid g{sym, Day(day), {}, mid, {}};
    for (int e : eps) {
        g.eps.push_back(static_cast<std::int8_t>(e));
        g.n_trades.push_back(e != 0);
    }
    return g;
}

// The 12-second, two-stock fixture; A's first second has no quote.
const std::vector<int> kEpsA{0, 1, 1, 0, -1, 1, 0, 0, -1, 1, 1, 0};
const std::vector<double> kMidA{kNaN, 100, 100, 101, 101, 100, 102, 102, 101, 103, 103, 104};
const std::vector<int> kEpsB{1, 0, -1, 1, 1, 0, -1, 0, 1, -1, 0, 1};
const std::vector<double> kMidB{50, 50, 51, 51, 50, 50, 52, 52, 52, 51, 51, 52};

std::vector<SecondGrid> one(const SecondGrid& g) { return {g}; }

SecondGrid random_grid(std::mt19937& rng, const std::string& sym, const std::string& day, int len) {
    SecondGrid g{sym, Day(day), {}, {}, {}};
    double m = 40.0;
    for (int t = 0; t < len; ++t) {
        const int e = static_cast<int>(rng() % 3) - 1;
        g.eps.push_back(static_cast<std::int8_t>(e));
        g.n_trades.push_back(e != 0);
        m += 0.01 * (static_cast<double>(rng() % 5) - 2.0);
        g.mid.push_back(t < 3 ? kNaN : m);
    }
    return g;
}

}  // namespace

TEST(LagSpec, DefaultsAndParsing) {
    EXPECT_EQ(LagSpec::defaults().to_string(), "1,2,3,5,8,13,21,34,55,89,144,233,377,610,987");
    EXPECT_EQ(LagSpec::parse("1,2,60,300").lags(), (std::vector<int>{1, 2, 60, 300}));
    EXPECT_EQ(LagSpec::parse("3:6").lags(), (std::vector<int>{3, 4, 5, 6}));
    const auto lg = LagSpec::parse("1:1000:log:10");
    EXPECT_EQ(lg.lags().front(), 1);
    EXPECT_EQ(lg.lags().back(), 1000);
    EXPECT_THROW(LagSpec::parse("5,3"), Error);
    EXPECT_THROW(LagSpec::parse("1,22200"), Error);
    EXPECT_THROW(LagSpec::parse("a"), Error);
}

TEST(LogReturn, Examples) {
    const auto g = grid("A", "2008-01-02", {0, 0, 0}, {100, 100, 100 * std::exp(1.0)});
    EXPECT_EQ(*log_return(g, 0, 1), 0.0);
    EXPECT_NEAR(*log_return(g, 0, 2), 1.0, 1e-15);
    EXPECT_FALSE(log_return(g, 2, 1).has_value());
    const auto a = grid("A", "2008-01-02", kEpsA, kMidA);
    EXPECT_FALSE(log_return(a, 0, 3).has_value());
}

TEST(LogReturn, FixtureGridDirectFormula) {
    std::mt19937 rng(41);
    const auto g = random_grid(rng, "A", "2008-01-02", 40);
    EXPECT_EQ(*log_return(g, 10, 5), std::log(g.mid[15] / g.mid[10]));
}

TEST(CrossResponse, TwelveSecondFixtureMatchesEnumeration) {
    const auto a = grid("A", "2008-01-02", kEpsA, kMidA);
    const auto b = grid("B", "2008-01-02", kEpsB, kMidB);
    const LagSpec lags({1, 2, 3});
    const auto ab = response_pair(one(a), one(b), lags);
    const auto ba = response_pair(one(b), one(a), lags);
    for (int tau : {1, 2, 3}) {
        const auto oab = oracle::response(kMidA, kEpsB, tau);
        const auto oba = oracle::response(kMidB, kEpsA, tau);
        EXPECT_EQ(ab.include_zeros.at(tau)->value, oab.inc()) << tau;
        EXPECT_EQ(ab.exclude_zeros.at(tau)->value, oab.exc()) << tau;
        EXPECT_EQ(ab.include_zeros.at(tau)->n_samples, oab.n_all);
        EXPECT_EQ(ab.exclude_zeros.at(tau)->n_samples, oab.n_traded);
        EXPECT_EQ(ba.include_zeros.at(tau)->value, oba.inc()) << tau;
        EXPECT_EQ(ba.exclude_zeros.at(tau)->value, oba.exc()) << tau;
    }
    // Written out for tau = 1: windows t = 1..10 (A unquoted at 0); only
    // t = 2, 4, 8 carry a nonzero price move against a nonzero eps_B.
    const double sum = -std::log(101.0 / 100.0) + std::log(100.0 / 101.0) + std::log(103.0 / 101.0);
    EXPECT_NEAR(ab.include_zeros.at(1)->value, sum / 10.0, 1e-16);
    EXPECT_EQ(ab.include_zeros.at(1)->n_samples, 10);
    EXPECT_EQ(ab.exclude_zeros.at(1)->n_samples, 6);  // eps_B != 0 at t = 2, 3, 4, 6, 8, 9
    EXPECT_EQ(ab.include_zeros.kind, SeriesKind::cross_response);
    EXPECT_EQ(ab.include_zeros.days, std::vector<std::string>{"2008-01-02"});
}

TEST(SignCorrelator, TwelveSecondFixtureMatchesEnumeration) {
    const auto a = grid("A", "2008-01-02", kEpsA, kMidA);
    const auto b = grid("B", "2008-01-02", kEpsB, kMidB);
    const LagSpec lags({0, 1, 2, 3, 5});
    const auto ab = correlator_pair(one(a), one(b), lags);
    for (int tau : lags.lags()) {
        const auto o = oracle::correlator(kEpsA, kEpsB, tau);
        EXPECT_EQ(ab.include_zeros.at(tau)->value, o.inc()) << tau;
        EXPECT_EQ(ab.exclude_zeros.at(tau)->value, o.exc()) << tau;
    }
    // By hand: sum over t = 0..10 of eps_A(t+1) eps_B(t) is 1; eps_B is
    // nonzero at 7 of those 11 seconds.
    EXPECT_EQ(ab.include_zeros.at(1)->value, 1.0 / 11.0);
    EXPECT_EQ(ab.exclude_zeros.at(1)->value, 1.0 / 7.0);
}

TEST(SignCorrelator, AnchorsAndBounds) {
    const auto a = grid("A", "2008-01-02", kEpsA, kMidA);
    EXPECT_EQ(sign_cross_correlator(one(a), one(a), LagSpec({0}), Convention::exclude_zeros).at(0)->value, 1.0);
    const auto plus = grid("P", "2008-01-02", std::vector<int>(20, 1), std::vector<double>(20, 1.0));
    const auto minus = grid("M", "2008-01-02", std::vector<int>(20, -1), std::vector<double>(20, 1.0));
    const auto s = correlator_pair(one(plus), one(minus), LagSpec({0, 1, 5, 19}));
    for (const auto& [tau, p] : s.include_zeros.points) EXPECT_EQ(p.value, -1.0);
    for (const auto& [tau, p] : s.exclude_zeros.points) EXPECT_EQ(p.value, -1.0);

    std::mt19937 rng(3);
    for (int round = 0; round < 20; ++round) {
        const auto x = random_grid(rng, "X", "2008-01-02", 200);
        const auto y = random_grid(rng, "Y", "2008-01-02", 200);
        const auto c = correlator_pair(one(x), one(y), LagSpec({0, 1, 7, 50}));
        for (const auto* s2 : {&c.include_zeros, &c.exclude_zeros})
            for (const auto& [tau, p] : s2->points) EXPECT_LE(std::abs(p.value), 1.0);
    }
}

TEST(CrossResponse, ConstantMidpointGivesExactZero) {
    std::mt19937 rng(8);
    auto x = random_grid(rng, "X", "2008-01-02", 300);
    auto y = random_grid(rng, "Y", "2008-01-02", 300);
    std::fill(x.mid.begin(), x.mid.end(), 37.25);
    const auto r = response_pair(one(x), one(y), LagSpec::parse("1:50"));
    for (const auto* s : {&r.include_zeros, &r.exclude_zeros})
        for (const auto& [tau, p] : s->points) EXPECT_EQ(p.value, 0.0);
}

TEST(CrossResponse, ZeroSignScalingIdentityIsExact) {
    std::mt19937 rng(13);
    const std::vector<SecondGrid> xi{random_grid(rng, "X", "2008-01-02", 500), random_grid(rng, "X", "2008-01-03", 500)};
    const std::vector<SecondGrid> yj{random_grid(rng, "Y", "2008-01-02", 500), random_grid(rng, "Y", "2008-01-03", 500)};
    const auto lags = LagSpec::parse("1:60");
    for (const auto& pair : {response_pair(xi, yj, lags), correlator_pair(xi, yj, lags)}) {
        for (const auto& [tau, inc] : pair.include_zeros.points) {
            const auto* exc = pair.exclude_zeros.at(tau);
            ASSERT_NE(exc, nullptr);
            EXPECT_GE(inc.n_samples, exc->n_samples);
            const double f = *windowed_frequency(pair.include_zeros, pair.exclude_zeros, tau);
            EXPECT_LE(std::abs(inc.value - f * exc->value), 1e-12 * std::max(std::abs(inc.value), 1e-15));
        }
    }
}

TEST(CrossResponse, SelfResponseUsesTheSameKernel) {
    std::mt19937 rng(19);
    const auto x = random_grid(rng, "X", "2008-01-02", 300);
    const auto r = response_pair(one(x), one(x), LagSpec({1, 2, 10}));
    EXPECT_EQ(r.include_zeros.kind, SeriesKind::self_response);
    for (int tau : {1, 2, 10}) EXPECT_EQ(r.include_zeros.at(tau)->value, oracle::response(x.mid, {x.eps.begin(), x.eps.end()}, tau).inc());
}

TEST(CrossResponse, NegatingSignsNegatesResponse) {
    std::mt19937 rng(21);
    const auto x = random_grid(rng, "X", "2008-01-02", 400);
    auto y = random_grid(rng, "Y", "2008-01-02", 400);
    const auto lags = LagSpec({1, 3, 30});
    const auto r = response_pair(one(x), one(y), lags);
    for (auto& e : y.eps) e = static_cast<std::int8_t>(-e);
    const auto neg = response_pair(one(x), one(y), lags);
    for (int tau : lags.lags()) {
        EXPECT_EQ(neg.include_zeros.at(tau)->value, -r.include_zeros.at(tau)->value);
        EXPECT_EQ(neg.exclude_zeros.at(tau)->value, -r.exclude_zeros.at(tau)->value);
    }
}

TEST(CrossResponse, DayBoundaryHygiene) {
    std::mt19937 rng(31);
    const auto x1 = random_grid(rng, "X", "2008-01-02", 200), y1 = random_grid(rng, "Y", "2008-01-02", 200);
    const auto x2 = random_grid(rng, "X", "2008-01-03", 200), y2 = random_grid(rng, "Y", "2008-01-03", 200);
    const auto lags = LagSpec({1, 5, 40});
    const auto both = response_pair(std::vector{x1, x2}, std::vector{y1, y2}, lags);
    const auto first = oracle::response(x1.mid, {y1.eps.begin(), y1.eps.end()}, 40);
    const auto second = oracle::response(x2.mid, {y2.eps.begin(), y2.eps.end()}, 40);
    // Windows never straddle days: counts add up per day.
    EXPECT_EQ(both.include_zeros.at(40)->n_samples, first.n_all + second.n_all);

    // Perturbing day 2 leaves day 1's contribution untouched.
    auto x2b = x2;
    for (auto& m : x2b.mid) m *= 1.5;
    x2b.mid[100] = 99.0;
    const auto only1 = response_pair(std::vector{x1}, std::vector{y1}, lags);
    const auto pert = response_pair(std::vector{x1, x2b}, std::vector{y1, y2}, lags);
    const auto o2b = oracle::response(x2b.mid, {y2.eps.begin(), y2.eps.end()}, 40);
    const double day1_sum = only1.include_zeros.at(40)->value * static_cast<double>(first.n_all);
    EXPECT_NEAR(pert.include_zeros.at(40)->value * static_cast<double>(first.n_all + o2b.n_all),
                day1_sum + static_cast<double>(o2b.sum), 1e-12);
}

TEST(CrossResponse, MissingLagIsReportedNotStored) {
    const auto a = grid("A", "2008-01-02", {1, 1, 1}, {kNaN, kNaN, 10});
    const auto r = response_pair(one(a), one(a), LagSpec({1, 2}));
    EXPECT_TRUE(r.include_zeros.points.empty());
    EXPECT_EQ(r.include_zeros.missing_lags, (std::vector<int>{1, 2}));
}

TEST(CrossResponse, RejectsMisalignedDays) {
    const auto a = grid("A", "2008-01-02", kEpsA, kMidA);
    const auto b = grid("B", "2008-01-03", kEpsB, kMidB);
    EXPECT_THROW(response_pair(one(a), one(b), LagSpec({1})), Error);
}

TEST(SeriesIo, CsvAndMetadataRoundTrip) {
    const auto a = grid("A", "2008-01-02", kEpsA, kMidA);
    const auto b = grid("B", "2008-01-02", kEpsB, kMidB);
    const auto s = cross_response(one(a), one(b), LagSpec({1, 2, 3}), Convention::exclude_zeros);
    std::stringstream csv;
    write_series_csv(csv, s);
    const auto back = series_from(series_metadata(s), read_series_csv(csv));
    EXPECT_EQ(back.points, s.points);
    EXPECT_EQ(back.i, "A");
    EXPECT_EQ(back.j, "B");
    EXPECT_EQ(back.convention, Convention::exclude_zeros);
    EXPECT_EQ(back.days, s.days);
}

#pragma once

// Passive/active averages over partner stocks, sector restrictions,
// normalized response matrices, influence rankings and the
// response-vs-activity correlation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "xresponse/common.hpp"
#include "xresponse/ingest.hpp"
#include "xresponse/response.hpp"
#include "xresponse/signs.hpp"

namespace xresponse {

/// passive: average over impacting stocks j of R_ij (anchor is i).
/// active: average over impacted stocks i of R_ij (anchor is j).
enum class Direction { passive, active };

inline const char* to_string(Direction d) { return d == Direction::passive ? "passive" : "active"; }

inline Direction parse_direction(std::string_view s) {
    if (s == "passive") return Direction::passive;
    if (s == "active") return Direction::active;
    throw Error(ErrorCode::InvalidArgument, "unknown direction '" + std::string(s) + "'");
}

/// Pairwise series indexed by (family, convention, i, j). Self-responses
/// share the cross_response family.
class SeriesStore {
public:
    void put(ResponseSeries s) {
        const Key key{family(s.kind), s.convention, s.i, s.j};
        series_[key] = std::move(s);
    }

    void put(PairSeries p) {
        put(std::move(p.include_zeros));
        put(std::move(p.exclude_zeros));
    }

    const ResponseSeries* find(SeriesKind kind, Convention conv, const std::string& i, const std::string& j) const {
        const auto it = series_.find(Key{family(kind), conv, i, j});
        return it == series_.end() ? nullptr : &it->second;
    }

    std::vector<const ResponseSeries*> all() const {
        std::vector<const ResponseSeries*> out;
        out.reserve(series_.size());
        for (const auto& [k, s] : series_) out.push_back(&s);
        return out;
    }

    std::size_t size() const noexcept { return series_.size(); }
    bool empty() const noexcept { return series_.empty(); }

private:
    using Key = std::tuple<SeriesKind, Convention, std::string, std::string>;

    static SeriesKind family(SeriesKind k) {
        return k == SeriesKind::self_response ? SeriesKind::cross_response : k;
    }

    std::map<Key, ResponseSeries> series_;
};

struct AveragePoint {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_pairs = 0;
};

struct AverageSeries {
    Direction direction = Direction::passive;
    SeriesKind kind = SeriesKind::cross_response;
    Convention convention = Convention::include_zeros;
    std::string anchor;
    std::vector<std::string> universe;  // partners actually averaged, sorted
    std::map<int, AveragePoint> points;

    const AveragePoint* at(int tau) const {
        const auto it = points.find(tau);
        return it == points.end() ? nullptr : &it->second;
    }
};

namespace detail {

inline std::pair<std::string, std::string> oriented(Direction d, const std::string& anchor, const std::string& partner) {
    return d == Direction::passive ? std::pair{anchor, partner} : std::pair{partner, anchor};
}

}  // namespace detail

/// Unweighted mean over partners of the pairwise series, anchor excluded.
/// Standard error is the spread across partners over sqrt(n_pairs).
inline AverageSeries average_series(SeriesKind kind, Direction direction, const std::string& anchor,
                                    const std::set<std::string>& partners, Convention convention,
                                    const SeriesStore& store) {
    AverageSeries avg;
    avg.direction = direction;
    avg.kind = kind == SeriesKind::self_response ? SeriesKind::cross_response : kind;
    avg.convention = convention;
    avg.anchor = anchor;
    for (const auto& p : partners)
        if (p != anchor) avg.universe.push_back(p);
    if (avg.universe.empty())
        throw Error(ErrorCode::InvalidArgument, "no partners other than '" + anchor + "' to average over");

    std::vector<const ResponseSeries*> inputs;
    std::string missing;
    for (const auto& p : avg.universe) {
        const auto [i, j] = detail::oriented(direction, anchor, p);
        const auto* s = store.find(avg.kind, convention, i, j);
        if (s == nullptr)
            missing += (missing.empty() ? "" : " ") + i + "->" + j;
        else
            inputs.push_back(s);
    }
    if (!missing.empty())
        throw Error(ErrorCode::MissingPairSeries,
                    std::string(to_string(avg.kind)) + "/" + to_string(convention) + " missing: " + missing);

    std::set<int> taus;
    for (const auto* s : inputs)
        for (const auto& [tau, p] : s->points) taus.insert(tau);

    for (const int tau : taus) {
        MomentAccumulator acc;
        for (const auto* s : inputs)
            if (const auto* p = s->at(tau)) acc.add(p->value);
        avg.points.emplace(tau, AveragePoint{acc.mean(), acc.standard_error(), acc.count});
    }
    return avg;
}

/// R_i^(p)(tau): how stock i's price responds to the other stocks' trades.
inline AverageSeries passive_average(const std::string& i, const std::set<std::string>& partners,
                                     Convention convention, const SeriesStore& store) {
    return average_series(SeriesKind::cross_response, Direction::passive, i, partners, convention, store);
}

/// R_j^(a)(tau): how stock j's trades move the other stocks' prices.
inline AverageSeries active_average(const std::string& j, const std::set<std::string>& partners,
                                    Convention convention, const SeriesStore& store) {
    return average_series(SeriesKind::cross_response, Direction::active, j, partners, convention, store);
}

inline AverageSeries correlator_average(const std::string& anchor, Direction direction,
                                        const std::set<std::string>& partners, Convention convention,
                                        const SeriesStore& store) {
    return average_series(SeriesKind::sign_correlator, direction, anchor, partners, convention, store);
}

/// Average restricted to the members of one sector.
inline AverageSeries sector_average(const std::string& anchor, Direction direction, const std::string& sector,
                                    const SectorMap& sectors, Convention convention, const SeriesStore& store,
                                    SeriesKind kind = SeriesKind::cross_response) {
    std::set<std::string> members;
    for (const auto& s : sectors.members(sector))
        if (s != anchor) members.insert(s);
    if (members.empty())
        throw Error(ErrorCode::EmptySector, "sector '" + sector + "' has no member other than '" + anchor + "'");
    return average_series(kind, direction, anchor, members, convention, store);
}

// ---------------------------------------------------------------------------
// Normalized response matrix
// ---------------------------------------------------------------------------

struct SectorSpan {
    std::string sector;
    std::size_t begin = 0;  // first row/column index
    std::size_t end = 0;    // one past the last
};

struct ResponseMatrix {
    int tau = 0;
    Convention convention = Convention::include_zeros;
    std::vector<std::string> symbols;          // row i = impacted, column j = impacting
    std::vector<double> rho;                   // row-major; diagonal is NaN
    std::vector<std::optional<double>> diagonal;  // raw self-responses, when available
    double max_abs = 0.0;
    std::vector<SectorSpan> sector_boundaries;

    std::size_t size() const noexcept { return symbols.size(); }
    double operator()(std::size_t i, std::size_t j) const { return rho[i * symbols.size() + j]; }
};

/// rho_ij(tau) = R_ij(tau) / max |R_ij(tau)| over off-diagonal pairs.
/// `symbols` should already be grouped by sector when `sectors` is given.
inline ResponseMatrix response_matrix(const std::vector<std::string>& symbols, int tau, Convention convention,
                                      const SeriesStore& store, const SectorMap* sectors = nullptr) {
    const auto n = symbols.size();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "response matrix needs at least two symbols");
    ResponseMatrix m;
    m.tau = tau;
    m.convention = convention;
    m.symbols = symbols;
    m.rho.assign(n * n, std::numeric_limits<double>::quiet_NaN());
    m.diagonal.assign(n, std::nullopt);

    std::vector<double> raw(n * n, 0.0);
    std::string missing;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const auto* s = store.find(SeriesKind::cross_response, convention, symbols[r], symbols[c]);
            const auto* p = s ? s->at(tau) : nullptr;
            if (r == c) {
                if (p) m.diagonal[r] = p->value;
                continue;
            }
            if (p == nullptr) {
                missing += (missing.empty() ? "" : " ") + symbols[r] + "->" + symbols[c];
                continue;
            }
            raw[r * n + c] = p->value;
            m.max_abs = std::max(m.max_abs, std::abs(p->value));
        }
    }
    if (!missing.empty())
        throw Error(ErrorCode::MissingPairSeries, "at tau=" + std::to_string(tau) + ": " + missing);
    if (!(m.max_abs > 0.0))
        throw Error(ErrorCode::DegenerateMax, "all off-diagonal responses are zero at tau=" + std::to_string(tau));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            if (r != c) m.rho[r * n + c] = raw[r * n + c] / m.max_abs;

    if (sectors != nullptr) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::string label = sectors->contains(symbols[k]) ? sectors->sector_of(symbols[k]) : std::string{};
            if (m.sector_boundaries.empty() || m.sector_boundaries.back().sector != label)
                m.sector_boundaries.push_back(SectorSpan{label, k, k + 1});
            else
                m.sector_boundaries.back().end = k + 1;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Rankings
// ---------------------------------------------------------------------------

struct RankEntry {
    std::string symbol;
    double value = 0.0;
};

struct Ranking {
    Direction direction = Direction::passive;
    int tau = 0;
    Convention convention = Convention::include_zeros;
    bool by_abs = false;
    std::vector<RankEntry> entries;
};

/// Top k values divided by the largest magnitude. Sorted descending (by
/// |value| when `by_abs`); ties go to the smaller symbol.
inline std::vector<RankEntry> rank_values(const std::map<std::string, double>& values, std::size_t k,
                                          bool by_abs = false) {
    double max_abs = 0.0;
    for (const auto& [s, v] : values) max_abs = std::max(max_abs, std::abs(v));
    std::vector<RankEntry> entries;
    entries.reserve(values.size());
    for (const auto& [s, v] : values) entries.push_back(RankEntry{s, max_abs > 0.0 ? v / max_abs : 0.0});
    std::sort(entries.begin(), entries.end(), [by_abs](const RankEntry& a, const RankEntry& b) {
        const double ka = by_abs ? std::abs(a.value) : a.value;
        const double kb = by_abs ? std::abs(b.value) : b.value;
        if (ka != kb) return ka > kb;
        return a.symbol < b.symbol;
    });
    if (entries.size() > k) entries.resize(k);
    return entries;
}

/// Top-k stocks by passive or active average response at one lag, each
/// averaged over the rest of `symbols`.
inline Ranking rank_stocks(Direction direction, int tau, Convention convention, std::size_t k,
                           const std::set<std::string>& symbols, const SeriesStore& store, bool by_abs = false,
                           SeriesKind kind = SeriesKind::cross_response) {
    std::map<std::string, double> values;
    for (const auto& s : symbols) {
        const auto avg = average_series(kind, direction, s, symbols, convention, store);
        const auto* p = avg.at(tau);
        if (p == nullptr)
            throw Error(ErrorCode::MissingSeries,
                        std::string(to_string(direction)) + " average of " + s + " has no value at tau=" +
                            std::to_string(tau));
        values[s] = p->value;
    }
    return Ranking{direction, tau, convention, by_abs, rank_values(values, k, by_abs)};
}

// ---------------------------------------------------------------------------
// Correlation with trading activity
// ---------------------------------------------------------------------------

/// Pearson correlation of x and y (same length, at least three points).
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "pearson: length mismatch");
    if (x.size() < 3) throw Error(ErrorCode::TooFewPoints, "pearson needs at least 3 points");
    const double n = static_cast<double>(x.size());
    CompensatedSum sx, sy;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sx.add(x[k]);
        sy.add(y[k]);
    }
    const double mx = sx.value() / n, my = sy.value() / n;
    CompensatedSum sxy, sxx, syy;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = x[k] - mx, dy = y[k] - my;
        sxy.add(dx * dy);
        sxx.add(dx * dx);
        syy.add(dy * dy);
    }
    if (!(sxx.value() > 0.0) || !(syy.value() > 0.0))
        throw Error(ErrorCode::DegenerateVariance, "a variable is constant across symbols");
    return std::clamp(sxy.value() / std::sqrt(sxx.value() * syy.value()), -1.0, 1.0);
}

/// Correlation across symbols between the active average response at a
/// fixed lag and the average daily number of trading seconds.
inline double trade_count_correlation(const std::map<std::string, double>& active_values,
                                      const std::map<std::string, ActivityStats>& activity) {
    std::vector<double> x, y;
    for (const auto& [sym, v] : active_values) {
        const auto it = activity.find(sym);
        if (it == activity.end())
            throw Error(ErrorCode::MissingSeries, "no activity statistics for '" + sym + "'");
        x.push_back(v);
        y.push_back(it->second.avg_daily_trades);
    }
    return pearson(x, y);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void write_average_csv(std::ostream& out, const AverageSeries& a) {
    out << "tau,value,stderr,n_pairs\n";
    for (const auto& [tau, p] : a.points)
        out << tau << ',' << format_double(p.value) << ',' << format_double(p.std_error) << ',' << p.n_pairs << '\n';
}

inline std::map<int, AveragePoint> read_average_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "tau,value,stderr,n_pairs")
        throw Error(ErrorCode::UnparseableHeader, "average CSV header must be 'tau,value,stderr,n_pairs'");
    std::map<int, AveragePoint> points;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto f = split(t, ',');
        int tau = 0;
        AveragePoint p;
        if (f.size() != 4 || !parse_int(f[0], tau) || !parse_double(f[1], p.value) ||
            !parse_double(f[2], p.std_error) || !parse_int(f[3], p.n_pairs))
            throw Error(ErrorCode::InvalidArgument, "malformed average CSV line '" + std::string(t) + "'");
        points[tau] = p;
    }
    return points;
}

inline nlohmann::json average_metadata(const AverageSeries& a) {
    return nlohmann::json{{"direction", to_string(a.direction)},
                          {"kind", to_string(a.kind)},
                          {"convention", to_string(a.convention)},
                          {"anchor", a.anchor},
                          {"universe", a.universe}};
}

inline void write_matrix_csv(std::ostream& out, const ResponseMatrix& m) {
    out << "i\\j";
    for (const auto& s : m.symbols) out << ',' << s;
    out << '\n';
    for (std::size_t r = 0; r < m.size(); ++r) {
        out << m.symbols[r];
        for (std::size_t c = 0; c < m.size(); ++c) {
            out << ',';
            if (r != c) out << format_double(m(r, c));
        }
        out << '\n';
    }
}

inline nlohmann::json matrix_metadata(const ResponseMatrix& m) {
    nlohmann::json bounds = nlohmann::json::array();
    for (const auto& b : m.sector_boundaries)
        bounds.push_back({{"sector", b.sector}, {"begin", b.begin}, {"end", b.end}});
    nlohmann::json diag = nlohmann::json::array();
    for (const auto& d : m.diagonal) diag.push_back(d ? nlohmann::json(*d) : nlohmann::json(nullptr));
    return nlohmann::json{{"tau", m.tau},
                          {"convention", to_string(m.convention)},
                          {"max_abs", m.max_abs},
                          {"symbols", m.symbols},
                          {"sector_boundaries", bounds},
                          {"diagonal", diag}};
}

inline void write_ranking_csv(std::ostream& out, const Ranking& r, const SectorMap* sectors = nullptr) {
    out << "rank,symbol,value,sector\n";
    for (std::size_t k = 0; k < r.entries.size(); ++k) {
        const auto& e = r.entries[k];
        out << (k + 1) << ',' << e.symbol << ',' << format_double(e.value) << ',';
        if (sectors != nullptr && sectors->contains(e.symbol)) out << sectors->sector_of(e.symbol);
        out << '\n';
    }
}

}  // namespace xresponse

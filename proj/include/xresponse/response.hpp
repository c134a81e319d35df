#pragma once

// Pairwise price responses R_ij(tau) and trade-sign correlators Theta_ij(tau)
// on the one-second grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "xresponse/common.hpp"
#include "xresponse/signs.hpp"

namespace xresponse {

enum class SeriesKind { cross_response, self_response, sign_correlator };

/// Whether seconds with eps_j(t) = 0 enter the time average.
enum class Convention { include_zeros, exclude_zeros };

inline const char* to_string(SeriesKind k) {
    switch (k) {
    case SeriesKind::cross_response: return "cross_response";
    case SeriesKind::self_response: return "self_response";
    case SeriesKind::sign_correlator: return "sign_correlator";
    }
    return "?";
}

inline SeriesKind parse_series_kind(std::string_view s) {
    if (s == "cross_response") return SeriesKind::cross_response;
    if (s == "self_response") return SeriesKind::self_response;
    if (s == "sign_correlator") return SeriesKind::sign_correlator;
    throw Error(ErrorCode::InvalidArgument, "unknown series kind '" + std::string(s) + "'");
}

/// Short tags used on the command line and in file paths.
inline const char* to_string(Convention c) { return c == Convention::include_zeros ? "inc0" : "exc0"; }

inline Convention parse_convention(std::string_view s) {
    if (s == "inc0" || s == "include_zeros") return Convention::include_zeros;
    if (s == "exc0" || s == "exclude_zeros") return Convention::exclude_zeros;
    throw Error(ErrorCode::InvalidArgument, "unknown convention '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Lags
// ---------------------------------------------------------------------------

class LagSpec {
public:
    LagSpec() = default;

    explicit LagSpec(std::vector<int> lags, int max_lag = kSessionSeconds - 1) : lags_(std::move(lags)) {
        if (lags_.empty()) throw Error(ErrorCode::InvalidArgument, "empty lag set");
        for (std::size_t k = 0; k < lags_.size(); ++k) {
            if (lags_[k] < 0 || lags_[k] > max_lag)
                throw Error(ErrorCode::InvalidArgument, "lag " + std::to_string(lags_[k]) + " out of range");
            if (k > 0 && lags_[k] <= lags_[k - 1])
                throw Error(ErrorCode::InvalidArgument, "lags must be strictly increasing");
        }
    }

    /// Log-spaced default covering 1..1000 s.
    static LagSpec defaults() {
        return LagSpec({1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987});
    }

    /// Accepts a comma list ("1,2,60,300"), a range "a:b", or "a:b:log[:n]"
    /// for n (default 20) log-spaced integer lags, duplicates removed.
    static LagSpec parse(std::string_view expr) {
        expr = trim(expr);
        if (expr.find(':') == std::string_view::npos) {
            std::vector<int> lags;
            for (auto f : split(expr, ',')) {
                int v = 0;
                if (!parse_int(f, v)) throw Error(ErrorCode::InvalidArgument, "bad lag '" + std::string(f) + "'");
                lags.push_back(v);
            }
            return LagSpec(std::move(lags));
        }
        const auto parts = split(expr, ':');
        int a = 0, b = 0;
        if (parts.size() < 2 || parts.size() > 4 || !parse_int(parts[0], a) || !parse_int(parts[1], b) || b < a)
            throw Error(ErrorCode::InvalidArgument, "bad lag range '" + std::string(expr) + "'");
        std::vector<int> lags;
        if (parts.size() == 2) {
            for (int v = a; v <= b; ++v) lags.push_back(v);
            return LagSpec(std::move(lags));
        }
        if (trim(parts[2]) != "log" || a < 1)
            throw Error(ErrorCode::InvalidArgument, "bad lag range '" + std::string(expr) + "'");
        int n = 20;
        if (parts.size() == 4 && (!parse_int(parts[3], n) || n < 2))
            throw Error(ErrorCode::InvalidArgument, "bad lag count in '" + std::string(expr) + "'");
        const double la = std::log(static_cast<double>(a)), lb = std::log(static_cast<double>(b));
        for (int k = 0; k < n; ++k) {
            const int v = static_cast<int>(std::lround(std::exp(la + (lb - la) * k / (n - 1))));
            if (lags.empty() || v > lags.back()) lags.push_back(v);
        }
        return LagSpec(std::move(lags));
    }

    const std::vector<int>& lags() const noexcept { return lags_; }
    std::size_t size() const noexcept { return lags_.size(); }

    std::string to_string() const {
        std::string s;
        for (std::size_t k = 0; k < lags_.size(); ++k) s += (k ? "," : "") + std::to_string(lags_[k]);
        return s;
    }

private:
    std::vector<int> lags_;
};

// ---------------------------------------------------------------------------
// Series
// ---------------------------------------------------------------------------

struct SeriesPoint {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;

    friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

struct ResponseSeries {
    SeriesKind kind = SeriesKind::cross_response;
    Convention convention = Convention::include_zeros;
    std::string i;  // impacted (price) stock
    std::string j;  // impacting (sign) stock
    std::vector<std::string> days;
    std::map<int, SeriesPoint> points;
    std::vector<int> missing_lags;  // lags with no valid sample

    const SeriesPoint* at(int tau) const {
        const auto it = points.find(tau);
        return it == points.end() ? nullptr : &it->second;
    }
};

/// Both zero-sign conventions of one pair, computed over one shared window set.
struct PairSeries {
    ResponseSeries include_zeros;
    ResponseSeries exclude_zeros;

    const ResponseSeries& get(Convention c) const {
        return c == Convention::include_zeros ? include_zeros : exclude_zeros;
    }
};

/// log(m_i(t+tau) / m_i(t)); empty when either midpoint is missing or the
/// lag leaves the day.
inline std::optional<double> log_return(const SecondGrid& grid, int t, int tau) {
    if (t < 0 || tau < 0 || t + tau >= grid.length()) return std::nullopt;
    const double m0 = grid.mid[static_cast<std::size_t>(t)];
    const double m1 = grid.mid[static_cast<std::size_t>(t + tau)];
    if (std::isnan(m0) || std::isnan(m1)) return std::nullopt;
    return std::log(m1 / m0);
}

namespace detail {

inline void check_aligned(std::span<const SecondGrid> a, std::span<const SecondGrid> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::InvalidArgument, "grid day sets differ in size");
    for (std::size_t d = 0; d < a.size(); ++d) {
        if (a[d].day != b[d].day)
            throw Error(ErrorCode::InvalidArgument, "grid day mismatch: " + a[d].day.str() + " vs " + b[d].day.str());
        if (a[d].length() != b[d].length())
            throw Error(ErrorCode::InvalidArgument, "grid length mismatch on " + a[d].day.str());
    }
}

/// Sample moments per lag. `all` counts every valid second, `traded` only
/// seconds with eps_j != 0; products at eps_j = 0 are exactly zero, so both
/// carry bit-identical sums and differ only in their counts.
struct LagMoments {
    std::vector<MomentAccumulator> all;
    std::vector<MomentAccumulator> traded;
};

template <typename Product>
LagMoments accumulate(std::span<const SecondGrid> grids_i, std::span<const SecondGrid> grids_j,
                      const LagSpec& lags, Product product) {
    check_aligned(grids_i, grids_j);
    LagMoments m;
    m.all.resize(lags.size());
    m.traded.resize(lags.size());
    for (std::size_t d = 0; d < grids_i.size(); ++d) {
        const auto& gi = grids_i[d];
        const auto& gj = grids_j[d];
        const int len = gi.length();
        for (std::size_t k = 0; k < lags.size(); ++k) {
            const int tau = lags.lags()[k];
            auto& all = m.all[k];
            auto& traded = m.traded[k];
            for (int t = 0; t + tau < len; ++t) {
                const auto x = product(gi, gj, t, tau);
                if (!x) continue;
                if (gj.eps[static_cast<std::size_t>(t)] == 0) {
                    all.add_zero();
                } else {
                    all.add(*x);
                    traded.add(*x);
                }
            }
        }
    }
    return m;
}

inline ResponseSeries to_series(SeriesKind kind, Convention conv, std::span<const SecondGrid> gi,
                                std::span<const SecondGrid> gj, const LagSpec& lags,
                                const std::vector<MomentAccumulator>& acc) {
    ResponseSeries s;
    s.kind = kind;
    s.convention = conv;
    s.i = gi.empty() ? std::string{} : gi.front().symbol;
    s.j = gj.empty() ? std::string{} : gj.front().symbol;
    for (const auto& g : gi) s.days.push_back(g.day.str());
    for (std::size_t k = 0; k < lags.size(); ++k) {
        const auto& a = acc[k];
        if (a.count == 0) {
            s.missing_lags.push_back(lags.lags()[k]);
            continue;
        }
        s.points.emplace(lags.lags()[k], SeriesPoint{a.mean(), a.standard_error(), a.count});
    }
    return s;
}

inline PairSeries to_pair(SeriesKind kind, std::span<const SecondGrid> gi, std::span<const SecondGrid> gj,
                          const LagSpec& lags, const LagMoments& m) {
    return PairSeries{to_series(kind, Convention::include_zeros, gi, gj, lags, m.all),
                      to_series(kind, Convention::exclude_zeros, gi, gj, lags, m.traded)};
}

}  // namespace detail

/// R_ij(tau) = < r_i(t, tau) eps_j(t) >_t in both conventions.
///
/// `grids_i` and `grids_j` hold the same days in the same order. A second t
/// contributes at lag tau when t + tau stays inside the day and m_i is
/// quoted at both ends. With i == j this is the self-response.
inline PairSeries response_pair(std::span<const SecondGrid> grids_i, std::span<const SecondGrid> grids_j,
                                const LagSpec& lags) {
    auto m = detail::accumulate(grids_i, grids_j, lags,
                                [](const SecondGrid& gi, const SecondGrid& gj, int t, int tau) -> std::optional<double> {
                                    const auto r = log_return(gi, t, tau);
                                    if (!r) return std::nullopt;
                                    return *r * static_cast<double>(gj.eps[static_cast<std::size_t>(t)]);
                                });
    const bool self = !grids_i.empty() && !grids_j.empty() && grids_i.front().symbol == grids_j.front().symbol;
    return detail::to_pair(self ? SeriesKind::self_response : SeriesKind::cross_response, grids_i, grids_j, lags, m);
}

/// Theta_ij(tau) = < eps_i(t + tau) eps_j(t) >_t in both conventions.
inline PairSeries correlator_pair(std::span<const SecondGrid> grids_i, std::span<const SecondGrid> grids_j,
                                  const LagSpec& lags) {
    auto m = detail::accumulate(grids_i, grids_j, lags,
                                [](const SecondGrid& gi, const SecondGrid& gj, int t, int tau) -> std::optional<double> {
                                    return static_cast<double>(gi.eps[static_cast<std::size_t>(t + tau)] *
                                                               gj.eps[static_cast<std::size_t>(t)]);
                                });
    return detail::to_pair(SeriesKind::sign_correlator, grids_i, grids_j, lags, m);
}

inline ResponseSeries cross_response(std::span<const SecondGrid> grids_i, std::span<const SecondGrid> grids_j,
                                     const LagSpec& lags, Convention convention) {
    return response_pair(grids_i, grids_j, lags).get(convention);
}

inline ResponseSeries sign_cross_correlator(std::span<const SecondGrid> grids_i,
                                            std::span<const SecondGrid> grids_j, const LagSpec& lags,
                                            Convention convention) {
    return correlator_pair(grids_i, grids_j, lags).get(convention);
}

/// Fraction of valid seconds with eps_j != 0 at one lag, read off the two
/// sample counts of a pair computed over the same window set.
inline std::optional<double> windowed_frequency(const ResponseSeries& inc, const ResponseSeries& exc, int tau) {
    const auto* a = inc.at(tau);
    if (a == nullptr || a->n_samples == 0) return std::nullopt;
    const auto* b = exc.at(tau);
    const auto traded = b == nullptr ? 0 : b->n_samples;
    return static_cast<double>(traded) / static_cast<double>(a->n_samples);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void write_series_csv(std::ostream& out, const ResponseSeries& s) {
    out << "tau,value,stderr,n\n";
    for (const auto& [tau, p] : s.points)
        out << tau << ',' << format_double(p.value) << ',' << format_double(p.std_error) << ',' << p.n_samples << '\n';
}

inline std::map<int, SeriesPoint> read_series_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "tau,value,stderr,n")
        throw Error(ErrorCode::UnparseableHeader, "series CSV header must be 'tau,value,stderr,n'");
    std::map<int, SeriesPoint> points;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto f = split(t, ',');
        int tau = 0;
        SeriesPoint p;
        if (f.size() != 4 || !parse_int(f[0], tau) || !parse_double(f[1], p.value) ||
            !parse_double(f[2], p.std_error) || !parse_int(f[3], p.n_samples))
            throw Error(ErrorCode::InvalidArgument, "series CSV line " + std::to_string(line_no) + " malformed");
        points[tau] = p;
    }
    return points;
}

inline nlohmann::json series_metadata(const ResponseSeries& s) {
    return nlohmann::json{{"kind", to_string(s.kind)},
                          {"convention", to_string(s.convention)},
                          {"i", s.i},
                          {"j", s.j},
                          {"days", s.days},
                          {"missing_lags", s.missing_lags}};
}

/// Restores a series from its JSON metadata and CSV points.
inline ResponseSeries series_from(const nlohmann::json& meta, std::map<int, SeriesPoint> points) {
    ResponseSeries s;
    s.kind = parse_series_kind(meta.at("kind").get<std::string>());
    s.convention = parse_convention(meta.at("convention").get<std::string>());
    s.i = meta.at("i").get<std::string>();
    s.j = meta.at("j").get<std::string>();
    s.days = meta.at("days").get<std::vector<std::string>>();
    if (meta.contains("missing_lags")) s.missing_lags = meta.at("missing_lags").get<std::vector<int>>();
    s.points = std::move(points);
    return s;
}

}  // namespace xresponse

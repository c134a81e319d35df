#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace xresponse {

/// Number of one-second intervals in the default 09:40:00-15:50:00 session.
inline constexpr int kSessionSeconds = 22200;

enum class ErrorCode {
    UnparseableHeader,
    NonMonotonicTimestamps,
    EmptyFile,
    NoTrades,
    NoQuotes,
    NoValidSamples,
    MissingPairSeries,
    MissingSeries,
    EmptySector,
    DegenerateMax,
    DegenerateVariance,
    TooFewPoints,
    InvalidConfig,
    InvalidArgument,
    CacheFormat,
    Io,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnparseableHeader: return "UnparseableHeader";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::NoTrades: return "NoTrades";
    case ErrorCode::NoQuotes: return "NoQuotes";
    case ErrorCode::NoValidSamples: return "NoValidSamples";
    case ErrorCode::MissingPairSeries: return "MissingPairSeries";
    case ErrorCode::MissingSeries: return "MissingSeries";
    case ErrorCode::EmptySector: return "EmptySector";
    case ErrorCode::DegenerateMax: return "DegenerateMax";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::CacheFormat: return "CacheFormat";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Neumaier-compensated running sum. Adding 0.0 leaves the state bit-identical.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    void merge(const CompensatedSum& other) noexcept {
        add(other.sum_);
        add(other.comp_);
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// (sum, sum of squares, count) triple with compensated sums; merges are
/// order-sensitive only through the caller's fixed merge order.
struct MomentAccumulator {
    CompensatedSum sum;
    CompensatedSum sum_sq;
    std::int64_t count = 0;

    void add(double x) noexcept {
        sum.add(x);
        sum_sq.add(x * x);
        ++count;
    }

    /// Records a sample whose value is exactly zero.
    void add_zero() noexcept { ++count; }

    void merge(const MomentAccumulator& other) noexcept {
        sum.merge(other.sum);
        sum_sq.merge(other.sum_sq);
        count += other.count;
    }

    double mean() const noexcept {
        return count > 0 ? sum.value() / static_cast<double>(count)
                         : std::numeric_limits<double>::quiet_NaN();
    }

    /// Sample standard deviation divided by sqrt(count); zero for a single sample.
    double standard_error() const noexcept {
        if (count < 2) return 0.0;
        const double n = static_cast<double>(count);
        const double s = sum.value();
        double var = (sum_sq.value() - s * s / n) / (n - 1.0);
        if (!(var > 0.0)) var = 0.0;
        return std::sqrt(var / n);
    }
};

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

/// Strict full-field parses; return false on any trailing garbage.
inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace xresponse

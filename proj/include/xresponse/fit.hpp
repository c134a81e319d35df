#pragma once

// Power-law sign-correlator model
//
//     Theta(tau) = theta / (1 + (tau / tau0)^2)^(gamma / 2)
//
// and a damped least-squares fit of (theta, tau0, gamma).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xresponse/aggregate.hpp"
#include "xresponse/common.hpp"
#include "xresponse/response.hpp"

namespace xresponse {

enum class Chi2Mode { mean, sum };

inline Chi2Mode parse_chi2_mode(std::string_view s) {
    if (s == "mean") return Chi2Mode::mean;
    if (s == "sum") return Chi2Mode::sum;
    throw Error(ErrorCode::InvalidArgument, "chi2 mode must be mean or sum, got '" + std::string(s) + "'");
}

enum class MemoryClass { short_memory, long_memory };

inline const char* to_string(MemoryClass m) { return m == MemoryClass::short_memory ? "short" : "long"; }

/// gamma >= 1 decays fast enough to be summable: short memory.
inline MemoryClass classify_memory(double gamma) {
    return gamma >= 1.0 ? MemoryClass::short_memory : MemoryClass::long_memory;
}

struct PowerLawFit {
    double theta = 0.0;
    double tau0 = 1.0;
    double gamma = 0.0;
    double chi2 = 0.0;
    double initial_chi2 = 0.0;
    bool converged = false;
    bool degenerate = false;  // tau0 (and maybe gamma) not identifiable
    int n_points = 0;
    int iterations = 0;

    MemoryClass memory_class() const { return classify_memory(gamma); }
};

inline double model_eval(double theta, double tau0, double gamma, double tau) {
    const double x = tau / tau0;
    return theta / std::pow(1.0 + x * x, gamma / 2.0);
}

inline double model_eval(const PowerLawFit& fit, double tau) {
    return model_eval(fit.theta, fit.tau0, fit.gamma, tau);
}

struct FitOptions {
    Chi2Mode chi2 = Chi2Mode::mean;
    int max_iterations = 200;
    double rel_tolerance = 1e-10;
    double initial_damping = 1e-3;
};

struct FitSample {
    double tau = 0.0;
    double value = 0.0;
};

namespace detail {

/// Internal coordinates: (theta, log tau0, gamma); keeps tau0 positive.
using Params = std::array<double, 3>;

inline double sum_sq_residuals(std::span<const FitSample> pts, const Params& p) {
    const double tau0 = std::exp(p[1]);
    CompensatedSum s;
    for (const auto& q : pts) {
        const double r = q.value - model_eval(p[0], tau0, p[2], q.tau);
        s.add(r * r);
    }
    return s.value();
}

/// Solves the 3x3 system with partial pivoting; false when singular.
inline bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3>& x) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (!(std::abs(a[piv][col]) > 0.0)) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

/// Least-squares slope of log|value| against log tau over the largest
/// decade of lags, restricted to points sharing the sign of `sign_ref`.
inline double tail_slope(std::span<const FitSample> pts, double sign_ref) {
    const double tau_max = pts.back().tau;
    std::vector<std::pair<double, double>> xy;
    for (const auto& q : pts)
        if (q.tau >= tau_max / 10.0 && q.tau > 0.0 && q.value * sign_ref > 0.0)
            xy.emplace_back(std::log(q.tau), std::log(std::abs(q.value)));
    if (xy.size() < 2) return -1.0;
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : xy) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(xy.size());
    my /= static_cast<double>(xy.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : xy) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    return sxx > 0.0 ? sxy / sxx : -1.0;
}

inline Params initial_guess(std::span<const FitSample> pts) {
    const double theta0 = pts.front().value;
    const double gamma0 = std::clamp(-tail_slope(pts, theta0), 0.0, 5.0);

    // tau0 is where the model has fallen to theta / 2^(gamma/2).
    const double target = std::abs(theta0) / std::pow(2.0, gamma0 / 2.0);
    double tau0 = pts[pts.size() / 2].tau;
    if (gamma0 > 0.0) {
        for (std::size_t k = 1; k < pts.size(); ++k) {
            const double v = std::abs(pts[k].value);
            if (v <= target) {
                const double v_prev = std::abs(pts[k - 1].value);
                if (v_prev > v && v > 0.0 && pts[k - 1].tau > 0.0) {
                    const double w = (std::log(v_prev) - std::log(target)) / (std::log(v_prev) - std::log(v));
                    tau0 = std::exp(std::log(pts[k - 1].tau) + w * (std::log(pts[k].tau) - std::log(pts[k - 1].tau)));
                } else {
                    tau0 = pts[k].tau;
                }
                break;
            }
        }
    }
    if (!(tau0 > 0.0)) tau0 = 1.0;
    return Params{theta0, std::log(tau0), gamma0};
}

}  // namespace detail

/// Fits the power-law model to (tau, value) samples by Levenberg-Marquardt.
///
/// A step is accepted only if it lowers the sum of squared residuals; the
/// damping factor is divided by 10 on acceptance and multiplied by 10 on
/// rejection. Iteration stops when an accepted step improves the residual
/// by less than `rel_tolerance` relative (converged), when no damping
/// yields a decrease (converged, stationary), or after `max_iterations`
/// accepted steps (not converged, best parameters kept).
inline PowerLawFit fit_power_law(std::vector<FitSample> pts, const FitOptions& opt = {}) {
    if (pts.size() < 4) throw Error(ErrorCode::TooFewPoints, "power-law fit needs at least 4 points");
    for (const auto& q : pts)
        if (!std::isfinite(q.tau) || !std::isfinite(q.value) || q.tau < 0.0)
            throw Error(ErrorCode::InvalidArgument, "non-finite or negative sample in fit input");
    std::sort(pts.begin(), pts.end(), [](const FitSample& a, const FitSample& b) {
        return a.tau != b.tau ? a.tau < b.tau : a.value < b.value;
    });

    auto p = detail::initial_guess(pts);
    double ssr = detail::sum_sq_residuals(pts, p);
    const double ssr0 = ssr;
    double lambda = opt.initial_damping;
    bool converged = false;
    int iter = 0;

    while (iter < opt.max_iterations) {
        if (ssr == 0.0) {
            converged = true;
            break;
        }
        // Normal equations J^T J and J^T r at the current point.
        std::array<std::array<double, 3>, 3> jtj{};
        std::array<double, 3> jtr{};
        const double tau0 = std::exp(p[1]);
        for (const auto& q : pts) {
            const double x = q.tau / tau0;
            const double u = 1.0 + x * x;
            const double base = std::pow(u, -p[2] / 2.0);
            const double f = p[0] * base;
            const std::array<double, 3> grad{base, f * p[2] * x * x / u, -0.5 * std::log(u) * f};
            const double r = q.value - f;
            for (int a = 0; a < 3; ++a) {
                jtr[a] += grad[a] * r;
                for (int b = 0; b < 3; ++b) jtj[a][b] += grad[a] * grad[b];
            }
        }
        double diag_max = 0.0;
        for (int a = 0; a < 3; ++a) diag_max = std::max(diag_max, jtj[a][a]);

        bool accepted = false;
        while (lambda < 1e16) {
            auto m = jtj;
            for (int a = 0; a < 3; ++a) m[a][a] += lambda * std::max(jtj[a][a], 1e-12 * diag_max);
            std::array<double, 3> delta{};
            if (detail::solve3(m, jtr, delta)) {
                const detail::Params cand{p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]};
                const double ssr_new = detail::sum_sq_residuals(pts, cand);
                if (std::isfinite(ssr_new) && ssr_new < ssr) {
                    const double improvement = (ssr - ssr_new) / ssr;
                    p = cand;
                    ssr = ssr_new;
                    lambda = std::max(lambda / 10.0, 1e-12);
                    accepted = true;
                    if (improvement < opt.rel_tolerance) converged = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        ++iter;
        if (!accepted) {
            converged = true;  // no descent direction left
            break;
        }
        if (converged) break;
    }

    PowerLawFit fit;
    fit.theta = p[0];
    fit.tau0 = std::exp(p[1]);
    fit.gamma = p[2];
    fit.n_points = static_cast<int>(pts.size());
    const double scale = opt.chi2 == Chi2Mode::mean ? 1.0 / static_cast<double>(pts.size()) : 1.0;
    fit.chi2 = ssr * scale;
    fit.initial_chi2 = ssr0 * scale;
    fit.converged = converged;
    fit.iterations = iter;
    fit.degenerate = std::abs(fit.gamma) < 1e-6 || fit.theta == 0.0;
    return fit;
}

/// Fits the points of a pairwise series with lo <= tau <= hi.
inline PowerLawFit fit_power_law(const ResponseSeries& s, int lo, int hi, const FitOptions& opt = {}) {
    std::vector<FitSample> pts;
    for (const auto& [tau, p] : s.points)
        if (tau >= lo && tau <= hi) pts.push_back(FitSample{static_cast<double>(tau), p.value});
    return fit_power_law(std::move(pts), opt);
}

inline PowerLawFit fit_power_law(const AverageSeries& s, int lo, int hi, const FitOptions& opt = {}) {
    std::vector<FitSample> pts;
    for (const auto& [tau, p] : s.points)
        if (tau >= lo && tau <= hi) pts.push_back(FitSample{static_cast<double>(tau), p.value});
    return fit_power_law(std::move(pts), opt);
}

inline nlohmann::json to_json(const PowerLawFit& f) {
    return nlohmann::json{{"theta", f.theta},
                          {"tau0", f.tau0},
                          {"gamma", f.gamma},
                          {"chi2", f.chi2},
                          {"converged", f.converged},
                          {"degenerate", f.degenerate},
                          {"n_points", f.n_points},
                          {"iterations", f.iterations},
                          {"memory_class", to_string(f.memory_class())}};
}

/// Header of the fit table: parameters for both conventions side by side,
/// chi2 in units of 1e-6.
inline void write_fit_table_header(std::ostream& out) {
    out << "correlator,stock,theta_inc0,theta_exc0,tau0_inc0,tau0_exc0,gamma_inc0,gamma_exc0,"
           "chi2_inc0_e6,chi2_exc0_e6\n";
}

inline void write_fit_table_row(std::ostream& out, Direction direction, const std::string& stock,
                                const PowerLawFit& inc, const PowerLawFit& exc) {
    out << to_string(direction) << ',' << stock << ',' << format_double(inc.theta) << ','
        << format_double(exc.theta) << ',' << format_double(inc.tau0) << ',' << format_double(exc.tau0) << ','
        << format_double(inc.gamma) << ',' << format_double(exc.gamma) << ',' << format_double(inc.chi2 * 1e6)
        << ',' << format_double(exc.chi2 * 1e6) << '\n';
}

}  // namespace xresponse

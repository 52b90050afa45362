#ifndef PAIRSCOPE_TESTS_SUPPORT_HPP
#define PAIRSCOPE_TESTS_SUPPORT_HPP

// Independent reference computations for the test suites.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>

#include <pairscope/error.hpp>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

/// Direct O(n^2) DFT, X[m] = (1/sqrt(n)) sum_t x[t] exp(-2 pi i m t / n).
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x)
{
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::complex<double> acc{};
        for (std::size_t t = 0; t < n; ++t) {
            const double a = -2.0 * pi * static_cast<double>((m * t) % n) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
        }
        out[m] = acc / std::sqrt(static_cast<double>(n));
    }
    return out;
}

/// Greenwich mean sidereal time (hours) from the Earth rotation angle and the
/// IERS 2003 precession polynomial. UT1 = UTC assumed.
inline double gmst_era_hours(double mjd)
{
    const double du = mjd - 51544.5; // days from J2000.0
    const double frac = du - std::floor(du);
    double era_turns = std::fmod(0.7790572732640 + 0.00273781191135448 * du + frac, 1.0);
    if (era_turns < 0)
        era_turns += 1.0;
    const double t = du / 36525.0;
    const double poly_arcsec = 0.014506 + 4612.156534 * t + 1.3915817 * t * t -
                               0.00000044 * t * t * t - 0.000029956 * t * t * t * t;
    double h = era_turns * 24.0 + poly_arcsec / 15.0 / 3600.0;
    h = std::fmod(h, 24.0);
    return h < 0 ? h + 24.0 : h;
}

/// Smallest signed difference a - b on a 24 h circle.
inline double hours_diff(double a, double b)
{
    double d = std::fmod(a - b, 24.0);
    if (d > 12.0)
        d -= 24.0;
    if (d < -12.0)
        d += 24.0;
    return d;
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

/// Asymptotic KS critical value at significance 1%.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

/// Pearson chi-square of observed counts against expected counts.
inline double chi_square(const std::vector<double>& observed, const std::vector<double>& expected)
{
    double c = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double d = observed[i] - expected[i];
        c += d * d / expected[i];
    }
    return c;
}

inline double chi_square_critical(double dof, double alpha)
{
    return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), alpha));
}

/// P(|A + n|^2 > T * N0) for complex Gaussian n of power N0 and a tone of
/// power s * N0: noncentral chi-square with 2 dof and lambda = 2 s, at 2 T.
inline double exceedance_probability(double s_linear, double t_linear)
{
    if (s_linear == 0.0)
        return std::exp(-t_linear);
    boost::math::non_central_chi_squared d(2.0, 2.0 * s_linear);
    return boost::math::cdf(boost::math::complement(d, 2.0 * t_linear));
}

/// Triangular density CDF on (-2 pi, 2 pi): difference of two U(-pi, pi).
inline double triangular_cdf(double x)
{
    const double a = 2.0 * pi;
    if (x <= -a)
        return 0.0;
    if (x >= a)
        return 1.0;
    if (x < 0.0)
        return (x + a) * (x + a) / (2.0 * a * a);
    return 1.0 - (a - x) * (a - x) / (2.0 * a * a);
}

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto d = std::filesystem::temp_directory_path() / ("pairscope_test_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

/// Category of the pairscope::Error thrown by f, if any.
template <class F>
std::optional<pairscope::ErrorCategory> error_of(F&& f)
{
    try {
        f();
    } catch (const pairscope::Error& e) {
        return e.category();
    }
    return std::nullopt;
}

} // namespace oracle

#endif

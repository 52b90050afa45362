#ifndef PAIRSCOPE_GEOMETRY_HPP
#define PAIRSCOPE_GEOMETRY_HPP

// Sidereal timekeeping and two-element fringe geometry.
//
// Phase convention: the inter-element phase is East minus West. A source whose
// RA exceeds the current LST (east of the meridian) has a positive hour offset
// alpha, and its phase falls as LST advances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "constants.hpp"
#include "error.hpp"
#include "phase.hpp"

namespace pairscope::geometry {

struct ObservatoryConfig {
    double longitude_east_deg = 0.0;
    double latitude_deg = 0.0;
    double baseline_wavelengths = 33.0; // at reference_freq_mhz
    double reference_freq_mhz = 1425.0;
    double pointing_dec_deg = -4.3;
    double pointing_az_deg = 180.0;
    double element_fwhm_deg = 5.3;
    double instrumental_delay_ns = -82.0;

    /// True when the pointing differs from the modeled south-facing setup.
    bool nonstandard_azimuth() const noexcept { return pointing_az_deg != 180.0; }

    void validate() const
    {
        if (!(baseline_wavelengths > 0.0))
            fail(ErrorCategory::config, "baseline_wavelengths must be > 0");
        if (!(reference_freq_mhz > 0.0))
            fail(ErrorCategory::config, "reference_freq_mhz must be > 0");
        if (!(element_fwhm_deg > 0.0 && element_fwhm_deg < 90.0))
            fail(ErrorCategory::config, "element_fwhm_deg must lie in (0, 90)");
        if (!(std::abs(pointing_dec_deg) < 90.0))
            fail(ErrorCategory::config, "pointing_dec_deg must lie in (-90, 90)");
    }
};

struct SkyDirection {
    double ra_hr = 0.0;
    double dec_deg = 0.0;

    SkyDirection() = default;
    SkyDirection(double ra, double dec) : ra_hr(wrap_hours(ra)), dec_deg(dec)
    {
        if (!(dec >= -90.0 && dec <= 90.0))
            fail(ErrorCategory::domain, "declination outside [-90, 90]");
    }
};

// Validity window of the mean sidereal time polynomial: 1990-01-01 .. 2100-01-01.
inline constexpr double kMjdMin = 47892.0;
inline constexpr double kMjdMax = 88069.0;

/// Local mean sidereal time in hours, [0, 24).
inline double mjd_to_lst(double mjd, double longitude_east_deg)
{
    if (!(mjd >= kMjdMin && mjd <= kMjdMax))
        fail(ErrorCategory::range, "mjd " + std::to_string(mjd) + " outside 1990-2100");
    // Days from J2000.0 split into integer and fraction to keep the large
    // 360.98...*d term accurate.
    const double d = mjd - 51544.5;
    const double t = d / 36525.0;
    const double whole = std::floor(d);
    const double frac = d - whole;
    // 360.98564736629 * d = 360 * d + 0.98564736629 * d; 360 * whole is a multiple of 360.
    double gmst = 280.46061837 + 360.0 * frac + 0.98564736629 * d +
                  0.000387933 * t * t - t * t * t / 38710000.0;
    gmst = std::fmod(gmst + longitude_east_deg, 360.0);
    if (gmst < 0.0)
        gmst += 360.0;
    return wrap_hours(gmst / 15.0);
}

/// Hours of LST for the inter-element phase to advance 2 pi.
inline double fringe_period(double baseline_wavelengths, double dec_deg)
{
    if (!(std::abs(dec_deg) < 90.0))
        fail(ErrorCategory::domain, "fringe_period: declination at the pole");
    if (!(baseline_wavelengths > 0.0))
        fail(ErrorCategory::domain, "fringe_period: baseline must be positive");
    return 12.0 / (kPi * baseline_wavelengths * std::cos(deg_to_rad(dec_deg)));
}

/// Angular distance (degrees) of a source from the element boresight when
/// the local meridian is at `lst`. Small-field approximation.
inline double beam_offset_deg(const SkyDirection& source, double lst_hr,
                              const ObservatoryConfig& obs)
{
    const double h = hour_difference(source.ra_hr, lst_hr);
    const double east = h * 15.0 * std::cos(deg_to_rad(source.dec_deg));
    const double north = source.dec_deg - obs.pointing_dec_deg;
    return std::hypot(east, north);
}

/// Instrumental phase 2 pi f T_INT, wrapped. MHz * ns = 1e-3 cycles.
inline double instrumental_phase(double rf_freq_mhz, const ObservatoryConfig& obs)
{
    const double cycles = rf_freq_mhz * obs.instrumental_delay_ns * 1e-3;
    return wrap_phase(kTwoPi * (cycles - std::round(cycles)));
}

/// Geometric (unwrapped) phase 2 pi B(f) sin(alpha).
inline double geometric_phase(const SkyDirection& source, double lst_hr,
                              const ObservatoryConfig& obs, double rf_freq_mhz)
{
    const double h = hour_difference(source.ra_hr, lst_hr);
    const double alpha = h * (kTwoPi / 24.0) * std::cos(deg_to_rad(source.dec_deg));
    const double b = obs.baseline_wavelengths * rf_freq_mhz / obs.reference_freq_mhz;
    return kTwoPi * b * std::sin(alpha);
}

/// Expected East-West phase in (-pi, pi] for a source at `lst`.
inline double expected_ew_phase(const SkyDirection& source, double lst_hr,
                                const ObservatoryConfig& obs, double rf_freq_mhz)
{
    if (beam_offset_deg(source, lst_hr, obs) > 3.0 * obs.element_fwhm_deg)
        fail(ErrorCategory::out_of_beam, "source more than 3 FWHM from boresight");
    return wrap_phase(geometric_phase(source, lst_hr, obs, rf_freq_mhz) +
                      instrumental_phase(rf_freq_mhz, obs));
}

/// Geometric delay in seconds (positive when the East element leads).
inline double geometric_delay_s(const SkyDirection& source, double lst_hr,
                                const ObservatoryConfig& obs)
{
    const double f_ref_hz = obs.reference_freq_mhz * 1e6;
    return geometric_phase(source, lst_hr, obs, obs.reference_freq_mhz) / (kTwoPi * f_ref_hz);
}

inline double ra_bin_width(std::size_t n_bins) { return 24.0 / static_cast<double>(n_bins); }

/// Left-closed RA bins over [0, 24).
inline std::size_t ra_bin(double lst_hr, std::size_t n_bins)
{
    if (n_bins == 0)
        fail(ErrorCategory::precondition, "ra_bin: n_bins must be >= 1");
    const double h = wrap_hours(lst_hr);
    const double n = static_cast<double>(n_bins);
    auto b = static_cast<std::size_t>(std::floor(h * n / 24.0));
    b = std::min(b, n_bins - 1);
    // snap to the boundaries b * 24 / n used everywhere else
    if (b > 0 && static_cast<double>(b) * 24.0 / n > h)
        --b;
    else if (b + 1 < n_bins && static_cast<double>(b + 1) * 24.0 / n <= h)
        ++b;
    return b;
}

inline double ra_bin_center(std::size_t bin, std::size_t n_bins)
{
    return (static_cast<double>(bin) + 0.5) * ra_bin_width(n_bins);
}

/// Sidereal seconds for a source to cross one RA bin (multiply by
/// 0.99727 for solar seconds).
inline double ra_bin_traversal_s(std::size_t n_bins)
{
    return ra_bin_width(n_bins) * 3600.0;
}

/// Gaussian element power pattern.
inline double beam_gain(double offset_deg, double fwhm_deg)
{
    const double x = offset_deg / fwhm_deg;
    return std::exp(-4.0 * std::numbers::ln2 * x * x);
}

} // namespace pairscope::geometry

#endif

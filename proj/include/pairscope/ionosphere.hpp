#ifndef PAIRSCOPE_IONOSPHERE_HPP
#define PAIRSCOPE_IONOSPHERE_HPP

// Ionospheric propagation diagnostics. Units follow the standard engineering
// forms: B in tesla, TEC in electrons/m^2, f0 in GHz, df in MHz, delay in us.
// None of these are applied to data; the pipeline only checks that each
// effect is small against its filter windows.

#include <cmath>
#include <string>

#include "constants.hpp"
#include "error.hpp"

namespace pairscope::ionosphere {

struct IonoParams {
    double b_field_t = 50e-6;
    double tec = 1e18;
    double tec_rate = 0.7e16;
    double refraction_100mhz_deg = 0.05;

    void validate() const
    {
        if (!(tec >= 0.0) || !(b_field_t >= 0.0) || !(refraction_100mhz_deg >= 0.0))
            fail(ErrorCategory::domain, "ionosphere parameters must be non-negative");
    }
};

namespace detail {
inline void require_positive_freq(double f0_ghz, const char* who)
{
    if (!(f0_ghz > 0.0))
        fail(ErrorCategory::domain, std::string(who) + ": f0 must be > 0 GHz");
}
} // namespace detail

/// Faraday rotation phase of a circularly polarized wave, radians.
inline double faraday_phase(const IonoParams& p, double f0_ghz)
{
    detail::require_positive_freq(f0_ghz, "faraday_phase");
    return 2.36e-14 * p.b_field_t * p.tec / (f0_ghz * f0_ghz);
}

/// Phase difference between two pulses df MHz apart (derivative of the
/// Faraday phase with respect to frequency).
inline double faraday_pair_phase_diff(const IonoParams& p, double df_mhz, double f0_ghz)
{
    detail::require_positive_freq(f0_ghz, "faraday_pair_phase_diff");
    return -4.72e-17 * p.b_field_t * p.tec * df_mhz / (f0_ghz * f0_ghz * f0_ghz);
}

/// Group delay, microseconds.
inline double iono_delay_us(const IonoParams& p, double f0_ghz)
{
    detail::require_positive_freq(f0_ghz, "iono_delay");
    return 1.345e-19 * p.tec / (f0_ghz * f0_ghz);
}

/// Faraday phase of the TEC accumulated over one integration.
inline double tec_rate_phase_drift(const IonoParams& p, double t_int_s, double f0_ghz)
{
    if (!(t_int_s > 0.0))
        fail(ErrorCategory::precondition, "tec_rate_phase_drift: integration must be > 0 s");
    detail::require_positive_freq(f0_ghz, "tec_rate_phase_drift");
    return 2.36e-14 * p.b_field_t * (p.tec_rate * t_int_s) / (f0_ghz * f0_ghz);
}

/// Inter-element phase bound from refraction, scaled 1/f^2 from the 100 MHz value.
inline double refraction_phase_bound(const IonoParams& p, double f0_ghz,
                                     double baseline_wavelengths)
{
    detail::require_positive_freq(f0_ghz, "refraction_phase_bound");
    const double scale = 0.1 / f0_ghz;
    const double dtheta = deg_to_rad(p.refraction_100mhz_deg * scale * scale);
    return kTwoPi * baseline_wavelengths * dtheta;
}

struct IonoReport {
    double faraday_phase_rad;
    double pair_phase_diff_rad;
    double delay_us;
    double tec_drift_rad;
    double refraction_bound_rad;
};

inline IonoReport evaluate(const IonoParams& p, double f0_ghz, double df_mhz, double t_int_s,
                           double baseline_wavelengths)
{
    p.validate();
    return {faraday_phase(p, f0_ghz), faraday_pair_phase_diff(p, df_mhz, f0_ghz),
            iono_delay_us(p, f0_ghz), tec_rate_phase_drift(p, t_int_s, f0_ghz),
            refraction_phase_bound(p, f0_ghz, baseline_wavelengths)};
}

/// Throws unless the worst-case Faraday pair phase stays inside the
/// pair phase window.
inline void assert_faraday_margin(const IonoParams& worst, double df_max_hz, double f0_min_ghz,
                                  double window_rad)
{
    const double d = std::abs(faraday_pair_phase_diff(worst, df_max_hz * 1e-6, f0_min_ghz));
    if (!(d < window_rad))
        fail(ErrorCategory::config,
             "Faraday pair phase " + std::to_string(d) + " rad not below filter window " +
                 std::to_string(window_rad) + " rad");
}

} // namespace pairscope::ionosphere

#endif

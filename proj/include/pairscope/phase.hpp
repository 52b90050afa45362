#ifndef PAIRSCOPE_PHASE_HPP
#define PAIRSCOPE_PHASE_HPP

#include <cmath>

#include "constants.hpp"
#include "error.hpp"

namespace pairscope {

/// Wraps an angle into (-pi, pi]. -pi itself maps to +pi.
inline double wrap_phase(double x)
{
    if (!std::isfinite(x))
        fail(ErrorCategory::domain, "wrap_phase: non-finite angle");
    double r = std::remainder(x, kTwoPi); // [-pi, pi]
    if (r <= -kPi)
        r += kTwoPi;
    return r;
}

/// Wraps hours into [0, 24).
inline double wrap_hours(double h)
{
    double r = std::fmod(h, 24.0);
    if (r < 0.0)
        r += 24.0;
    if (r >= 24.0)
        r = 0.0;
    return r;
}

/// Signed hour difference a - b folded into [-12, 12).
inline double hour_difference(double a, double b)
{
    double d = std::fmod(a - b + 12.0, 24.0);
    if (d < 0.0)
        d += 24.0;
    return d - 12.0;
}

} // namespace pairscope

#endif

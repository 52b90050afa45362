#ifndef PAIRSCOPE_CONSTANTS_HPP
#define PAIRSCOPE_CONSTANTS_HPP

#include <cstddef>
#include <numbers>

namespace pairscope {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// One spectral segment: 256 critically sampled bins spanning 954 Hz.
inline constexpr std::size_t kBinsPerSegment = 256;
inline constexpr std::size_t kCenterBin = kBinsPerSegment / 2;
inline constexpr double kSegmentBandwidthHz = 954.0;
inline constexpr double kSampleRateHz = kSegmentBandwidthHz;
inline constexpr double kBinWidthHz = kSegmentBandwidthHz / kBinsPerSegment;
inline constexpr double kIntegrationSeconds = kBinsPerSegment / kSampleRateHz;

inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kDefaultDetectionThresholdDb = 8.5;

// Coincident wideband power measurement.
inline constexpr double kBandPowerBandwidthHz = 50.0e6;

inline constexpr double deg_to_rad(double deg) noexcept { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) noexcept { return rad * 180.0 / kPi; }

} // namespace pairscope

#endif

#ifndef PAIRSCOPE_TYPES_HPP
#define PAIRSCOPE_TYPES_HPP

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "constants.hpp"
#include "error.hpp"

namespace pairscope {

enum class Element : std::uint8_t { East = 0, West = 1 };

inline constexpr std::array<Element, 2> kElements{Element::East, Element::West};

inline std::string_view element_code(Element e) noexcept { return e == Element::East ? "E" : "W"; }

inline Element parse_element(std::string_view s)
{
    if (s == "E" || s == "East")
        return Element::East;
    if (s == "W" || s == "West")
        return Element::West;
    fail(ErrorCategory::schema, "element must be E or W, got '" + std::string(s) + "'");
}

inline std::size_t element_index(Element e) noexcept { return static_cast<std::size_t>(e); }

/// One integration of complex baseband samples for one element and segment.
struct IqBlock {
    Element element = Element::East;
    std::uint64_t epoch = 0;
    double mjd = 0.0;
    std::uint32_t segment_index = 0;
    double segment_center_mhz = 0.0;
    std::vector<std::complex<double>> samples; // kBinsPerSegment values
};

/// Absolute frequency in Hz of bin `bin` in a segment centred at `center_mhz`.
inline double bin_frequency_hz(double center_mhz, std::size_t bin) noexcept
{
    return center_mhz * 1e6 +
           (static_cast<double>(bin) - static_cast<double>(kCenterBin)) * kBinWidthHz;
}

/// One detection in one 3.7 Hz bin on one element at one integration.
struct PulseEvent {
    double mjd = 0.0;
    Element element = Element::East;
    double rf_freq_hz = 0.0;
    double snr_db = 0.0;
    double phase_rad = 0.0;
    double seg_noise_db = 0.0;
    double band50_db = 0.0;
    std::uint32_t segment_index = 0;
    std::uint32_t bin_index = 0;

    friend bool operator==(const PulseEvent&, const PulseEvent&) = default;
};

/// Canonical event order: (mjd, segment, element, bin).
inline bool canonical_less(const PulseEvent& a, const PulseEvent& b) noexcept
{
    if (a.mjd != b.mjd)
        return a.mjd < b.mjd;
    if (a.segment_index != b.segment_index)
        return a.segment_index < b.segment_index;
    if (a.element != b.element)
        return a.element < b.element;
    return a.bin_index < b.bin_index;
}

} // namespace pairscope

#endif

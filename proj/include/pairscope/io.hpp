#ifndef PAIRSCOPE_IO_HPP
#define PAIRSCOPE_IO_HPP

// Delimited-text event and pair files, and the raw IQ block stream.
//
// Text files may start with '#' provenance lines; the first non-comment line
// is the header row and must match the column list exactly.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "error.hpp"
#include "secondlevel.hpp"
#include "types.hpp"

namespace pairscope::io {

inline constexpr std::string_view kEventHeader =
    "mjd,element,rf_freq_hz,snr_db,phase_rad,seg_noise_db,band50_db,segment_index,bin_index";

inline constexpr std::string_view kPairHeader =
    "mjd,lst_hr,ra_bin,f0_hz,df_hz,snr_e0_db,snr_w0_db,snr_edf_db,snr_wdf_db,dphi0_rad,"
    "dphidf_rad,ddfdphi_rad,llsnr_pair,segnoise_e0_db,segnoise_w0_db,segnoise_edf_db,"
    "segnoise_wdf_db,band50_e_db,band50_w_db";

/// Run identity stamped on every output file.
struct Provenance {
    std::string manifest_hash;
    std::uint64_t seed = 0;
    std::string filters;

    std::string line() const
    {
        std::string s = "# manifest=" + manifest_hash + " seed=" + std::to_string(seed);
        if (!filters.empty())
            s += " filters=" + filters;
        return s;
    }
};

/// printf-style fixed formatting; deterministic for a given libc.
inline std::string fixed(double v, int precision)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

namespace detail {

inline std::vector<std::string_view> header_columns(std::string_view header)
{
    return split_csv(header);
}

template <class T>
T parse_number(std::string_view text, std::string_view column, std::size_t line_no)
{
    T v{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        fail(ErrorCategory::schema, "line " + std::to_string(line_no) + ", column '" +
                                        std::string(column) + "': cannot parse '" +
                                        std::string(text) + "'");
    return v;
}

inline void strip_cr(std::string& line)
{
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
}

/// Reads comment lines and the header; returns the line number of the header.
inline std::size_t expect_header(std::istream& in, std::string_view expected,
                                 std::vector<std::string>* comments = nullptr)
{
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (!line.empty() && line[0] == '#') {
            if (comments)
                comments->push_back(line);
            continue;
        }
        const auto got = header_columns(line);
        const auto want = header_columns(expected);
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (i >= got.size())
                fail(ErrorCategory::schema, "header missing column '" + std::string(want[i]) + "'");
            if (got[i] != want[i])
                fail(ErrorCategory::schema, "header column " + std::to_string(i + 1) +
                                                ": expected '" + std::string(want[i]) +
                                                "', found '" + std::string(got[i]) + "'");
        }
        if (got.size() > want.size())
            fail(ErrorCategory::schema, "header has unexpected column '" +
                                            std::string(got[want.size()]) + "'");
        return line_no;
    }
    fail(ErrorCategory::schema, "missing header row");
}

} // namespace detail

// --- events ------------------------------------------------------------------

inline std::string format_event(const PulseEvent& e)
{
    std::string s;
    s.reserve(128);
    s += fixed(e.mjd, 9);
    s += ',';
    s += element_code(e.element);
    s += ',' + fixed(e.rf_freq_hz, 6);
    s += ',' + fixed(e.snr_db, 6);
    s += ',' + fixed(e.phase_rad, 9);
    s += ',' + fixed(e.seg_noise_db, 6);
    s += ',' + fixed(e.band50_db, 6);
    s += ',' + std::to_string(e.segment_index);
    s += ',' + std::to_string(e.bin_index);
    return s;
}

class EventWriter {
public:
    EventWriter(std::ostream& out, const Provenance* prov = nullptr) : out_(&out)
    {
        if (prov)
            *out_ << prov->line() << '\n';
        *out_ << kEventHeader << '\n';
    }

    void write(const PulseEvent& e) { *out_ << format_event(e) << '\n'; }

    void write(std::span<const PulseEvent> events)
    {
        for (const auto& e : events)
            write(e);
    }

private:
    std::ostream* out_;
};

inline PulseEvent parse_event(std::string_view line, std::size_t line_no)
{
    const auto cols = split_csv(line);
    const auto names = split_csv(kEventHeader);
    if (cols.size() != names.size())
        fail(ErrorCategory::schema, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(names.size()) + " columns, found " +
                                        std::to_string(cols.size()));
    PulseEvent e;
    e.mjd = detail::parse_number<double>(cols[0], names[0], line_no);
    e.element = parse_element(cols[1]);
    e.rf_freq_hz = detail::parse_number<double>(cols[2], names[2], line_no);
    e.snr_db = detail::parse_number<double>(cols[3], names[3], line_no);
    e.phase_rad = detail::parse_number<double>(cols[4], names[4], line_no);
    e.seg_noise_db = detail::parse_number<double>(cols[5], names[5], line_no);
    e.band50_db = detail::parse_number<double>(cols[6], names[6], line_no);
    e.segment_index = detail::parse_number<std::uint32_t>(cols[7], names[7], line_no);
    e.bin_index = detail::parse_number<std::uint32_t>(cols[8], names[8], line_no);
    if (e.bin_index >= kBinsPerSegment)
        fail(ErrorCategory::schema, "line " + std::to_string(line_no) +
                                        ", column 'bin_index': outside [0, 255]");
    return e;
}

inline std::vector<PulseEvent> read_events(std::istream& in)
{
    std::size_t line_no = detail::expect_header(in, kEventHeader);
    std::vector<PulseEvent> events;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty() || line[0] == '#')
            continue;
        events.push_back(parse_event(line, line_no));
    }
    return events;
}

// --- pairs -------------------------------------------------------------------

inline std::string format_pair(const secondlevel::PulsePair& p)
{
    std::string s;
    s.reserve(256);
    s += fixed(p.mjd, 9);
    s += ',' + fixed(p.lst_hr, 9);
    s += ',' + std::to_string(p.ra_bin);
    s += ',' + fixed(p.f0_hz, 6);
    s += ',' + fixed(p.df_hz, 6);
    for (double v : p.snr_db)
        s += ',' + fixed(v, 6);
    s += ',' + fixed(p.dphi_0, 9);
    s += ',' + fixed(p.dphi_df, 9);
    s += ',' + fixed(p.ddf_dphi, 9);
    s += ',' + fixed(p.llsnr_pair, 6);
    for (double v : p.seg_noise_db)
        s += ',' + fixed(v, 6);
    for (double v : p.band50_db)
        s += ',' + fixed(v, 6);
    return s;
}

inline void write_pairs(std::ostream& out, std::span<const secondlevel::PulsePair> pairs,
                        const Provenance* prov = nullptr)
{
    if (prov)
        out << prov->line() << '\n';
    out << kPairHeader << '\n';
    for (const auto& p : pairs)
        out << format_pair(p) << '\n';
}

inline secondlevel::PulsePair parse_pair(std::string_view line, std::size_t line_no)
{
    const auto cols = split_csv(line);
    const auto names = split_csv(kPairHeader);
    if (cols.size() != names.size())
        fail(ErrorCategory::schema, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(names.size()) + " columns, found " +
                                        std::to_string(cols.size()));
    auto num = [&](std::size_t i) { return detail::parse_number<double>(cols[i], names[i], line_no); };
    secondlevel::PulsePair p;
    p.mjd = num(0);
    p.lst_hr = num(1);
    p.ra_bin = detail::parse_number<std::size_t>(cols[2], names[2], line_no);
    p.f0_hz = num(3);
    p.df_hz = num(4);
    for (std::size_t i = 0; i < 4; ++i)
        p.snr_db[i] = num(5 + i);
    p.dphi_0 = num(9);
    p.dphi_df = num(10);
    p.ddf_dphi = num(11);
    p.llsnr_pair = num(12);
    for (std::size_t i = 0; i < 4; ++i)
        p.seg_noise_db[i] = num(13 + i);
    p.band50_db[0] = num(17);
    p.band50_db[1] = num(18);
    return p;
}

inline std::vector<secondlevel::PulsePair> read_pairs(std::istream& in,
                                                      std::vector<std::string>* comments = nullptr)
{
    std::size_t line_no = detail::expect_header(in, kPairHeader, comments);
    std::vector<secondlevel::PulsePair> pairs;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty() || line[0] == '#')
            continue;
        pairs.push_back(parse_pair(line, line_no));
    }
    return pairs;
}

// --- raw IQ blocks ---------------------------------------------------------------
//
// Little-endian. File header: magic "PPIQ", u32 version (1), u32 samples per
// block (256), f64 sample rate (Hz), u32 segment count, then that many f64
// segment centres (MHz). Each block: u64 epoch, f64 mjd, u8 element (0 East,
// 1 West), u32 segment index, then 256 interleaved f32 I/Q pairs.

namespace detail {

template <class T>
void put(std::ostream& out, T v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(buf, buf + sizeof(T));
    out.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& in)
{
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T)))
        fail(ErrorCategory::io, "raw block stream truncated");
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace detail

inline constexpr std::array<char, 4> kRawMagic{'P', 'P', 'I', 'Q'};

inline void write_raw_header(std::ostream& out, std::span<const double> segments_mhz)
{
    out.write(kRawMagic.data(), kRawMagic.size());
    detail::put<std::uint32_t>(out, 1);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(kBinsPerSegment));
    detail::put<double>(out, kSampleRateHz);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(segments_mhz.size()));
    for (double c : segments_mhz)
        detail::put<double>(out, c);
}

inline void write_raw_block(std::ostream& out, const IqBlock& b)
{
    detail::put<std::uint64_t>(out, b.epoch);
    detail::put<double>(out, b.mjd);
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(b.element));
    detail::put<std::uint32_t>(out, b.segment_index);
    for (const auto& z : b.samples) {
        detail::put<float>(out, static_cast<float>(z.real()));
        detail::put<float>(out, static_cast<float>(z.imag()));
    }
}

struct RawHeader {
    std::uint32_t samples_per_block = 0;
    double sample_rate_hz = 0.0;
    std::vector<double> segments_mhz;
};

inline RawHeader read_raw_header(std::istream& in)
{
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kRawMagic)
        fail(ErrorCategory::schema, "not a raw IQ block stream");
    if (detail::get<std::uint32_t>(in) != 1)
        fail(ErrorCategory::schema, "unsupported raw stream version");
    RawHeader h;
    h.samples_per_block = detail::get<std::uint32_t>(in);
    h.sample_rate_hz = detail::get<double>(in);
    const auto n = detail::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n; ++i)
        h.segments_mhz.push_back(detail::get<double>(in));
    if (h.samples_per_block != kBinsPerSegment)
        fail(ErrorCategory::schema, "raw stream block size is not 256");
    return h;
}

/// Next block, or false at a clean end of stream.
inline bool read_raw_block(std::istream& in, const RawHeader& h, IqBlock& b)
{
    if (in.peek() == std::char_traits<char>::eof())
        return false;
    b.epoch = detail::get<std::uint64_t>(in);
    b.mjd = detail::get<double>(in);
    const auto el = detail::get<std::uint8_t>(in);
    if (el > 1)
        fail(ErrorCategory::schema, "raw block element code out of range");
    b.element = static_cast<Element>(el);
    b.segment_index = detail::get<std::uint32_t>(in);
    if (b.segment_index >= h.segments_mhz.size())
        fail(ErrorCategory::schema, "raw block segment index out of range");
    b.segment_center_mhz = h.segments_mhz[b.segment_index];
    b.samples.resize(h.samples_per_block);
    for (auto& z : b.samples) {
        const float re = detail::get<float>(in);
        const float im = detail::get<float>(in);
        z = {re, im};
    }
    return true;
}

} // namespace pairscope::io

#endif

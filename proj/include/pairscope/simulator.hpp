#ifndef PAIRSCOPE_SIMULATOR_HPP
#define PAIRSCOPE_SIMULATOR_HPP

// Deterministic synthesis of two-element baseband observations.
//
// Each integration ("epoch") produces one 256-sample IqBlock per element per
// configured segment. Blocks hold circular AWGN plus any tones injected by the
// scenario's sources at that epoch. Every block draws from its own stream
// seeded by (seed, epoch, segment, element), so any block can be regenerated
// alone and the output does not depend on evaluation order.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "constants.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "phase.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace pairscope::simulator {

enum class SourceKind { celestial_pulse_pair, terrestrial_rfi, natural_broadband };

inline std::string_view source_kind_name(SourceKind k)
{
    switch (k) {
    case SourceKind::celestial_pulse_pair: return "celestial_pulse_pair";
    case SourceKind::terrestrial_rfi: return "terrestrial_rfi";
    case SourceKind::natural_broadband: return "natural_broadband";
    }
    return "?";
}

enum class NoiseModel {
    full,   // every block synthesized and channelized
    sparse, // noise-only blocks replaced by draws from the exact null event law
};

struct SourceSpec {
    std::string name;
    SourceKind kind = SourceKind::celestial_pulse_pair;
    geometry::SkyDirection direction;
    double snr_db = 12.0;          // per-pulse bin SNR at boresight
    double f0_mhz = 0.0;           // lower pulse (or RFI tone) frequency
    double df_hz = 0.0;            // pair spacing; 0 = single tone (RFI only)
    double cadence_per_hr = 0.0;   // Poisson rate of emissions
    double flux_band_db = 0.0;     // natural_broadband: rise of 50 MHz power at boresight
    double fixed_phase_rad = 0.0;  // terrestrial: measured E-W phase at f0
    bool random_phase = false;     // terrestrial: new E-W phase per emission
    std::uint32_t bins_lit = 1;    // terrestrial: simultaneous bins in the f0 segment
    std::uint32_t jitter_bins = 0; // random common bin offset per emission, +/-
    double freq_offset_bins = 0.0; // fractional off-grid offset of every tone
    double emit_lst_halfwidth_hr = -1.0; // celestial: emit only within this of transit (<0: off)
};

struct ScenarioConfig {
    geometry::ObservatoryConfig obs;
    double duration_days = 0.0;
    double mjd_start = 60498.622;
    std::uint64_t seed = 1;
    std::vector<double> segments_mhz;
    std::vector<SourceSpec> sources;
    double band_noise_floor_db = 0.0;
    double noise_power = 1.0; // system noise per bin (linear, arbitrary)
    bool awgn = true;
    NoiseModel noise_model = NoiseModel::full;
    double threshold_db = kDefaultDetectionThresholdDb;
    std::size_t noise_history = 16;

    std::uint64_t epoch_count() const
    {
        if (!(duration_days > 0.0))
            return 0;
        return static_cast<std::uint64_t>(std::floor(duration_days * kSecondsPerDay /
                                                     kIntegrationSeconds));
    }

    double epoch_mjd(std::uint64_t epoch) const
    {
        return mjd_start + static_cast<double>(epoch) * (kIntegrationSeconds / kSecondsPerDay);
    }
};

inline constexpr double kBandMinMhz = 1398.0;
inline constexpr double kBandMaxMhz = 1451.0;

struct BinLocation {
    std::uint32_t segment = 0;
    std::uint32_t bin = 0;
};

/// Nearest bin hosting `freq_hz`, if any segment covers it.
inline std::optional<BinLocation> locate_bin(std::span<const double> segments_mhz, double freq_hz)
{
    for (std::size_t s = 0; s < segments_mhz.size(); ++s) {
        const double k = std::round((freq_hz - segments_mhz[s] * 1e6) / kBinWidthHz) +
                         static_cast<double>(kCenterBin);
        if (k >= 0.0 && k < static_cast<double>(kBinsPerSegment))
            return BinLocation{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(k)};
    }
    return std::nullopt;
}

inline void validate(const ScenarioConfig& cfg)
{
    cfg.obs.validate();
    if (!(cfg.duration_days >= 0.0))
        fail(ErrorCategory::config, "duration_days must be >= 0");
    if (!(cfg.noise_power > 0.0))
        fail(ErrorCategory::config, "noise_power must be > 0");
    const double half_span_mhz = 0.5 * kSegmentBandwidthHz * 1e-6;
    for (double c : cfg.segments_mhz) {
        if (!(c - half_span_mhz >= kBandMinMhz && c + half_span_mhz <= kBandMaxMhz))
            fail(ErrorCategory::config, "segment " + std::to_string(c) +
                                            " MHz outside the 1398-1451 MHz band");
    }
    for (std::size_t i = 0; i + 1 < cfg.segments_mhz.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.segments_mhz.size(); ++j)
            if (std::abs(cfg.segments_mhz[i] - cfg.segments_mhz[j]) * 1e6 < kSegmentBandwidthHz)
                fail(ErrorCategory::config, "segments overlap");
    for (const auto& s : cfg.sources) {
        const std::string who = "source '" + s.name + "': ";
        if (!std::isfinite(s.snr_db))
            fail(ErrorCategory::config, who + "snr_db must be finite");
        if (!(s.cadence_per_hr >= 0.0))
            fail(ErrorCategory::config, who + "cadence must be >= 0");
        if (s.kind == SourceKind::natural_broadband)
            continue;
        if (s.kind == SourceKind::celestial_pulse_pair && !(s.df_hz > 0.0))
            fail(ErrorCategory::config, who + "celestial pulse pairs need df_hz > 0");
        if (s.bins_lit < 1 || s.bins_lit > kBinsPerSegment)
            fail(ErrorCategory::config, who + "bins_lit must be in [1, 256]");
        const double j = static_cast<double>(s.jitter_bins) * kBinWidthHz;
        for (double f : {s.f0_mhz * 1e6 - j, s.f0_mhz * 1e6 + j}) {
            if (!locate_bin(cfg.segments_mhz, f))
                fail(ErrorCategory::config, who + "frequency " + std::to_string(f * 1e-6) +
                                                " MHz not hosted by any segment");
        }
        if (s.df_hz > 0.0)
            for (double f : {s.f0_mhz * 1e6 + s.df_hz - j, s.f0_mhz * 1e6 + s.df_hz + j})
                if (!locate_bin(cfg.segments_mhz, f))
                    fail(ErrorCategory::config,
                         who + "df " + std::to_string(s.df_hz) + " Hz puts the upper pulse at " +
                             std::to_string(f * 1e-6) + " MHz, outside every segment");
    }
}

/// A constant-amplitude tone occupying one integration in both elements.
struct Tone {
    std::uint32_t segment = 0;
    double bin = 0.0;             // fractional bin position, 0..255
    double bin_power = 0.0;       // |X_k|^2 produced on-grid
    double phase_east = 0.0;
    double phase_west = 0.0;
};

/// Adds `tone` to a block. Bin power scales as N * a^2 for the 1/sqrt(N) DFT.
inline void add_tone(IqBlock& block, const Tone& tone)
{
    if (block.samples.size() != kBinsPerSegment)
        fail(ErrorCategory::shape, "add_tone: block must hold 256 samples");
    const double amp = std::sqrt(tone.bin_power / static_cast<double>(kBinsPerSegment));
    const double phase0 = block.element == Element::East ? tone.phase_east : tone.phase_west;
    const double cycles_per_sample =
        (tone.bin - static_cast<double>(kCenterBin)) / static_cast<double>(kBinsPerSegment);
    for (std::size_t n = 0; n < kBinsPerSegment; ++n) {
        const double ph = phase0 + kTwoPi * cycles_per_sample * static_cast<double>(n);
        block.samples[n] += std::polar(amp, ph);
    }
}

/// Per-epoch quantities an injection needs.
struct InjectionContext {
    const geometry::ObservatoryConfig* obs = nullptr;
    std::span<const double> segments_mhz;
    double lst_hr = 0.0;
    double noise_power = 1.0;
};

namespace detail {

inline Tone make_tone(const InjectionContext& ctx, const BinLocation& loc, double offset_bins,
                      double snr_lin, double dphi, double carrier)
{
    Tone t;
    t.segment = loc.segment;
    t.bin = static_cast<double>(loc.bin) + offset_bins;
    t.bin_power = snr_lin * ctx.noise_power;
    t.phase_west = wrap_phase(carrier);
    t.phase_east = wrap_phase(carrier + dphi);
    return t;
}

inline BinLocation require_bin(const InjectionContext& ctx, double freq_hz, const SourceSpec& src)
{
    auto loc = locate_bin(ctx.segments_mhz, freq_hz);
    if (!loc)
        fail(ErrorCategory::injection, "source '" + src.name + "': target " +
                                           std::to_string(freq_hz * 1e-6) +
                                           " MHz outside synthesized segments");
    return *loc;
}

inline double tone_freq_mhz(const InjectionContext& ctx, const BinLocation& loc, double offset)
{
    return (bin_frequency_hz(ctx.segments_mhz[loc.segment], loc.bin) + offset * kBinWidthHz) * 1e-6;
}

} // namespace detail

/// Tones for one celestial pulse pair at the current epoch. The West tone
/// carries the carrier phase; the East tone leads it by the expected
/// inter-element phase at that tone's frequency. Amplitude follows the beam.
inline std::vector<Tone> pulse_pair_tones(const SourceSpec& src, const InjectionContext& ctx,
                                          Rng& rng)
{
    const auto& obs = *ctx.obs;
    const double offset_deg = geometry::beam_offset_deg(src.direction, ctx.lst_hr, obs);
    const double gain = geometry::beam_gain(offset_deg, obs.element_fwhm_deg);
    const double snr_lin = std::pow(10.0, src.snr_db / 10.0) * gain;
    const double jitter =
        src.jitter_bins == 0
            ? 0.0
            : static_cast<double>(rng.below(2 * src.jitter_bins + 1)) -
                  static_cast<double>(src.jitter_bins);
    std::vector<Tone> tones;
    for (double f_hz : {src.f0_mhz * 1e6, src.f0_mhz * 1e6 + src.df_hz}) {
        const auto loc = detail::require_bin(ctx, f_hz + jitter * kBinWidthHz, src);
        const double f_mhz = detail::tone_freq_mhz(ctx, loc, src.freq_offset_bins);
        const double dphi = geometry::expected_ew_phase(src.direction, ctx.lst_hr, obs, f_mhz);
        tones.push_back(
            detail::make_tone(ctx, loc, src.freq_offset_bins, snr_lin, dphi, rng.phase()));
    }
    return tones;
}

/// Tones for one terrestrial emission: the E-W phase is fixed (or drawn per
/// emission) and does not follow LST. The geometric part scales with
/// frequency; the instrumental part 2 pi f T_INT is added at each tone.
inline std::vector<Tone> rfi_tones(const SourceSpec& src, const InjectionContext& ctx, Rng& rng)
{
    const auto& obs = *ctx.obs;
    const double snr_lin = std::pow(10.0, src.snr_db / 10.0);
    const double measured_f0 = src.random_phase ? rng.phase() : src.fixed_phase_rad;
    const double geometric_f0 =
        wrap_phase(measured_f0 - geometry::instrumental_phase(src.f0_mhz, obs));
    const double jitter =
        src.jitter_bins == 0
            ? 0.0
            : static_cast<double>(rng.below(2 * src.jitter_bins + 1)) -
                  static_cast<double>(src.jitter_bins);
    auto dphi_at = [&](double f_mhz) {
        return geometric_f0 * (f_mhz / src.f0_mhz) + geometry::instrumental_phase(f_mhz, obs);
    };

    std::vector<Tone> tones;
    const auto base = detail::require_bin(ctx, src.f0_mhz * 1e6 + jitter * kBinWidthHz, src);
    std::vector<std::uint32_t> bins{base.bin};
    if (src.bins_lit > 1) {
        // Partial Fisher-Yates over the other 255 bins.
        std::vector<std::uint32_t> pool;
        for (std::uint32_t k = 0; k < kBinsPerSegment; ++k)
            if (k != base.bin)
                pool.push_back(k);
        for (std::uint32_t i = 0; i + 1 < src.bins_lit; ++i) {
            const auto j = i + static_cast<std::uint32_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
            bins.push_back(pool[i]);
        }
        std::sort(bins.begin(), bins.end());
    }
    for (auto k : bins) {
        const BinLocation loc{base.segment, k};
        const double f_mhz = detail::tone_freq_mhz(ctx, loc, src.freq_offset_bins);
        tones.push_back(detail::make_tone(ctx, loc, src.freq_offset_bins, snr_lin, dphi_at(f_mhz),
                                          rng.phase()));
    }
    if (src.df_hz > 0.0) {
        const auto loc =
            detail::require_bin(ctx, src.f0_mhz * 1e6 + src.df_hz + jitter * kBinWidthHz, src);
        const double f_mhz = detail::tone_freq_mhz(ctx, loc, src.freq_offset_bins);
        tones.push_back(detail::make_tone(ctx, loc, src.freq_offset_bins, snr_lin, dphi_at(f_mhz),
                                          rng.phase()));
    }
    return tones;
}

inline void apply_tones(std::span<IqBlock> blocks, std::span<const Tone> tones)
{
    for (const auto& t : tones)
        for (auto& b : blocks)
            if (b.segment_index == t.segment)
                add_tone(b, t);
}

/// Adds one celestial pulse pair to the East/West blocks of one epoch.
inline void inject_pulse_pair(std::span<IqBlock> blocks, const SourceSpec& src,
                              const InjectionContext& ctx, Rng& rng)
{
    const auto tones = pulse_pair_tones(src, ctx, rng);
    apply_tones(blocks, tones);
}

/// Adds one terrestrial emission to the blocks of one epoch. A zero cadence
/// source never emits, so this is only reached for scheduled emissions.
inline void inject_rfi(std::span<IqBlock> blocks, const SourceSpec& src,
                       const InjectionContext& ctx, Rng& rng)
{
    const auto tones = rfi_tones(src, ctx, rng);
    apply_tones(blocks, tones);
}

/// Radiometer fluctuation of a 50 MHz, one-integration power measurement.
inline double radiometer_sigma()
{
    return 1.0 / std::sqrt(kBandPowerBandwidthHz * kIntegrationSeconds);
}

/// 50 MHz band power in dB: floor + summed fractional contributions, with a
/// radiometer-equation fluctuation.
inline double band_power_db(double floor_db, double contributions_linear, Rng& rng)
{
    const double fluct = 1.0 + radiometer_sigma() * rng.normal();
    return floor_db + 10.0 * std::log10((1.0 + contributions_linear) * fluct);
}

/// A scheduled emission.
struct Emission {
    std::uint64_t epoch = 0;
    std::uint32_t source = 0;
    std::uint64_t serial = 0; // per-source emission counter, keys the emission stream
};

/// Blocks, band power and bookkeeping for one epoch.
struct EpochData {
    std::uint64_t epoch = 0;
    double mjd = 0.0;
    double lst_hr = 0.0;
    std::array<double, 2> band50_db{};
    std::vector<IqBlock> blocks; // segment-major, East before West
};

class Simulator {
public:
    explicit Simulator(ScenarioConfig cfg) : cfg_(std::move(cfg))
    {
        validate(cfg_);
        build_schedule();
    }

    const ScenarioConfig& config() const noexcept { return cfg_; }
    std::uint64_t epoch_count() const { return cfg_.epoch_count(); }
    double epoch_mjd(std::uint64_t e) const { return cfg_.epoch_mjd(e); }
    double epoch_lst(std::uint64_t e) const
    {
        return geometry::mjd_to_lst(epoch_mjd(e), cfg_.obs.longitude_east_deg);
    }

    /// Emissions keyed by epoch, in (epoch, source, serial) order.
    const std::multimap<std::uint64_t, Emission>& schedule() const noexcept { return schedule_; }

    /// Fractional rise of system noise from broadband sources at `lst`.
    double broadband_fraction(double lst_hr) const
    {
        double f = 0.0;
        for (const auto& s : cfg_.sources) {
            if (s.kind != SourceKind::natural_broadband)
                continue;
            const double off = geometry::beam_offset_deg(s.direction, lst_hr, cfg_.obs);
            f += (std::pow(10.0, s.flux_band_db / 10.0) - 1.0) *
                 geometry::beam_gain(off, cfg_.obs.element_fwhm_deg);
        }
        return f;
    }

    /// Noise-only (plus broadband) block for (epoch, segment, element).
    IqBlock noise_block(std::uint64_t epoch, std::uint32_t segment, Element el,
                        std::uint64_t stream = stream_tag::block, std::uint64_t extra = 0) const
    {
        IqBlock b;
        b.element = el;
        b.epoch = epoch;
        b.mjd = epoch_mjd(epoch);
        b.segment_index = segment;
        b.segment_center_mhz = cfg_.segments_mhz.at(segment);
        b.samples.assign(kBinsPerSegment, {0.0, 0.0});
        if (cfg_.awgn) {
            const double power = cfg_.noise_power * (1.0 + broadband_fraction(epoch_lst(epoch)));
            Rng rng(derive_seed(cfg_.seed, {stream, epoch, segment, element_index(el), extra}));
            for (auto& x : b.samples)
                x = rng.complex_gaussian(power);
        }
        return b;
    }

    /// Tones emitted at `epoch`.
    std::vector<Tone> epoch_tones(std::uint64_t epoch) const
    {
        std::vector<Tone> tones;
        auto [lo, hi] = schedule_.equal_range(epoch);
        if (lo == hi)
            return tones;
        const InjectionContext ctx{&cfg_.obs, cfg_.segments_mhz, epoch_lst(epoch),
                                   cfg_.noise_power};
        for (auto it = lo; it != hi; ++it) {
            const auto& em = it->second;
            const auto& src = cfg_.sources[em.source];
            Rng rng(derive_seed(cfg_.seed, {stream_tag::emission, em.source, em.serial}));
            auto t = src.kind == SourceKind::celestial_pulse_pair ? pulse_pair_tones(src, ctx, rng)
                                                                  : rfi_tones(src, ctx, rng);
            tones.insert(tones.end(), t.begin(), t.end());
        }
        return tones;
    }

    /// Band power (dB) for one element at one epoch, including the tiny
    /// contribution of any narrowband tones.
    double band_power(std::uint64_t epoch, Element el, std::span<const Tone> tones) const
    {
        double contrib = broadband_fraction(epoch_lst(epoch));
        const double bins_in_band = kBandPowerBandwidthHz / kBinWidthHz;
        for (const auto& t : tones)
            contrib += t.bin_power / cfg_.noise_power / bins_in_band;
        Rng rng(derive_seed(cfg_.seed, {stream_tag::band, epoch, element_index(el)}));
        return band_power_db(cfg_.band_noise_floor_db, contrib, rng);
    }

    double band_power(std::uint64_t epoch, Element el) const
    {
        return band_power(epoch, el, epoch_tones(epoch));
    }

    /// All blocks of one epoch, tones injected.
    EpochData synthesize_epoch(std::uint64_t epoch) const
    {
        EpochData d;
        d.epoch = epoch;
        d.mjd = epoch_mjd(epoch);
        d.lst_hr = epoch_lst(epoch);
        const auto tones = epoch_tones(epoch);
        for (std::uint32_t s = 0; s < cfg_.segments_mhz.size(); ++s)
            for (auto el : kElements)
                d.blocks.push_back(noise_block(epoch, s, el));
        apply_tones(d.blocks, tones);
        for (auto el : kElements)
            d.band50_db[element_index(el)] = band_power(epoch, el, tones);
        return d;
    }

    /// Calls sink(const EpochData&) for every epoch in order.
    template <class Sink>
    void synthesize_run(Sink&& sink) const
    {
        const auto n = epoch_count();
        for (std::uint64_t e = 0; e < n; ++e)
            sink(synthesize_epoch(e));
    }

private:
    void build_schedule()
    {
        const auto n = epoch_count();
        for (std::uint32_t i = 0; i < cfg_.sources.size(); ++i) {
            const auto& s = cfg_.sources[i];
            if (s.kind == SourceKind::natural_broadband || !(s.cadence_per_hr > 0.0) || n == 0)
                continue;
            Rng rng(derive_seed(cfg_.seed, {stream_tag::schedule, i}));
            const double mean_gap_s = 3600.0 / s.cadence_per_hr;
            double t = rng.exponential(mean_gap_s);
            std::uint64_t serial = 0;
            while (true) {
                const double ef = std::floor(t / kIntegrationSeconds);
                if (ef >= static_cast<double>(n))
                    break;
                const auto e = static_cast<std::uint64_t>(ef);
                if (emits_at(s, e))
                    schedule_.emplace(e, Emission{e, i, serial});
                ++serial;
                t += rng.exponential(mean_gap_s);
            }
        }
    }

    bool emits_at(const SourceSpec& s, std::uint64_t epoch) const
    {
        if (s.kind != SourceKind::celestial_pulse_pair)
            return true;
        const double lst = epoch_lst(epoch);
        if (geometry::beam_offset_deg(s.direction, lst, cfg_.obs) > 3.0 * cfg_.obs.element_fwhm_deg)
            return false;
        if (s.emit_lst_halfwidth_hr >= 0.0 &&
            std::abs(hour_difference(s.direction.ra_hr, lst)) > s.emit_lst_halfwidth_hr)
            return false;
        return true;
    }

    ScenarioConfig cfg_;
    std::multimap<std::uint64_t, Emission> schedule_;
};

} // namespace pairscope::simulator

#endif

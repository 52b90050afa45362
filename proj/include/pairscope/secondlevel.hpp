#ifndef PAIRSCOPE_SECONDLEVEL_HPP
#define PAIRSCOPE_SECONDLEVEL_HPP

// Second-level processing: four-pulse pair matching, phase differences with
// instrumental-delay compensation, composite SNR likelihoods, segment
// population RFI excision, and the pair filter set.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "constants.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "ionosphere.hpp"
#include "phase.hpp"
#include "types.hpp"

namespace pairscope::secondlevel {

using pairscope::wrap_phase;

struct FreqRange {
    double min_mhz = 0.0;
    double max_mhz = 0.0;

    bool contains(double f_hz) const noexcept
    {
        return f_hz >= min_mhz * 1e6 && f_hz <= max_mhz * 1e6;
    }
};

struct FilterSet {
    double df_min_hz = 300e3;
    double df_max_hz = 540e3;
    double ddf_phase_window_rad = 0.18; // |ddf_dphi| <= window
    double pulse_phase_window_rad = kPi; // |dphi_0|, |dphi_df| <= window (pi: open)
    double llsnr_pulse_threshold = 0.0;
    double llsnr_pair_threshold = -2.70;
    double rfi_margin_segments = 500.0;
    std::uint32_t rfi_population_limit = 10;
    double rfi_window_hours = 4.0;
    std::vector<FreqRange> freq_ranges{{1398.0, 1424.0}, {1426.0, 1451.0}};
    double detection_threshold_db = kDefaultDetectionThresholdDb;
    std::size_t ra_bins = 3200;

    double rfi_margin_hz() const noexcept { return rfi_margin_segments * kSegmentBandwidthHz; }

    void validate() const
    {
        if (!(df_min_hz < df_max_hz))
            fail(ErrorCategory::config, "df_min_hz must be below df_max_hz");
        if (!(ddf_phase_window_rad >= 0.0) || !(pulse_phase_window_rad >= 0.0))
            fail(ErrorCategory::config, "phase windows must be >= 0");
        if (!(rfi_margin_segments >= 0.0))
            fail(ErrorCategory::config, "rfi_margin_segments must be >= 0");
        if (!(rfi_window_hours > 0.0))
            fail(ErrorCategory::config, "rfi_window_hours must be > 0");
        if (ra_bins == 0)
            fail(ErrorCategory::config, "ra_bins must be >= 1");
        for (const auto& r : freq_ranges)
            if (!(r.min_mhz < r.max_mhz))
                fail(ErrorCategory::config, "frequency range min must be below max");
    }

    bool in_freq_ranges(double f_hz) const
    {
        return std::any_of(freq_ranges.begin(), freq_ranges.end(),
                           [&](const FreqRange& r) { return r.contains(f_hz); });
    }
};

/// Constituent order inside a pair.
enum Constituent : std::size_t { kEast0 = 0, kWest0 = 1, kEastDf = 2, kWestDf = 3 };

struct PulsePair {
    double mjd = 0.0;
    double f0_hz = 0.0;
    double df_hz = 0.0;
    std::array<double, 4> snr_db{};
    std::array<double, 4> phase_rad{};
    std::array<double, 4> seg_noise_db{};
    std::array<double, 2> band50_db{}; // East, West (lower pulse)
    std::array<std::uint32_t, 2> segment_index{}; // lower, upper
    double dphi_0 = 0.0;
    double dphi_df = 0.0;
    double ddf_dphi = 0.0;
    double llsnr_pair = 0.0;
    double lst_hr = 0.0;
    std::size_t ra_bin = 0;
};

// --- likelihood -------------------------------------------------------------

/// log10 P(S >= s | S >= T) for exponential bin power under AWGN.
inline double llsnr_constituent(double snr_db, double threshold_db = kDefaultDetectionThresholdDb)
{
    if (!(snr_db >= threshold_db))
        fail(ErrorCategory::precondition, "llsnr: constituent SNR " + std::to_string(snr_db) +
                                              " dB below threshold");
    const double s = std::pow(10.0, snr_db / 10.0);
    const double t = std::pow(10.0, threshold_db / 10.0);
    return -(s - t) / std::numbers::ln10;
}

/// Composite over the two elements of one pulse.
inline double llsnr_pulse(double snr_east_db, double snr_west_db,
                          double threshold_db = kDefaultDetectionThresholdDb)
{
    return llsnr_constituent(snr_east_db, threshold_db) +
           llsnr_constituent(snr_west_db, threshold_db);
}

/// Composite over all four constituents of a pair.
inline double llsnr_pair(const PulsePair& p, double threshold_db = kDefaultDetectionThresholdDb)
{
    return llsnr_pulse(p.snr_db[kEast0], p.snr_db[kWest0], threshold_db) +
           llsnr_pulse(p.snr_db[kEastDf], p.snr_db[kWestDf], threshold_db);
}

// --- matching ----------------------------------------------------------------

namespace detail {

struct BinSlot {
    const PulseEvent* east = nullptr;
    const PulseEvent* west = nullptr;
};

inline PulsePair make_pair(const BinSlot& lo, const BinSlot& hi)
{
    PulsePair p;
    p.mjd = lo.east->mjd;
    p.f0_hz = lo.east->rf_freq_hz;
    p.df_hz = hi.east->rf_freq_hz - lo.east->rf_freq_hz;
    const std::array<const PulseEvent*, 4> ev{lo.east, lo.west, hi.east, hi.west};
    for (std::size_t i = 0; i < 4; ++i) {
        p.snr_db[i] = ev[i]->snr_db;
        p.phase_rad[i] = ev[i]->phase_rad;
        p.seg_noise_db[i] = ev[i]->seg_noise_db;
    }
    p.band50_db = {lo.east->band50_db, lo.west->band50_db};
    p.segment_index = {lo.east->segment_index, hi.east->segment_index};
    return p;
}

/// Candidates within one epoch.
inline void match_epoch(std::span<const PulseEvent* const> epoch_events, const FilterSet& fs,
                        std::vector<PulsePair>& out)
{
    // (segment, bin) -> East/West detections; std::map keeps frequency order
    // because segment frequencies are compared below, not the key.
    std::map<std::pair<std::uint32_t, std::uint32_t>, BinSlot> slots;
    for (const auto* e : epoch_events) {
        auto& s = slots[{e->segment_index, e->bin_index}];
        (e->element == Element::East ? s.east : s.west) = e;
    }
    std::vector<BinSlot> dual;
    for (const auto& [key, s] : slots)
        if (s.east && s.west)
            dual.push_back(s);
    std::sort(dual.begin(), dual.end(), [](const BinSlot& a, const BinSlot& b) {
        return a.east->rf_freq_hz < b.east->rf_freq_hz;
    });
    for (std::size_t i = 0; i < dual.size(); ++i) {
        const double f0 = dual[i].east->rf_freq_hz;
        if (!fs.in_freq_ranges(f0))
            continue;
        for (std::size_t j = i + 1; j < dual.size(); ++j) {
            const double f1 = dual[j].east->rf_freq_hz;
            const double df = f1 - f0;
            if (df > fs.df_max_hz)
                break;
            if (df < fs.df_min_hz || !fs.in_freq_ranges(f1))
                continue;
            out.push_back(make_pair(dual[i], dual[j]));
        }
    }
}

} // namespace detail

/// Groups events by integration (identical mjd) and returns every four-pulse
/// candidate: East and West detections at f0 and at f0 + df, df inside
/// [df_min, df_max], both frequencies inside the configured ranges. Output is
/// ordered by (mjd, f0, df) regardless of input order.
inline std::vector<PulsePair> match_pairs(std::span<const PulseEvent> events, const FilterSet& fs)
{
    std::vector<const PulseEvent*> sorted;
    sorted.reserve(events.size());
    for (const auto& e : events)
        sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(),
              [](const PulseEvent* a, const PulseEvent* b) { return canonical_less(*a, *b); });
    std::vector<PulsePair> out;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j]->mjd == sorted[i]->mjd)
            ++j;
        detail::match_epoch(std::span<const PulseEvent* const>(sorted.data() + i, j - i), fs, out);
        i = j;
    }
    return out;
}

/// Fills dphi_0, dphi_df and the compensated ddf_dphi (East minus West).
inline void compute_pair_phases(PulsePair& p, const geometry::ObservatoryConfig& obs)
{
    p.dphi_0 = wrap_phase(p.phase_rad[kEast0] - p.phase_rad[kWest0]);
    p.dphi_df = wrap_phase(p.phase_rad[kEastDf] - p.phase_rad[kWestDf]);
    const double inst = kTwoPi * p.df_hz * obs.instrumental_delay_ns * 1e-9;
    p.ddf_dphi = wrap_phase(p.dphi_df - p.dphi_0 - inst);
}

/// Fills lst and RA bin from the pair's mjd.
inline void annotate_sky(PulsePair& p, const geometry::ObservatoryConfig& obs, std::size_t n_bins)
{
    p.lst_hr = geometry::mjd_to_lst(p.mjd, obs.longitude_east_deg);
    p.ra_bin = geometry::ra_bin(p.lst_hr, n_bins);
}

// --- RFI excision --------------------------------------------------------------

inline std::int64_t rfi_window_index(double mjd, double window_hours)
{
    return static_cast<std::int64_t>(std::floor(mjd * 24.0 / window_hours));
}

/// Segments flagged as populous, per RFI window.
class RfiFlags {
public:
    void flag(std::int64_t window, std::uint32_t segment, double center_hz)
    {
        flags_[{window, segment}] = center_hz;
    }

    bool flagged(std::int64_t window, std::uint32_t segment) const
    {
        return flags_.count({window, segment}) != 0;
    }

    std::size_t size() const noexcept { return flags_.size(); }

    /// True when `f_hz` lies within `margin_hz` of a flagged segment's span.
    bool near_flagged(std::int64_t window, double f_hz, double margin_hz) const
    {
        auto lo = flags_.lower_bound({window, 0});
        for (auto it = lo; it != flags_.end() && it->first.first == window; ++it) {
            const double edge_distance =
                std::max(0.0, std::abs(f_hz - it->second) - 0.5 * kSegmentBandwidthHz);
            if (edge_distance <= margin_hz)
                return true;
        }
        return false;
    }

    const std::map<std::pair<std::int64_t, std::uint32_t>, double>& entries() const noexcept
    {
        return flags_;
    }

private:
    std::map<std::pair<std::int64_t, std::uint32_t>, double> flags_;
};

/// Counts detections per (integration, segment, element). A segment whose
/// count exceeds the population limit in any integration is flagged for the
/// whole RFI window containing that integration.
class PopulationCounter {
public:
    explicit PopulationCounter(const FilterSet& fs) : fs_(&fs) {}

    /// `epoch_events` must all share one integration.
    void add_epoch(std::span<const PulseEvent> epoch_events, RfiFlags& flags) const
    {
        std::map<std::pair<std::uint32_t, Element>, std::pair<std::uint32_t, double>> counts;
        for (const auto& e : epoch_events) {
            auto& c = counts[{e.segment_index, e.element}];
            ++c.first;
            c.second = e.rf_freq_hz -
                       (static_cast<double>(e.bin_index) - static_cast<double>(kCenterBin)) *
                           kBinWidthHz;
        }
        if (epoch_events.empty())
            return;
        const auto w = rfi_window_index(epoch_events.front().mjd, fs_->rfi_window_hours);
        for (const auto& [key, c] : counts)
            if (c.first > fs_->rfi_population_limit)
                flags.flag(w, key.first, c.second);
    }

private:
    const FilterSet* fs_;
};

/// Flags populous segments over an event set (any order).
inline RfiFlags rfi_flags(std::span<const PulseEvent> events, const FilterSet& fs)
{
    std::vector<PulseEvent> sorted(events.begin(), events.end());
    std::sort(sorted.begin(), sorted.end(), canonical_less);
    RfiFlags flags;
    PopulationCounter counter(fs);
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].mjd == sorted[i].mjd)
            ++j;
        counter.add_epoch(std::span<const PulseEvent>(sorted.data() + i, j - i), flags);
        i = j;
    }
    return flags;
}

inline bool rfi_vetoed(const PulsePair& p, const RfiFlags& flags, const FilterSet& fs)
{
    const auto w = rfi_window_index(p.mjd, fs.rfi_window_hours);
    const double m = fs.rfi_margin_hz();
    return flags.near_flagged(w, p.f0_hz, m) || flags.near_flagged(w, p.f0_hz + p.df_hz, m);
}

struct RfiExcision {
    RfiFlags flags;
    std::vector<PulseEvent> clean_events; // events outside flagged (window, segment)s
};

/// Flags populous segments and drops events that fall in flagged segments.
inline RfiExcision rfi_excise(std::span<const PulseEvent> events, const FilterSet& fs)
{
    RfiExcision r{rfi_flags(events, fs), {}};
    for (const auto& e : events)
        if (!r.flags.flagged(rfi_window_index(e.mjd, fs.rfi_window_hours), e.segment_index))
            r.clean_events.push_back(e);
    return r;
}

// --- filters -------------------------------------------------------------------

enum class Verdict : std::uint8_t {
    accepted = 0,
    ddf_phase,
    pulse_phase,
    llsnr_pulse,
    llsnr_pair,
    rfi,
};

inline constexpr std::size_t kVerdictCount = 6;

inline std::string_view verdict_name(Verdict v)
{
    switch (v) {
    case Verdict::accepted: return "accepted";
    case Verdict::ddf_phase: return "ddf_phase";
    case Verdict::pulse_phase: return "pulse_phase";
    case Verdict::llsnr_pulse: return "llsnr_pulse";
    case Verdict::llsnr_pair: return "llsnr_pair";
    case Verdict::rfi: return "rfi";
    }
    return "?";
}

/// Default evaluation order; the first failing check names the rejection.
inline constexpr std::array<Verdict, 5> kDefaultFilterOrder{
    Verdict::ddf_phase, Verdict::pulse_phase, Verdict::llsnr_pulse, Verdict::llsnr_pair,
    Verdict::rfi};

/// Single filter check. Likelihood cuts keep pairs that are at least as
/// improbable under AWGN as the threshold (llsnr <= threshold).
inline bool passes(Verdict check, const PulsePair& p, const FilterSet& fs, const RfiFlags& flags)
{
    switch (check) {
    case Verdict::ddf_phase: return std::abs(p.ddf_dphi) <= fs.ddf_phase_window_rad;
    case Verdict::pulse_phase:
        return std::abs(p.dphi_0) <= fs.pulse_phase_window_rad &&
               std::abs(p.dphi_df) <= fs.pulse_phase_window_rad;
    case Verdict::llsnr_pulse: {
        const double t = fs.detection_threshold_db;
        return llsnr_pulse(p.snr_db[kEast0], p.snr_db[kWest0], t) <= fs.llsnr_pulse_threshold &&
               llsnr_pulse(p.snr_db[kEastDf], p.snr_db[kWestDf], t) <= fs.llsnr_pulse_threshold;
    }
    case Verdict::llsnr_pair: return p.llsnr_pair <= fs.llsnr_pair_threshold;
    case Verdict::rfi: return !rfi_vetoed(p, flags, fs);
    case Verdict::accepted: return true;
    }
    return false;
}

inline Verdict evaluate(const PulsePair& p, const FilterSet& fs, const RfiFlags& flags,
                        std::span<const Verdict> order = kDefaultFilterOrder)
{
    for (auto check : order)
        if (!passes(check, p, fs, flags))
            return check;
    return Verdict::accepted;
}

struct FilterResult {
    std::vector<PulsePair> accepted;
    std::array<std::size_t, kVerdictCount> counts{}; // indexed by Verdict
    std::size_t candidates = 0;

    void merge(const FilterResult& o)
    {
        accepted.insert(accepted.end(), o.accepted.begin(), o.accepted.end());
        for (std::size_t i = 0; i < kVerdictCount; ++i)
            counts[i] += o.counts[i];
        candidates += o.candidates;
    }
};

/// Keeps the pairs that pass every filter. `pairs` must have phases and
/// likelihoods filled in.
inline FilterResult apply_filters(std::span<const PulsePair> pairs, const FilterSet& fs,
                                  const RfiFlags& flags,
                                  std::span<const Verdict> order = kDefaultFilterOrder)
{
    FilterResult r;
    r.candidates = pairs.size();
    for (const auto& p : pairs) {
        const auto v = evaluate(p, fs, flags, order);
        ++r.counts[static_cast<std::size_t>(v)];
        if (v == Verdict::accepted)
            r.accepted.push_back(p);
    }
    return r;
}

/// Streaming second level. Feed integrations in time order; candidates are
/// held until their RFI window closes, then filtered against that window's
/// flags.
class SecondLevel {
public:
    SecondLevel(FilterSet fs, geometry::ObservatoryConfig obs,
                ionosphere::IonoParams worst_case = {})
        : fs_(std::move(fs)), obs_(obs)
    {
        fs_.validate();
        double f_min_mhz = 1e300;
        for (const auto& r : fs_.freq_ranges)
            f_min_mhz = std::min(f_min_mhz, r.min_mhz);
        if (!fs_.freq_ranges.empty())
            ionosphere::assert_faraday_margin(worst_case, fs_.df_max_hz, f_min_mhz * 1e-3,
                                              fs_.ddf_phase_window_rad);
    }

    const FilterSet& filters() const noexcept { return fs_; }

    /// Events of one integration, any order.
    void add_epoch(std::span<const PulseEvent> epoch_events)
    {
        if (epoch_events.empty())
            return;
        const auto w = rfi_window_index(epoch_events.front().mjd, fs_.rfi_window_hours);
        if (window_ && *window_ != w)
            flush();
        window_ = w;
        PopulationCounter(fs_).add_epoch(epoch_events, flags_);
        auto cands = match_pairs(epoch_events, fs_);
        for (auto& p : cands) {
            compute_pair_phases(p, obs_);
            annotate_sky(p, obs_, fs_.ra_bins);
            p.llsnr_pair = llsnr_pair(p, fs_.detection_threshold_db);
            pending_.push_back(p);
        }
    }

    /// Filters everything still pending.
    void finish() { flush(); }

    const FilterResult& result() const noexcept { return result_; }
    const RfiFlags& flags() const noexcept { return flags_; }

private:
    void flush()
    {
        result_.merge(apply_filters(pending_, fs_, flags_));
        pending_.clear();
    }

    FilterSet fs_;
    geometry::ObservatoryConfig obs_;
    RfiFlags flags_;
    std::vector<PulsePair> pending_;
    std::optional<std::int64_t> window_;
    FilterResult result_;
};

/// Batch second level over an event set in any order.
inline FilterResult run_second_level(std::span<const PulseEvent> events, const FilterSet& fs,
                                     const geometry::ObservatoryConfig& obs)
{
    std::vector<PulseEvent> sorted(events.begin(), events.end());
    std::stable_sort(sorted.begin(), sorted.end(), canonical_less);
    SecondLevel sl(fs, obs);
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].mjd == sorted[i].mjd)
            ++j;
        sl.add_epoch(std::span<const PulseEvent>(sorted.data() + i, j - i));
        i = j;
    }
    sl.finish();
    return sl.result();
}

} // namespace pairscope::secondlevel

#endif

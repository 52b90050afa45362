#ifndef PAIRSCOPE_STATISTICS_HPP
#define PAIRSCOPE_STATISTICS_HPP

// Analysis of accepted pairs: RA-binned counts and z-scores, likelihood
// threshold sweeps, celestial-track counting and the DOI search.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "phase.hpp"
#include "secondlevel.hpp"

namespace pairscope::statistics {

using secondlevel::PulsePair;

enum class SigmaModel {
    poisson, // sqrt(mu)
    sample,  // sample standard deviation of window bins
};

struct RaWindow {
    double lo_hr = 5.0;
    double hi_hr = 5.6;
};

struct RaBinHistogram {
    std::size_t n_bins = 3200;
    std::vector<std::size_t> counts;
    RaWindow window;
    std::vector<std::size_t> window_bins; // bins contributing to mu
    std::size_t window_total = 0;
    double mu = 0.0;
    double sigma = 0.0;
    std::vector<double> z; // empty when mu == 0

    bool has_z() const noexcept { return !z.empty(); }
};

/// Bins whose centres fall in [lo, hi), minus `excluded`.
inline std::vector<std::size_t> window_bins(std::size_t n_bins, const RaWindow& w,
                                            const std::set<std::size_t>& excluded = {})
{
    std::vector<std::size_t> out;
    for (std::size_t b = 0; b < n_bins; ++b) {
        const double c = geometry::ra_bin_center(b, n_bins);
        if (c >= w.lo_hr && c < w.hi_hr && !excluded.count(b))
            out.push_back(b);
    }
    return out;
}

/// Per-bin counts with z_b = (count_b - mu) / sigma, mu the mean count over
/// the reference window.
inline RaBinHistogram histogram(std::span<const PulsePair> pairs, std::size_t n_bins,
                                const RaWindow& window, SigmaModel model = SigmaModel::poisson,
                                const std::set<std::size_t>& excluded = {})
{
    RaBinHistogram h;
    h.n_bins = n_bins;
    h.window = window;
    h.counts.assign(n_bins, 0);
    for (const auto& p : pairs) {
        if (p.ra_bin >= n_bins)
            fail(ErrorCategory::range, "pair ra_bin outside histogram");
        ++h.counts[p.ra_bin];
    }
    h.window_bins = window_bins(n_bins, window, excluded);
    if (h.window_bins.empty())
        fail(ErrorCategory::degenerate, "histogram: reference window contains no bins");
    for (auto b : h.window_bins)
        h.window_total += h.counts[b];
    h.mu = static_cast<double>(h.window_total) / static_cast<double>(h.window_bins.size());
    if (model == SigmaModel::poisson) {
        h.sigma = std::sqrt(h.mu);
    } else {
        double ss = 0.0;
        for (auto b : h.window_bins) {
            const double d = static_cast<double>(h.counts[b]) - h.mu;
            ss += d * d;
        }
        const auto n = static_cast<double>(h.window_bins.size());
        h.sigma = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    if (h.mu > 0.0 && h.sigma > 0.0) {
        h.z.resize(n_bins);
        for (std::size_t b = 0; b < n_bins; ++b)
            h.z[b] = (static_cast<double>(h.counts[b]) - h.mu) / h.sigma;
    }
    return h;
}

struct SweepEntry {
    double threshold = 0.0;
    std::vector<PulsePair> pairs;
    RaBinHistogram histogram;
};

/// Re-applies the pair likelihood cut at each threshold (sorted descending,
/// i.e. loosest first) and rebuilds the histogram. Pairs are kept when
/// llsnr_pair <= threshold.
inline std::vector<SweepEntry> llsnr_sweep(std::span<const PulsePair> pairs,
                                           std::span<const double> thresholds, std::size_t n_bins,
                                           const RaWindow& window,
                                           SigmaModel model = SigmaModel::poisson)
{
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i] > thresholds[i - 1])
            fail(ErrorCategory::precondition, "llsnr_sweep: thresholds must be sorted descending");
    std::vector<SweepEntry> out;
    for (double t : thresholds) {
        SweepEntry e;
        e.threshold = t;
        for (const auto& p : pairs)
            if (p.llsnr_pair <= t)
                e.pairs.push_back(p);
        e.histogram = histogram(e.pairs, n_bins, window, model);
        out.push_back(std::move(e));
    }
    return out;
}

struct TrackOptions {
    double phase_tol_rad = 0.18;
    double beam_halfwidth_fwhm = 0.25; // LST window around the candidate, in element FWHMs;
                                       // below one fringe period so aliases fall outside
};

/// True when the pair's LST puts a source at `src_ra` (pointing declination)
/// inside the beam window.
inline bool in_track_window(const PulsePair& p, double src_ra, const geometry::ObservatoryConfig& obs,
                            const TrackOptions& opt)
{
    const geometry::SkyDirection src(src_ra, obs.pointing_dec_deg);
    return geometry::beam_offset_deg(src, p.lst_hr, obs) <=
           opt.beam_halfwidth_fwhm * obs.element_fwhm_deg;
}

/// Predicted dphi_0 at the pair's LST for a source at `src_ra`.
inline double track_phase(const PulsePair& p, double src_ra, const geometry::ObservatoryConfig& obs)
{
    const geometry::SkyDirection src(src_ra, obs.pointing_dec_deg);
    return geometry::expected_ew_phase(src, p.lst_hr, obs, p.f0_hz * 1e-6);
}

/// Pairs within the beam window whose dphi_0 sits within phase_tol of the
/// predicted fringe track, compared on the circle.
inline std::size_t celestial_track_count(std::span<const PulsePair> pairs, double src_ra,
                                         const geometry::ObservatoryConfig& obs,
                                         const TrackOptions& opt = {})
{
    if (!(opt.phase_tol_rad > 0.0))
        fail(ErrorCategory::precondition, "celestial_track_count: phase_tol must be > 0");
    std::size_t n = 0;
    for (const auto& p : pairs) {
        if (!in_track_window(p, src_ra, obs, opt))
            continue;
        if (std::abs(wrap_phase(p.dphi_0 - track_phase(p, src_ra, obs))) <= opt.phase_tol_rad)
            ++n;
    }
    return n;
}

struct DoiResult {
    double best_ra_hr = 0.0;
    std::size_t best_score = 0;
    std::vector<std::pair<double, std::size_t>> profile; // (ra, score)
};

/// Scans candidate RAs lo, lo+step, ... <= hi. Ties go to the lowest RA.
inline DoiResult doi_search(std::span<const PulsePair> pairs, double ra_lo, double ra_hi,
                            double step, const geometry::ObservatoryConfig& obs,
                            std::size_t n_bins = 3200, const TrackOptions& opt = {})
{
    if (!(ra_hi >= ra_lo))
        fail(ErrorCategory::domain, "doi_search: empty RA range");
    if (!(step > 0.0))
        fail(ErrorCategory::domain, "doi_search: step must be > 0");
    if (step > geometry::ra_bin_width(n_bins))
        fail(ErrorCategory::precondition, "doi_search: step exceeds the RA bin width");
    DoiResult r;
    const auto n_steps = static_cast<std::size_t>(std::floor((ra_hi - ra_lo) / step + 1e-9));
    for (std::size_t i = 0; i <= n_steps; ++i) {
        const double ra = ra_lo + static_cast<double>(i) * step;
        const auto score = celestial_track_count(pairs, ra, obs, opt);
        r.profile.emplace_back(ra, score);
        if (i == 0 || score > r.best_score) {
            r.best_score = score;
            r.best_ra_hr = ra;
        }
    }
    return r;
}

} // namespace pairscope::statistics

#endif

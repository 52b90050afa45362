#ifndef PAIRSCOPE_REPORT_HPP
#define PAIRSCOPE_REPORT_HPP

// Delimited-text tables for plotting, one file per view, plus a summary.
//
//   phase_vs_ra     per pair: RA relative to the DOI, dphi_0, predicted track
//   sigma_vs_ra     per LLSNR threshold and RA bin: count and z
//   noise954_vs_ra  per pair: 954 Hz segment noise, East and West
//   band50_vs_ra    per pair: 50 MHz band power, East and West
//   mjd_freq_vs_ra  per pair: MJD and f0
//   df_vs_ra        per pair: df and DOI-bin membership
//   doi_profile     per candidate RA: track score
//   summary         key = value

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "error.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "phase.hpp"
#include "secondlevel.hpp"
#include "statistics.hpp"

namespace pairscope::report {

using secondlevel::PulsePair;

struct ReportOptions {
    double doi_ra_hr = 5.25375;
    double doi_lo_hr = 5.10375; // first candidate on a bin centre
    double doi_hi_hr = 5.4;
    double doi_step_hr = 0.0075;
    std::vector<double> sweep_thresholds{0.0, -1.0, -2.0, -2.7, -3.5, -5.0};
    double main_threshold = -2.7;
    std::size_t n_bins = 3200;
    statistics::RaWindow window;
    statistics::SigmaModel sigma = statistics::SigmaModel::poisson;
    statistics::TrackOptions track;
    double null_confidence = 0.99;
};

/// Wrapped predicted dphi_0 for a source at `ra`, without a beam check.
inline double predicted_phase(double ra_hr, double lst_hr, double f0_hz,
                              const geometry::ObservatoryConfig& obs)
{
    const geometry::SkyDirection src(ra_hr, obs.pointing_dec_deg);
    return wrap_phase(geometry::geometric_phase(src, lst_hr, obs, f0_hz * 1e-6) +
                      geometry::instrumental_phase(f0_hz * 1e-6, obs));
}

/// Upper `confidence` quantile of the largest of `candidates` independent
/// background track scores, each Binomial(n, tol / pi).
inline std::size_t null_track_threshold(std::size_t n_in_window, double phase_tol_rad,
                                        std::size_t candidates, double confidence)
{
    if (n_in_window == 0)
        return 0;
    const double p = std::min(1.0, phase_tol_rad / kPi);
    if (p >= 1.0)
        return n_in_window;
    const double per = std::pow(confidence, 1.0 / static_cast<double>(std::max<std::size_t>(candidates, 1)));
    const boost::math::binomial_distribution<double> d(static_cast<double>(n_in_window), p);
    for (std::size_t k = 0; k <= n_in_window; ++k)
        if (boost::math::cdf(d, static_cast<double>(k)) >= per)
            return k;
    return n_in_window;
}

struct Summary {
    std::size_t pairs = 0;
    statistics::DoiResult doi;
    std::size_t doi_window_pairs = 0;
    std::size_t null_threshold = 0;
    bool doi_detected = false;
    std::size_t doi_bin = 0;
    std::size_t doi_bin_count = 0;
    double mu = 0.0;
    double doi_bin_z = 0.0;
    bool has_z = false;
    std::size_t diagonal_count = 0; // at the configured DOI RA
};

class TableFile {
public:
    TableFile(const std::filesystem::path& path, const io::Provenance& prov, const std::string& header)
        : path_(path), out_(path, std::ios::binary)
    {
        if (!out_)
            fail(ErrorCategory::io, "cannot write '" + path.string() + "'");
        out_ << prov.line() << '\n' << header << '\n';
    }

    void row(const std::string& r) { out_ << r << '\n'; }

    void close()
    {
        out_.close();
        if (!out_)
            fail(ErrorCategory::io, "write failed for '" + path_.string() + "'");
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

inline std::string join(std::initializer_list<std::string> cols)
{
    std::string s;
    for (const auto& c : cols) {
        if (!s.empty())
            s += ',';
        s += c;
    }
    return s;
}

inline std::string fmt_or_nan(bool ok, double v, int precision)
{
    return ok ? io::fixed(v, precision) : std::string("nan");
}

inline Summary summarize(std::span<const PulsePair> pairs, const geometry::ObservatoryConfig& obs,
                         const ReportOptions& opt)
{
    Summary s;
    s.pairs = pairs.size();
    s.doi = statistics::doi_search(pairs, opt.doi_lo_hr, opt.doi_hi_hr, opt.doi_step_hr, obs,
                                   opt.n_bins, opt.track);
    for (const auto& p : pairs)
        if (statistics::in_track_window(p, s.doi.best_ra_hr, obs, opt.track))
            ++s.doi_window_pairs;
    s.null_threshold = null_track_threshold(s.doi_window_pairs, opt.track.phase_tol_rad,
                                            s.doi.profile.size(), opt.null_confidence);
    s.doi_detected = s.doi.best_score > s.null_threshold;
    std::vector<PulsePair> kept;
    for (const auto& p : pairs)
        if (p.llsnr_pair <= opt.main_threshold)
            kept.push_back(p);
    const auto h = statistics::histogram(kept, opt.n_bins, opt.window, opt.sigma);
    s.doi_bin = geometry::ra_bin(opt.doi_ra_hr, opt.n_bins);
    s.doi_bin_count = h.counts[s.doi_bin];
    s.mu = h.mu;
    s.has_z = h.has_z();
    s.doi_bin_z = s.has_z ? h.z[s.doi_bin] : 0.0;
    s.diagonal_count = statistics::celestial_track_count(pairs, opt.doi_ra_hr, obs, opt.track);
    return s;
}

/// Writes every table into `out_dir` (created if missing) and returns the
/// summary.
inline Summary export_report(std::span<const PulsePair> pairs, const geometry::ObservatoryConfig& obs,
                             const ReportOptions& opt, const std::filesystem::path& out_dir,
                             const io::Provenance& prov)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        fail(ErrorCategory::io, "cannot create output directory '" + out_dir.string() + "'");

    const double track_tol = opt.track.phase_tol_rad;

    // phase_vs_ra, sorted by |ddf_dphi| ascending
    {
        std::vector<const PulsePair*> order;
        for (const auto& p : pairs)
            order.push_back(&p);
        std::stable_sort(order.begin(), order.end(), [](const PulsePair* a, const PulsePair* b) {
            return std::abs(a->ddf_dphi) < std::abs(b->ddf_dphi);
        });
        TableFile t(out_dir / "phase_vs_ra.csv", prov,
                    "mjd,lst_hr,ra_bin,ra_rel_doi_hr,f0_hz,dphi0_rad,ddfdphi_rad,predicted_rad,on_track");
        for (const auto* p : order) {
            const double pred = predicted_phase(opt.doi_ra_hr, p->lst_hr, p->f0_hz, obs);
            const bool on = statistics::in_track_window(*p, opt.doi_ra_hr, obs, opt.track) &&
                            std::abs(wrap_phase(p->dphi_0 - pred)) <= track_tol;
            t.row(join({io::fixed(p->mjd, 9), io::fixed(p->lst_hr, 9), std::to_string(p->ra_bin),
                        io::fixed(hour_difference(p->lst_hr, opt.doi_ra_hr), 9),
                        io::fixed(p->f0_hz, 6), io::fixed(p->dphi_0, 9), io::fixed(p->ddf_dphi, 9),
                        io::fixed(pred, 9), on ? "1" : "0"}));
        }
        t.close();
    }

    // sigma_vs_ra
    {
        std::vector<double> th = opt.sweep_thresholds;
        std::sort(th.begin(), th.end(), std::greater<>());
        const auto sweep = statistics::llsnr_sweep(pairs, th, opt.n_bins, opt.window, opt.sigma);
        TableFile t(out_dir / "sigma_vs_ra.csv", prov,
                    "llsnr_threshold,ra_bin,ra_center_hr,count,mu,z");
        for (const auto& e : sweep)
            for (std::size_t b = 0; b < opt.n_bins; ++b)
                t.row(join({io::fixed(e.threshold, 2), std::to_string(b),
                            io::fixed(geometry::ra_bin_center(b, opt.n_bins), 6),
                            std::to_string(e.histogram.counts[b]), io::fixed(e.histogram.mu, 6),
                            fmt_or_nan(e.histogram.has_z(), e.histogram.has_z() ? e.histogram.z[b] : 0.0, 6)}));
        t.close();
    }

    {
        TableFile n(out_dir / "noise954_vs_ra.csv", prov, "mjd,lst_hr,ra_bin,segnoise_e_db,segnoise_w_db");
        TableFile b(out_dir / "band50_vs_ra.csv", prov, "mjd,lst_hr,ra_bin,band50_e_db,band50_w_db");
        TableFile m(out_dir / "mjd_freq_vs_ra.csv", prov, "lst_hr,ra_bin,mjd,f0_mhz,f1_mhz");
        TableFile d(out_dir / "df_vs_ra.csv", prov, "lst_hr,ra_bin,df_khz,doi_bin");
        const auto doi_bin = geometry::ra_bin(opt.doi_ra_hr, opt.n_bins);
        for (const auto& p : pairs) {
            const auto lst = io::fixed(p.lst_hr, 9);
            const auto bin = std::to_string(p.ra_bin);
            n.row(join({io::fixed(p.mjd, 9), lst, bin,
                        io::fixed(p.seg_noise_db[secondlevel::kEast0], 6),
                        io::fixed(p.seg_noise_db[secondlevel::kWest0], 6)}));
            b.row(join({io::fixed(p.mjd, 9), lst, bin, io::fixed(p.band50_db[0], 6),
                        io::fixed(p.band50_db[1], 6)}));
            m.row(join({lst, bin, io::fixed(p.mjd, 9), io::fixed(p.f0_hz * 1e-6, 6),
                        io::fixed((p.f0_hz + p.df_hz) * 1e-6, 6)}));
            d.row(join({lst, bin, io::fixed(p.df_hz * 1e-3, 3), p.ra_bin == doi_bin ? "1" : "0"}));
        }
        n.close();
        b.close();
        m.close();
        d.close();
    }

    if (pairs.empty()) {
        TableFile t(out_dir / "doi_profile.csv", prov, "ra_hr,score");
        t.close();
        TableFile s(out_dir / "summary.txt", prov, "pairs = 0");
        s.row("doi_detected = no");
        s.close();
        Summary empty;
        return empty;
    }

    const auto sum = summarize(pairs, obs, opt);
    {
        TableFile t(out_dir / "doi_profile.csv", prov, "ra_hr,score");
        for (const auto& [ra, score] : sum.doi.profile)
            t.row(io::fixed(ra, 6) + ',' + std::to_string(score));
        t.close();
    }
    {
        TableFile s(out_dir / "summary.txt", prov, "pairs = " + std::to_string(sum.pairs));
        s.row("doi_best_ra_hr = " + io::fixed(sum.doi.best_ra_hr, 6));
        s.row("doi_best_score = " + std::to_string(sum.doi.best_score));
        s.row("doi_window_pairs = " + std::to_string(sum.doi_window_pairs));
        s.row("null_score_threshold = " + std::to_string(sum.null_threshold));
        s.row(std::string("doi_detected = ") + (sum.doi_detected ? "yes" : "no"));
        s.row("doi_ra_hr = " + io::fixed(opt.doi_ra_hr, 6));
        s.row("doi_bin = " + std::to_string(sum.doi_bin));
        s.row("doi_bin_count = " + std::to_string(sum.doi_bin_count));
        s.row("window_mu = " + io::fixed(sum.mu, 6));
        s.row("doi_bin_z = " + fmt_or_nan(sum.has_z, sum.doi_bin_z, 6));
        s.row("diagonal_count = " + std::to_string(sum.diagonal_count));
        s.close();
    }
    return sum;
}

} // namespace pairscope::report

#endif

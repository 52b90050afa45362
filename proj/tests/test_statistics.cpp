#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <boost/math/distributions/poisson.hpp>
#include <gtest/gtest.h>

#include <pairscope/io.hpp>
#include <pairscope/report.hpp>
#include <pairscope/rng.hpp>
#include <pairscope/statistics.hpp>

#include "support.hpp"

using namespace pairscope;
using namespace pairscope::statistics;
using oracle::error_of;

namespace {

const geometry::ObservatoryConfig kObs{};

PulsePair at_bin(std::size_t bin, double llsnr = -5.0)
{
    PulsePair p;
    p.ra_bin = bin;
    p.lst_hr = geometry::ra_bin_center(bin, 3200);
    p.llsnr_pair = llsnr;
    return p;
}

// A pair at `lst` whose dphi_0 sits `offset` from the track of `src_ra`.
PulsePair on_track(double src_ra, double lst, double offset = 0.0, double f0_hz = 1420.0e6)
{
    PulsePair p;
    p.f0_hz = f0_hz;
    p.df_hz = 420e3;
    p.lst_hr = wrap_hours(lst);
    p.ra_bin = geometry::ra_bin(p.lst_hr, 3200);
    p.llsnr_pair = -5.0;
    const geometry::SkyDirection src(src_ra, kObs.pointing_dec_deg);
    p.dphi_0 = wrap_phase(geometry::expected_ew_phase(src, p.lst_hr, kObs, f0_hz * 1e-6) + offset);
    return p;
}

PulsePair random_pair(Rng& rng, double lo = 5.0, double hi = 5.6)
{
    PulsePair p;
    p.f0_hz = 1400.0e6 + rng.uniform() * 20e6;
    p.df_hz = 420e3;
    p.lst_hr = lo + rng.uniform() * (hi - lo);
    p.ra_bin = geometry::ra_bin(p.lst_hr, 3200);
    p.dphi_0 = rng.phase();
    p.llsnr_pair = -3.0 - rng.exponential();
    return p;
}

} // namespace

TEST(Histogram, WindowHasEightyBins)
{
    EXPECT_EQ(window_bins(3200, RaWindow{}).size(), 80u);
    EXPECT_EQ(window_bins(3200, RaWindow{}).front(), 667u);
    EXPECT_EQ(geometry::ra_bin(5.25375, 3200), 700u);
}

TEST(Histogram, UniformWindowMean)
{
    std::vector<PulsePair> pairs;
    const auto bins = window_bins(3200, RaWindow{});
    for (int i = 0; i < 282; ++i)
        pairs.push_back(at_bin(bins[i % bins.size()]));
    const auto h = histogram(pairs, 3200, RaWindow{});
    EXPECT_DOUBLE_EQ(h.mu, 282.0 / 80.0);
    EXPECT_NEAR(h.mu, 3.5, 0.03);
    EXPECT_EQ(h.window_total, 282u);
}

TEST(Histogram, ZScoreOfThirteen)
{
    std::vector<PulsePair> pairs;
    const auto bins = window_bins(3200, RaWindow{});
    // one bin at 13, the other 79 sharing 275 so mu = 3.6
    for (int i = 0; i < 13; ++i)
        pairs.push_back(at_bin(bins[0]));
    for (std::size_t b = 1; b < bins.size(); ++b)
        for (int i = 0; i < (b <= 38 ? 4 : 3); ++i)
            pairs.push_back(at_bin(bins[b]));
    const auto h = histogram(pairs, 3200, RaWindow{});
    EXPECT_NEAR(h.mu, 3.6, 1e-12);
    EXPECT_NEAR(h.z[bins[0]], (13 - 3.6) / std::sqrt(3.6), 1e-12);
    EXPECT_NEAR(h.z[bins[0]], 4.95, 0.01);
}

TEST(Histogram, FlatCountsZeroZ)
{
    std::vector<PulsePair> pairs;
    for (std::size_t b = 0; b < 3200; ++b)
        for (int i = 0; i < 3; ++i)
            pairs.push_back(at_bin(b));
    const auto h = histogram(pairs, 3200, RaWindow{});
    for (double z : h.z)
        EXPECT_EQ(z, 0.0);
    const auto hs = histogram(pairs, 3200, RaWindow{}, SigmaModel::sample);
    EXPECT_FALSE(hs.has_z()); // zero sample spread
}

TEST(Histogram, TotalsAndEmptyWindow)
{
    Rng rng(1);
    std::vector<PulsePair> pairs;
    for (int i = 0; i < 1000; ++i)
        pairs.push_back(random_pair(rng, 0.0, 24.0));
    const auto h = histogram(pairs, 3200, RaWindow{});
    std::size_t total = 0, win = 0;
    for (auto c : h.counts)
        total += c;
    for (auto b : h.window_bins)
        win += h.counts[b];
    EXPECT_EQ(total, pairs.size());
    EXPECT_EQ(win, h.window_total);
    EXPECT_EQ(error_of([&] { histogram(pairs, 3200, RaWindow{5.0, 5.0}); }), ErrorCategory::degenerate);
    const auto none = histogram(std::vector<PulsePair>{}, 3200, RaWindow{});
    EXPECT_FALSE(none.has_z());
}

TEST(Histogram, LocalityOutsideWindow)
{
    Rng rng(2);
    std::vector<PulsePair> pairs;
    for (int i = 0; i < 2000; ++i)
        pairs.push_back(random_pair(rng, 0.0, 24.0));
    const auto a = histogram(pairs, 3200, RaWindow{});
    // relabel every bin outside the window by a fixed permutation
    for (auto& p : pairs)
        if (p.ra_bin < 667 || p.ra_bin >= 747)
            p.ra_bin = p.ra_bin < 667 ? 666 - p.ra_bin : 3199 - (p.ra_bin - 747);
    const auto b = histogram(pairs, 3200, RaWindow{});
    for (std::size_t bin = 667; bin < 747; ++bin)
        EXPECT_EQ(a.z[bin], b.z[bin]);
    EXPECT_EQ(a.mu, b.mu);
}

TEST(Histogram, SampleSigmaModel)
{
    std::vector<PulsePair> pairs;
    const auto bins = window_bins(3200, RaWindow{});
    std::vector<double> counts;
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const int c = static_cast<int>(i % 5);
        counts.push_back(c);
        for (int k = 0; k < c; ++k)
            pairs.push_back(at_bin(bins[i]));
    }
    double m = 0.0, ss = 0.0;
    for (double c : counts)
        m += c / counts.size();
    for (double c : counts)
        ss += (c - m) * (c - m);
    const auto h = histogram(pairs, 3200, RaWindow{}, SigmaModel::sample);
    EXPECT_NEAR(h.sigma, std::sqrt(ss / (counts.size() - 1)), 1e-12);
    EXPECT_NEAR(h.z[bins[4]], (4 - m) / h.sigma, 1e-12);
}

TEST(Histogram, ExcludedBins)
{
    std::vector<PulsePair> pairs;
    for (int i = 0; i < 10; ++i)
        pairs.push_back(at_bin(700));
    pairs.push_back(at_bin(701));
    const auto h = histogram(pairs, 3200, RaWindow{}, SigmaModel::poisson, {700});
    EXPECT_EQ(h.window_bins.size(), 79u);
    EXPECT_NEAR(h.mu, 1.0 / 79.0, 1e-15);
}

TEST(Sweep, OpenThresholdMatchesHistogram)
{
    Rng rng(3);
    std::vector<PulsePair> pairs;
    for (int i = 0; i < 500; ++i)
        pairs.push_back(random_pair(rng));
    const std::vector<double> th{std::numeric_limits<double>::infinity(), 0.0, -3.5, -4.0, -5.0, -1000.0};
    const auto s = llsnr_sweep(pairs, th, 3200, RaWindow{});
    const auto h = histogram(pairs, 3200, RaWindow{});
    EXPECT_EQ(s[0].histogram.counts, h.counts);
    EXPECT_EQ(s[1].histogram.counts, h.counts); // every llsnr is <= 0
    EXPECT_TRUE(s.back().pairs.empty());
    for (std::size_t i = 1; i < s.size(); ++i)
        for (std::size_t b = 0; b < 3200; ++b)
            ASSERT_LE(s[i].histogram.counts[b], s[i - 1].histogram.counts[b]);
    const std::vector<double> unsorted{-3.0, -1.0};
    EXPECT_EQ(error_of([&] { llsnr_sweep(pairs, unsorted, 3200, RaWindow{}); }), ErrorCategory::precondition);
}

TEST(Track, OnDiagonalCountedAtAnyTolerance)
{
    const std::vector<PulsePair> p{on_track(5.25375, 5.26)};
    for (double tol : {1e-9, 0.01, 0.18, 3.0})
        EXPECT_EQ(celestial_track_count(p, 5.25375, kObs, TrackOptions{tol, 0.25}), 1u);
}

TEST(Track, OffsetByPiNotCounted)
{
    const std::vector<PulsePair> p{on_track(5.25375, 5.26, oracle::pi)};
    EXPECT_EQ(celestial_track_count(p, 5.25375, kObs, TrackOptions{3.1, 0.25}), 0u);
    EXPECT_EQ(celestial_track_count(p, 5.25375, kObs, TrackOptions{oracle::pi, 0.25}), 1u);
}

TEST(Track, WrapBoundary)
{
    // predicted phase close to +pi, measured just across at -pi
    Rng rng(4);
    int checked = 0;
    for (double lst = 5.18; lst < 5.33 && checked < 3; lst += 1e-4) {
        const auto p = on_track(5.25375, lst);
        if (std::abs(p.dphi_0) > 3.1) {
            const std::vector<PulsePair> v{on_track(5.25375, lst, p.dphi_0 > 0 ? 0.1 : -0.1)};
            EXPECT_GT(std::abs(v[0].dphi_0), 3.0);
            EXPECT_EQ(celestial_track_count(v, 5.25375, kObs, TrackOptions{0.15, 0.25}), 1u);
            ++checked;
        }
    }
    EXPECT_EQ(checked, 3);
}

TEST(Track, BeamWindowRestriction)
{
    const std::vector<PulsePair> p{on_track(5.25375, 5.25375 + 0.2)};
    EXPECT_EQ(celestial_track_count(p, 5.25375, kObs, TrackOptions{0.18, 0.25}), 0u);
    EXPECT_EQ(celestial_track_count(p, 5.25375, kObs, TrackOptions{0.18, 1.0}), 1u);
    EXPECT_EQ(error_of([&] { celestial_track_count(p, 5.25375, kObs, TrackOptions{0.0, 0.25}); }),
              ErrorCategory::precondition);
}

TEST(Track, InjectedPlusBackground)
{
    Rng rng(5);
    const TrackOptions opt;
    const double half = opt.beam_halfwidth_fwhm * kObs.element_fwhm_deg / 15.0 /
                        std::cos(kObs.pointing_dec_deg * oracle::pi / 180.0);
    std::vector<PulsePair> pairs;
    for (int i = 0; i < 13; ++i)
        pairs.push_back(on_track(5.25375, 5.25375 + (rng.uniform() - 0.5) * 1.8 * half, 0.05 * rng.normal()));
    std::size_t background_in_window = 0;
    for (int i = 0; i < 3000; ++i) {
        auto p = random_pair(rng);
        background_in_window += in_track_window(p, 5.25375, kObs, opt);
        pairs.push_back(p);
    }
    const auto n = celestial_track_count(pairs, 5.25375, kObs, opt);
    EXPECT_GE(n, 13u);
    const double lam = background_in_window * opt.phase_tol_rad / oracle::pi;
    EXPECT_LT(std::abs(static_cast<double>(n) - 13.0 - lam), 4.0 * std::sqrt(lam) + 1.0);
}

TEST(Doi, SinglePairScoresOne)
{
    const std::vector<PulsePair> p{on_track(5.25375, 5.25)};
    const auto r = doi_search(p, 5.10375, 5.4, 0.0075, kObs);
    EXPECT_EQ(r.best_score, 1u);
    EXPECT_NEAR(r.best_ra_hr, 5.25375, 1e-9);
    EXPECT_EQ(r.profile.size(), 40u);
}

TEST(Doi, RecoversSourceFromNoisyPairs)
{
    Rng rng(6);
    std::vector<PulsePair> pairs;
    for (int i = 0; i < 40; ++i)
        pairs.push_back(on_track(5.25375, 5.25375 + (rng.uniform() - 0.5) * 0.1, 0.1 * rng.normal(),
                                 1400e6 + rng.uniform() * 20e6));
    for (int i = 0; i < 2000; ++i)
        pairs.push_back(random_pair(rng));
    const auto r = doi_search(pairs, 5.10375, 5.4, 0.0075, kObs);
    EXPECT_LE(std::abs(r.best_ra_hr - 5.25375), 0.0075);
}

TEST(Doi, TiesGoToLowestRa)
{
    const auto r = doi_search(std::vector<PulsePair>{}, 5.1, 5.2, 0.0075, kObs);
    EXPECT_EQ(r.best_score, 0u);
    EXPECT_DOUBLE_EQ(r.best_ra_hr, 5.1);
}

TEST(Doi, PermutationInvariantProfile)
{
    Rng rng(7);
    std::vector<PulsePair> pairs;
    for (int i = 0; i < 500; ++i)
        pairs.push_back(random_pair(rng));
    const auto a = doi_search(pairs, 5.10375, 5.4, 0.0075, kObs);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto b = doi_search(pairs, 5.10375, 5.4, 0.0075, kObs);
    EXPECT_EQ(a.profile, b.profile);
    EXPECT_EQ(a.best_ra_hr, b.best_ra_hr);
}

TEST(Doi, Errors)
{
    const std::vector<PulsePair> none;
    EXPECT_EQ(error_of([&] { doi_search(none, 5.4, 5.1, 0.0075, kObs); }), ErrorCategory::domain);
    EXPECT_EQ(error_of([&] { doi_search(none, 5.1, 5.4, 0.01, kObs); }), ErrorCategory::precondition);
    EXPECT_EQ(error_of([&] { doi_search(none, 5.1, 5.4, 0.0, kObs); }), ErrorCategory::domain);
}

// Background-only runs: the best score exceeds the null threshold in at most
// about 1% of runs.
TEST(Doi, NullMonteCarlo)
{
    Rng rng(8);
    const int runs = 300;
    int exceed = 0;
    report::ReportOptions opt;
    for (int r = 0; r < runs; ++r) {
        std::vector<PulsePair> pairs;
        for (int i = 0; i < 400; ++i)
            pairs.push_back(random_pair(rng));
        const auto s = report::summarize(pairs, kObs, opt);
        exceed += s.doi_detected;
    }
    EXPECT_LE(exceed, 9) << exceed << " of " << runs;
}

TEST(Null, ThresholdIsBinomialQuantile)
{
    // single candidate: plain 99th percentile of Binomial(100, 0.18/pi)
    const double p = 0.18 / oracle::pi;
    double cdf = 0.0;
    std::size_t k = 0;
    for (;; ++k) {
        cdf += std::exp(std::lgamma(101.0) - std::lgamma(k + 1.0) - std::lgamma(101.0 - k) + k * std::log(p) +
                        (100 - k) * std::log1p(-p));
        if (cdf >= 0.99)
            break;
    }
    EXPECT_EQ(report::null_track_threshold(100, 0.18, 1, 0.99), k);
    EXPECT_GE(report::null_track_threshold(100, 0.18, 40, 0.99), k);
    EXPECT_EQ(report::null_track_threshold(0, 0.18, 40, 0.99), 0u);
}

// Fraction of background runs with any window bin at |z| >= 4 against the
// Poisson tail.
TEST(Null, ZScoreCalibration)
{
    Rng rng(9);
    const int runs = 400;
    const int n_pairs = 282;
    int any = 0;
    for (int r = 0; r < runs; ++r) {
        std::vector<PulsePair> pairs;
        for (int i = 0; i < n_pairs; ++i)
            pairs.push_back(random_pair(rng));
        const auto h = histogram(pairs, 3200, RaWindow{});
        bool hit = false;
        for (auto b : h.window_bins)
            hit = hit || std::abs(h.z[b]) >= 4.0;
        any += hit;
    }
    const double lam = n_pairs / 80.0;
    const boost::math::poisson_distribution<double> pd(lam);
    const double k = std::ceil(lam + 4.0 * std::sqrt(lam));
    const double tail = boost::math::cdf(boost::math::complement(pd, k - 1.0));
    const double expected = 1.0 - std::pow(1.0 - tail, 80.0);
    const double observed = static_cast<double>(any) / runs;
    EXPECT_GT(observed, expected / 3.0) << observed << " vs " << expected;
    EXPECT_LT(observed, expected * 3.0) << observed << " vs " << expected;
}

TEST(Report, EmptyPairSetHeadersOnly)
{
    const auto dir = oracle::scratch_dir("report_empty");
    io::Provenance prov{"abc123", 7, "df_hz=300000-540000"};
    report::export_report(std::vector<PulsePair>{}, kObs, report::ReportOptions{}, dir, prov);
    for (const char* f : {"phase_vs_ra.csv", "noise954_vs_ra.csv", "band50_vs_ra.csv", "mjd_freq_vs_ra.csv",
                          "df_vs_ra.csv", "doi_profile.csv"}) {
        std::ifstream in(dir / f);
        std::string l1, l2, l3;
        ASSERT_TRUE(std::getline(in, l1)) << f;
        EXPECT_EQ(l1, prov.line());
        ASSERT_TRUE(std::getline(in, l2)) << f;
        EXPECT_FALSE(std::getline(in, l3)) << f;
    }
    // sigma table has one row per bin per threshold even when empty
    const auto s = oracle::slurp(dir / "summary.txt");
    EXPECT_NE(s.find("pairs = 0"), std::string::npos);
    EXPECT_NE(s.find("doi_detected = no"), std::string::npos);
}

TEST(Report, PhaseTableFollowsTrack)
{
    Rng rng(10);
    std::vector<PulsePair> pairs;
    for (int i = 0; i < 30; ++i)
        pairs.push_back(on_track(5.25375, 5.25375 + (rng.uniform() - 0.5) * 0.15, 0.0, 1410e6 + 1e6 * i));
    for (int i = 0; i < 200; ++i)
        pairs.push_back(random_pair(rng));
    for (auto& p : pairs)
        p.ddf_dphi = 0.1 * rng.normal();
    const auto dir = oracle::scratch_dir("report_track");
    io::Provenance prov{"h", 1, "f"};
    const auto sum = report::export_report(pairs, kObs, report::ReportOptions{}, dir, prov);
    EXPECT_EQ(sum.pairs, pairs.size());
    EXPECT_GE(sum.diagonal_count, 30u);
    EXPECT_TRUE(sum.doi_detected);

    std::ifstream in(dir / "phase_vs_ra.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    EXPECT_EQ(line, "mjd,lst_hr,ra_bin,ra_rel_doi_hr,f0_hz,dphi0_rad,ddfdphi_rad,predicted_rad,on_track");
    double prev_abs = -1.0;
    int rows = 0;
    const double cosd = std::cos(kObs.pointing_dec_deg * oracle::pi / 180.0);
    while (std::getline(in, line)) {
        const auto c = io::split_csv(line);
        ASSERT_EQ(c.size(), 9u);
        const double lst = std::stod(std::string(c[1]));
        const double f = std::stod(std::string(c[4]));
        const double ddf = std::stod(std::string(c[6]));
        const double pred = std::stod(std::string(c[7]));
        // independent evaluation of the fringe line
        const double alpha = (5.25375 - lst) * oracle::pi / 12.0 * cosd;
        const double want = 2.0 * oracle::pi * 33.0 * (f * 1e-6 / 1425.0) * std::sin(alpha) +
                            2.0 * oracle::pi * f * (-82e-9);
        EXPECT_NEAR(std::remainder(pred - want, 2.0 * oracle::pi), 0.0, 1e-6);
        EXPECT_GE(std::abs(ddf), prev_abs - 1e-9);
        prev_abs = std::abs(ddf);
        ++rows;
    }
    EXPECT_EQ(rows, static_cast<int>(pairs.size()));
}

TEST(Report, DfTableInBand)
{
    Rng rng(11);
    std::vector<PulsePair> pairs;
    for (int i = 0; i < 20; ++i) {
        auto p = on_track(5.25375, 5.25375 + (rng.uniform() - 0.5) * 0.007);
        p.df_hz = 300e3 + rng.uniform() * 240e3;
        pairs.push_back(p);
    }
    const auto dir = oracle::scratch_dir("report_df");
    report::export_report(pairs, kObs, report::ReportOptions{}, dir, io::Provenance{"h", 1, "f"});
    std::ifstream in(dir / "df_vs_ra.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    int doi_rows = 0;
    while (std::getline(in, line)) {
        const auto c = io::split_csv(line);
        if (c[3] == "1") {
            ++doi_rows;
            const double df = std::stod(std::string(c[2]));
            EXPECT_GE(df, 300.0);
            EXPECT_LE(df, 540.0);
        }
    }
    EXPECT_GT(doi_rows, 0);
}

TEST(Report, UnwritableDestination)
{
    const auto dir = oracle::scratch_dir("report_bad");
    std::ofstream(dir / "file") << "x";
    EXPECT_EQ(error_of([&] {
                  report::export_report(std::vector<PulsePair>{}, kObs, report::ReportOptions{}, dir / "file" / "sub",
                                        io::Provenance{"h", 1, "f"});
              }),
              ErrorCategory::io);
}

#ifndef PAIRSCOPE_COMMANDS_HPP
#define PAIRSCOPE_COMMANDS_HPP

// Subcommand bodies. Each takes plain arguments and writes files and/or a
// text stream, so tests can drive them without a process boundary.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "ionosphere.hpp"
#include "pipeline.hpp"
#include "report.hpp"
#include "secondlevel.hpp"
#include "simulator.hpp"

namespace pairscope::cli {

inline constexpr std::string_view kStageVersions = "simulate/1 firstlevel/1 secondlevel/1 statistics/1";

struct RunManifest {
    std::string stage;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string upstream; // provenance line of the input file, if any
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string data_span; // "mjd_first - mjd_last" of the processed data

    /// Digest of everything that determines output content (paths excluded).
    std::string hash() const
    {
        return config::fnv1a_hex("stage=" + stage + "\nconfig=" + config_hash + "\nseed=" +
                                 std::to_string(seed) + "\nversions=" + std::string(kStageVersions) +
                                 "\nupstream=" + upstream + "\n");
    }

    void write(const std::filesystem::path& path) const
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            fail(ErrorCategory::io, "cannot write manifest '" + path.string() + "'");
        out << "manifest = " << hash() << '\n';
        out << "stage = " << stage << '\n';
        out << "config_hash = " << config_hash << '\n';
        out << "seed = " << seed << '\n';
        out << "stage_versions = " << kStageVersions << '\n';
        if (!upstream.empty())
            out << "upstream = " << upstream << '\n';
        for (const auto& i : inputs)
            out << "input = " << i << '\n';
        for (const auto& o : outputs)
            out << "output = " << o << '\n';
        if (!data_span.empty())
            out << "data_span_mjd = " << data_span << '\n';
        if (!out)
            fail(ErrorCategory::io, "write failed for '" + path.string() + "'");
    }
};

inline std::filesystem::path manifest_path(const std::filesystem::path& out)
{
    return std::filesystem::path(out.string() + ".manifest");
}

/// Compact, space-free filter summary for provenance lines.
inline std::string filters_string(const secondlevel::FilterSet& fs)
{
    std::string ranges;
    for (const auto& r : fs.freq_ranges) {
        if (!ranges.empty())
            ranges += '|';
        ranges += io::fixed(r.min_mhz, 1) + '-' + io::fixed(r.max_mhz, 1);
    }
    return "df_hz=" + io::fixed(fs.df_min_hz, 0) + '-' + io::fixed(fs.df_max_hz, 0) +
           ";ddf_rad=" + io::fixed(fs.ddf_phase_window_rad, 2) +
           ";pulse_rad=" + io::fixed(fs.pulse_phase_window_rad, 2) +
           ";llsnr_pulse=" + io::fixed(fs.llsnr_pulse_threshold, 2) +
           ";llsnr_pair=" + io::fixed(fs.llsnr_pair_threshold, 2) +
           ";rfi_margin=" + io::fixed(fs.rfi_margin_segments, 0) + "x954Hz" +
           ";rfi_limit=" + std::to_string(fs.rfi_population_limit) +
           ";rfi_window_hr=" + io::fixed(fs.rfi_window_hours, 2) + ";freq_mhz=" + ranges +
           ";threshold_db=" + io::fixed(fs.detection_threshold_db, 2) +
           ";ra_bins=" + std::to_string(fs.ra_bins);
}

/// Human-readable settings block printed by `pair`.
inline std::string settings_block(const secondlevel::FilterSet& fs, const geometry::ObservatoryConfig& obs,
                                  double doi_ra_hr)
{
    const double bin_w = geometry::ra_bin_width(fs.ra_bins);
    const double fringe = geometry::fringe_period(obs.baseline_wavelengths, obs.pointing_dec_deg);
    std::string ranges;
    for (const auto& r : fs.freq_ranges) {
        if (!ranges.empty())
            ranges += " and ";
        ranges += io::fixed(r.min_mhz, 1) + " - " + io::fixed(r.max_mhz, 1);
    }
    std::ostringstream s;
    s << "Measurement settings\n";
    s << " Sort method = 1 |Δ_Δf Δ_EWφ|\n";
    s << " DOI RA = " << io::fixed(doi_ra_hr, 6) << " hr\n";
    s << " RF frequency range = " << ranges << " MHz\n";
    s << " Pulse pair Δf = " << io::fixed(fs.df_min_hz * 1e-3, 1) << " kHz - "
      << io::fixed(fs.df_max_hz * 1e-3, 1) << " kHz\n";
    s << " Number of RA bins / 24 hr = " << fs.ra_bins << " ; ΔRA = " << io::fixed(bin_w, 4) << " hr\n";
    s << " FFT bin bandwidth = " << io::fixed(kBinWidthHz, 1) << " Hz ; Integration = "
      << io::fixed(kIntegrationSeconds, 2) << " s\n";
    s << " DEC = " << io::fixed(obs.pointing_dec_deg, 1) << "° ; Element FWHM = "
      << io::fixed(obs.element_fwhm_deg, 1) << "° ; T_INT = " << io::fixed(obs.instrumental_delay_ns, 1)
      << " ns\n";
    s << " Pulse pair Δ_Δf Δ_EWφ filter = 0.00 ± " << io::fixed(fs.ddf_phase_window_rad, 2) << " rad\n";
    s << " Pulse Δ_EWφ filter = 0.00 ± " << io::fixed(fs.pulse_phase_window_rad, 2) << " rad\n";
    s << " RFI margin limit = ± " << io::fixed(fs.rfi_margin_segments, 0) << " × "
      << io::fixed(kSegmentBandwidthHz, 0) << " Hz\n";
    s << " Log10 likelihood of composite pulse SNR threshold = " << io::fixed(fs.llsnr_pulse_threshold, 2)
      << '\n';
    s << " Log10 likelihood of composite pulse pair SNR threshold = "
      << io::fixed(fs.llsnr_pair_threshold, 2) << '\n';
    s << " Baseline distance = " << io::fixed(obs.baseline_wavelengths, 1) << " wavelengths at "
      << io::fixed(obs.reference_freq_mhz, 0) << " MHz\n";
    s << " Fringe period at DEC = " << io::fixed(fringe, 3) << " hr ≈ " << io::fixed(fringe / bin_w, 1)
      << " RA bins\n";
    return s.str();
}

/// Provenance fields parsed back from a "# manifest=... seed=... filters=..." line.
inline io::Provenance parse_provenance(const std::vector<std::string>& comments)
{
    io::Provenance p;
    for (const auto& c : comments) {
        std::istringstream in(c.substr(c.find_first_not_of("# ")));
        std::string tok;
        bool any = false;
        while (in >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos)
                continue;
            const auto key = tok.substr(0, eq);
            const auto val = tok.substr(eq + 1);
            if (key == "manifest") {
                p.manifest_hash = val;
                any = true;
            } else if (key == "seed") {
                p.seed = std::stoull(val);
            } else if (key == "filters") {
                p.filters = val;
            }
        }
        if (any)
            return p;
    }
    return p;
}

inline std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCategory::io, "cannot open '" + path + "'");
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorCategory::io, "cannot write '" + path.string() + "'");
    return out;
}

inline void close_output(std::ofstream& out, const std::filesystem::path& path)
{
    out.close();
    if (!out)
        fail(ErrorCategory::io, "write failed for '" + path.string() + "'");
}

// --- stage configuration ---------------------------------------------------

/// Observatory, filters and report options from an optional config file.
/// A full scenario file is accepted too; its scenario keys are validated.
struct StageConfig {
    geometry::ObservatoryConfig obs;
    secondlevel::FilterSet filters;
    report::ReportOptions report;
    std::string hash; // empty without a file
};

inline report::ReportOptions read_report_options(const config::Section& a)
{
    report::ReportOptions o;
    o.doi_ra_hr = a.number("doi_ra_hr", o.doi_ra_hr);
    o.doi_lo_hr = a.number("doi_lo_hr", o.doi_lo_hr);
    o.doi_hi_hr = a.number("doi_hi_hr", o.doi_hi_hr);
    o.doi_step_hr = a.number("doi_step_hr", o.doi_step_hr);
    if (a.has("sweep_thresholds"))
        o.sweep_thresholds = a.number_list("sweep_thresholds");
    o.main_threshold = a.number("main_threshold", o.main_threshold);
    o.window.lo_hr = a.number("window_lo_hr", o.window.lo_hr);
    o.window.hi_hr = a.number("window_hi_hr", o.window.hi_hr);
    const auto sigma = a.text("sigma_model", "poisson");
    if (sigma == "poisson")
        o.sigma = statistics::SigmaModel::poisson;
    else if (sigma == "sample")
        o.sigma = statistics::SigmaModel::sample;
    else
        fail(ErrorCategory::config, "sigma_model must be 'poisson' or 'sample', got '" + sigma + "'");
    o.track.phase_tol_rad = a.number("phase_tol_rad", o.track.phase_tol_rad);
    o.track.beam_halfwidth_fwhm = a.number("beam_halfwidth_fwhm", o.track.beam_halfwidth_fwhm);
    o.null_confidence = a.number("null_confidence", o.null_confidence);
    return o;
}

inline StageConfig load_stage_config(const std::optional<std::string>& path)
{
    StageConfig sc;
    if (!path)
        return sc;
    const auto f = config::parse_file(*path);
    if (f.globals.has("duration_days"))
        sc.obs = config::read_scenario(f).obs;
    else if (f.globals.has("longitude_east_deg") || !f.globals.items().empty())
        sc.obs = config::read_observatory(f.globals);
    sc.filters = config::read_filters(f);
    sc.report = read_report_options(f.analysis);
    sc.report.n_bins = sc.filters.ra_bins;
    f.check_all_used();
    sc.hash = config::config_hash(f);
    return sc;
}

// --- simulate ----------------------------------------------------------------

struct SimulateArgs {
    std::string config_path;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    bool raw = false;
};

struct SimulateResult {
    std::uint64_t epochs = 0;
    std::uint64_t events = 0;
    std::uint64_t blocks = 0;
    std::string manifest_hash;
};

inline simulator::ScenarioConfig load_scenario(const std::string& path, std::optional<std::uint64_t> seed,
                                               std::string* hash = nullptr)
{
    const auto f = config::parse_file(path);
    auto cfg = config::read_scenario(f);
    config::read_filters(f);
    read_report_options(f.analysis);
    f.check_all_used();
    if (seed)
        cfg.seed = *seed;
    if (hash)
        *hash = config::config_hash(f);
    return cfg;
}

inline SimulateResult cmd_simulate(const SimulateArgs& a, std::ostream& log)
{
    std::string hash;
    const auto cfg = load_scenario(a.config_path, a.seed, &hash);
    const simulator::Simulator sim(cfg);

    RunManifest m;
    m.stage = a.raw ? "simulate-raw" : "simulate";
    m.config_hash = hash;
    m.seed = cfg.seed;
    m.inputs.push_back(a.config_path);
    m.outputs.push_back(a.out.string());
    const auto n = sim.epoch_count();
    if (n > 0)
        m.data_span = io::fixed(cfg.epoch_mjd(0), 9) + " - " + io::fixed(cfg.epoch_mjd(n - 1), 9);

    SimulateResult r;
    r.epochs = n;
    r.manifest_hash = m.hash();
    auto out = open_output(a.out);
    if (a.raw) {
        // Raw streams carry no text header, so the manifest alone identifies them.
        io::write_raw_header(out, cfg.segments_mhz);
        sim.synthesize_run([&](const simulator::EpochData& d) {
            for (const auto& b : d.blocks)
                io::write_raw_block(out, b);
            r.blocks += d.blocks.size();
        });
    } else {
        const io::Provenance prov{r.manifest_hash, cfg.seed,
                                  "threshold_db=" + io::fixed(cfg.threshold_db, 2)};
        io::EventWriter w(out, &prov);
        pipeline::EventGenerator(sim).run([&](const pipeline::EpochEvents& ep) {
            w.write(ep.events);
            r.events += ep.events.size();
        });
    }
    close_output(out, a.out);
    m.write(manifest_path(a.out));
    log << "simulate: epochs=" << r.epochs << ' ' << (a.raw ? "blocks=" : "events=")
        << (a.raw ? r.blocks : r.events) << " manifest=" << r.manifest_hash << '\n';
    return r;
}

// --- pair --------------------------------------------------------------------

struct PairArgs {
    std::string events_path;
    std::optional<std::string> config_path;
    std::filesystem::path out;
};

inline secondlevel::FilterResult cmd_pair(const PairArgs& a, std::ostream& log)
{
    const auto sc = load_stage_config(a.config_path);
    auto in = open_input(a.events_path);
    std::vector<std::string> comments;
    std::vector<PulseEvent> events;
    {
        // read_events skips provenance; fetch it first for the manifest chain
        std::string first;
        const auto pos = in.tellg();
        while (in.peek() == '#' && std::getline(in, first))
            comments.push_back(first);
        in.clear();
        in.seekg(pos);
        events = io::read_events(in);
    }
    const auto upstream = parse_provenance(comments);
    const auto result = secondlevel::run_second_level(events, sc.filters, sc.obs);

    RunManifest m;
    m.stage = "pair";
    m.config_hash = sc.hash.empty() ? "defaults" : sc.hash;
    m.seed = upstream.seed;
    m.upstream = upstream.line() + " filters_applied=" + filters_string(sc.filters);
    m.inputs.push_back(a.events_path);
    if (a.config_path)
        m.inputs.push_back(*a.config_path);
    m.outputs.push_back(a.out.string());
    if (!events.empty()) {
        const auto [lo, hi] = std::minmax_element(events.begin(), events.end(),
                                                  [](const auto& x, const auto& y) { return x.mjd < y.mjd; });
        m.data_span = io::fixed(lo->mjd, 9) + " - " + io::fixed(hi->mjd, 9);
    }
    const io::Provenance prov{m.hash(), upstream.seed, filters_string(sc.filters)};
    auto out = open_output(a.out);
    io::write_pairs(out, result.accepted, &prov);
    close_output(out, a.out);
    m.write(manifest_path(a.out));

    log << settings_block(sc.filters, sc.obs, sc.report.doi_ra_hr);
    log << "pair: events=" << events.size() << " candidates=" << result.candidates
        << " accepted=" << result.counts[static_cast<std::size_t>(secondlevel::Verdict::accepted)];
    for (std::size_t v = 1; v < secondlevel::kVerdictCount; ++v)
        log << " rejected_" << secondlevel::verdict_name(static_cast<secondlevel::Verdict>(v)) << '='
            << result.counts[v];
    log << " manifest=" << prov.manifest_hash << '\n';
    return result;
}

// --- analyze -----------------------------------------------------------------

struct AnalyzeArgs {
    std::string pairs_path;
    std::optional<std::string> config_path;
    std::filesystem::path out_dir;
    std::optional<std::pair<double, double>> doi_range;
    std::optional<double> doi_step;
    std::optional<std::vector<double>> thresholds;
};

inline report::Summary cmd_analyze(const AnalyzeArgs& a, std::ostream& log)
{
    auto sc = load_stage_config(a.config_path);
    if (a.doi_range) {
        sc.report.doi_lo_hr = a.doi_range->first;
        sc.report.doi_hi_hr = a.doi_range->second;
    }
    if (a.doi_step)
        sc.report.doi_step_hr = *a.doi_step;
    if (a.thresholds)
        sc.report.sweep_thresholds = *a.thresholds;

    auto in = open_input(a.pairs_path);
    std::vector<std::string> comments;
    const auto pairs = io::read_pairs(in, &comments);
    const auto upstream = parse_provenance(comments);

    RunManifest m;
    m.stage = "analyze";
    m.config_hash = sc.hash.empty() ? "defaults" : sc.hash;
    m.seed = upstream.seed;
    std::ostringstream opts;
    opts << upstream.line() << " doi=" << io::fixed(sc.report.doi_lo_hr, 6) << ':'
         << io::fixed(sc.report.doi_step_hr, 6) << ':' << io::fixed(sc.report.doi_hi_hr, 6) << " sweep=";
    for (double t : sc.report.sweep_thresholds)
        opts << io::fixed(t, 4) << ';';
    m.upstream = opts.str();
    m.inputs.push_back(a.pairs_path);
    if (a.config_path)
        m.inputs.push_back(*a.config_path);
    m.outputs.push_back(a.out_dir.string());
    const io::Provenance prov{m.hash(), upstream.seed, upstream.filters};
    const auto summary = report::export_report(pairs, sc.obs, sc.report, a.out_dir, prov);
    m.write(a.out_dir / "manifest.txt");

    log << "analyze: pairs=" << summary.pairs;
    if (summary.pairs > 0)
        log << " doi_best_ra_hr=" << io::fixed(summary.doi.best_ra_hr, 6)
            << " score=" << summary.doi.best_score << " null_threshold=" << summary.null_threshold;
    log << " doi_detected=" << (summary.doi_detected ? "yes" : "no") << " manifest=" << prov.manifest_hash
        << '\n';
    return summary;
}

// --- run (simulate -> pair -> analyze) -----------------------------------------

struct RunArgs {
    std::string config_path;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed;
};

inline report::Summary cmd_run(const RunArgs& a, std::ostream& log)
{
    const auto events = a.out_dir / "events.csv";
    const auto pairs = a.out_dir / "pairs.csv";
    cmd_simulate({a.config_path, events, a.seed, false}, log);
    cmd_pair({events.string(), a.config_path, pairs}, log);
    return cmd_analyze({pairs.string(), a.config_path, a.out_dir / "report", {}, {}, {}}, log);
}

// --- calculators -------------------------------------------------------------

struct IonoArgs {
    ionosphere::IonoParams params;
    double f0_ghz = 1.425;
    double df_mhz = 1.0;
    double t_int_s = kIntegrationSeconds;
    double baseline_wavelengths = 33.0;
};

inline ionosphere::IonoReport cmd_iono(const IonoArgs& a, std::ostream& out)
{
    const auto r = ionosphere::evaluate(a.params, a.f0_ghz, a.df_mhz, a.t_int_s, a.baseline_wavelengths);
    char buf[160];
    auto row = [&](const char* name, double v, const char* unit) {
        std::snprintf(buf, sizeof buf, "%-24s %.6e %s\n", name, v, unit);
        out << buf;
    };
    row("faraday_phase", r.faraday_phase_rad, "rad");
    row("pair_phase_diff", r.pair_phase_diff_rad, "rad");
    row("pair_phase_diff_per_mhz", a.df_mhz != 0.0 ? r.pair_phase_diff_rad / a.df_mhz : 0.0, "rad/MHz");
    row("iono_delay", r.delay_us * 1e3, "ns");
    row("tec_drift", r.tec_drift_rad, "rad");
    row("refraction_bound", r.refraction_bound_rad, "rad");
    return r;
}

struct GeomArgs {
    std::optional<double> mjd;
    double longitude_east_deg = 0.0;
    double baseline_wavelengths = 33.0;
    double dec_deg = -4.3;
    std::size_t n_bins = 3200;
    std::optional<double> ra_hr;
    double freq_mhz = 1425.0;
};

inline void cmd_geom(const GeomArgs& a, std::ostream& out)
{
    char buf[160];
    auto row = [&](const char* name, const std::string& v, const char* unit) {
        std::snprintf(buf, sizeof buf, "%-22s %s %s\n", name, v.c_str(), unit);
        out << buf;
    };
    const double fp = geometry::fringe_period(a.baseline_wavelengths, a.dec_deg);
    row("fringe_period", io::fixed(fp, 6), "hr");
    row("ra_bin_width", io::fixed(geometry::ra_bin_width(a.n_bins), 6), "hr");
    row("ra_bin_traversal", io::fixed(geometry::ra_bin_traversal_s(a.n_bins), 3), "s");
    row("fringe_period_bins", io::fixed(fp / geometry::ra_bin_width(a.n_bins), 3), "bins");
    if (a.ra_hr)
        row("ra_bin", std::to_string(geometry::ra_bin(*a.ra_hr, a.n_bins)), "");
    if (a.mjd) {
        const double lst = geometry::mjd_to_lst(*a.mjd, a.longitude_east_deg);
        row("lst", io::fixed(lst, 9), "hr");
        row("lst_ra_bin", std::to_string(geometry::ra_bin(lst, a.n_bins)), "");
        if (a.ra_hr) {
            geometry::ObservatoryConfig obs;
            obs.longitude_east_deg = a.longitude_east_deg;
            obs.baseline_wavelengths = a.baseline_wavelengths;
            obs.pointing_dec_deg = a.dec_deg;
            const geometry::SkyDirection src(*a.ra_hr, a.dec_deg);
            const double off = geometry::beam_offset_deg(src, lst, obs);
            row("beam_offset", io::fixed(off, 6), "deg");
            if (off > 3.0 * obs.element_fwhm_deg)
                row("expected_ew_phase", "out_of_beam", "");
            else
                row("expected_ew_phase", io::fixed(geometry::expected_ew_phase(src, lst, obs, a.freq_mhz), 9),
                    "rad");
        }
    }
}

} // namespace pairscope::cli

#endif

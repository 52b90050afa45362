// pairscope command-line front end.
//
//   pairscope simulate --config scenario.cfg --out events.csv [--seed N] [--raw]
//   pairscope pair     --in events.csv --out pairs.csv [--config filters.cfg]
//   pairscope analyze  --in pairs.csv --out report/ [--config analysis.cfg]
//   pairscope run      --config scenario.cfg --out rundir/ [--seed N]
//   pairscope iono     [--b-tesla ...] [--tec ...]
//   pairscope geom     [--mjd ...] [--ra-hr ...]
//
// On failure prints one line to stderr:
//   error category=<name> message="<text>"

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pairscope/commands.hpp"

namespace {

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += (c == '\n' ? ' ' : c);
    }
    return out;
}

int report_error(std::string_view category, const std::string& message)
{
    std::cerr << "error category=" << category << " message=\"" << escape(message) << "\"\n";
    return 2;
}

} // namespace

int main(int argc, char** argv)
{
    namespace cli = pairscope::cli;
    CLI::App app{"pairscope: interferometric pulse pair simulation and analysis"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string in_path;
    std::uint64_t seed = 0;
    bool raw = false;

    auto* sim = app.add_subcommand("simulate", "synthesize a scenario into first-level events");
    sim->add_option("--config", config_path, "scenario config")->required();
    sim->add_option("--out", out_path, "event file (raw IQ stream with --raw)")->required();
    auto* sim_seed = sim->add_option("--seed", seed, "override the config seed");
    sim->add_flag("--raw", raw, "write the raw IQ block stream instead of events");

    auto* pair = app.add_subcommand("pair", "second-level pairing and filtering");
    pair->add_option("--in", in_path, "event file")->required();
    auto* pair_cfg = pair->add_option("--config", config_path, "observatory and [filters] config");
    pair->add_option("--out", out_path, "pair file")->required();

    std::pair<double, double> doi_range;
    double doi_step = 0.0;
    std::vector<double> thresholds;
    auto* an = app.add_subcommand("analyze", "statistics and report tables");
    an->add_option("--in", in_path, "pair file")->required();
    auto* an_cfg = an->add_option("--config", config_path, "observatory and [analysis] config");
    an->add_option("--out", out_path, "report directory")->required();
    auto* an_range = an->add_option("--doi-range", doi_range, "DOI search range LO HI (hr)");
    auto* an_step = an->add_option("--doi-step", doi_step, "DOI search step (hr)");
    auto* an_th = an->add_option("--thresholds", thresholds, "LLSNR sweep thresholds")->delimiter(',');

    auto* run = app.add_subcommand("run", "simulate, pair and analyze in one go");
    run->add_option("--config", config_path, "scenario config")->required();
    run->add_option("--out", out_path, "output directory")->required();
    auto* run_seed = run->add_option("--seed", seed, "override the config seed");

    cli::IonoArgs iono_args;
    auto* iono = app.add_subcommand("iono", "ionospheric phase and delay budget");
    iono->add_option("--b-tesla", iono_args.params.b_field_t, "magnetic field (T)");
    iono->add_option("--tec", iono_args.params.tec, "total electron content (m^-2)");
    iono->add_option("--tec-rate", iono_args.params.tec_rate, "TEC rate (m^-2 s^-1)");
    iono->add_option("--refraction-deg", iono_args.params.refraction_100mhz_deg,
                     "refraction at 100 MHz (deg)");
    iono->add_option("--f0-ghz", iono_args.f0_ghz, "RF frequency (GHz)");
    iono->add_option("--df-mhz", iono_args.df_mhz, "pair spacing (MHz)");
    iono->add_option("--t-int-s", iono_args.t_int_s, "integration time (s)");
    iono->add_option("--baseline", iono_args.baseline_wavelengths, "baseline (wavelengths)");
    iono->add_option("--out", out_path, "also write the table here");

    cli::GeomArgs geom_args;
    double mjd = 0.0;
    double ra = 0.0;
    auto* geom = app.add_subcommand("geom", "fringe, RA-bin and LST calculator");
    auto* geom_mjd = geom->add_option("--mjd", mjd, "MJD (UTC)");
    geom->add_option("--longitude-east-deg", geom_args.longitude_east_deg, "observatory longitude");
    geom->add_option("--baseline", geom_args.baseline_wavelengths, "baseline (wavelengths)");
    geom->add_option("--dec-deg", geom_args.dec_deg, "declination (deg)");
    geom->add_option("--ra-bins", geom_args.n_bins, "RA bins per 24 hr");
    auto* geom_ra = geom->add_option("--ra-hr", ra, "source RA (hr)");
    geom->add_option("--freq-mhz", geom_args.freq_mhz, "RF frequency (MHz)");
    geom->add_option("--out", out_path, "also write the table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("usage", e.what());
    }

    auto opt_seed = [&](CLI::Option* o) {
        return o->count() ? std::optional<std::uint64_t>(seed) : std::nullopt;
    };
    auto opt_cfg = [&](CLI::Option* o) {
        return o->count() ? std::optional<std::string>(config_path) : std::nullopt;
    };
    auto tee = [&](const std::string& text) {
        std::cout << text;
        if (!out_path.empty()) {
            auto f = cli::open_output(out_path);
            f << text;
            cli::close_output(f, out_path);
        }
    };

    try {
        if (*sim) {
            cli::cmd_simulate({config_path, out_path, opt_seed(sim_seed), raw}, std::cout);
        } else if (*pair) {
            cli::cmd_pair({in_path, opt_cfg(pair_cfg), out_path}, std::cout);
        } else if (*an) {
            cli::AnalyzeArgs a{in_path, opt_cfg(an_cfg), out_path, {}, {}, {}};
            if (an_range->count())
                a.doi_range = doi_range;
            if (an_step->count())
                a.doi_step = doi_step;
            if (an_th->count())
                a.thresholds = thresholds;
            cli::cmd_analyze(a, std::cout);
        } else if (*run) {
            cli::cmd_run({config_path, out_path, opt_seed(run_seed)}, std::cout);
        } else if (*iono) {
            std::ostringstream s;
            cli::cmd_iono(iono_args, s);
            tee(s.str());
        } else if (*geom) {
            if (geom_mjd->count())
                geom_args.mjd = mjd;
            if (geom_ra->count())
                geom_args.ra_hr = ra;
            std::ostringstream s;
            cli::cmd_geom(geom_args, s);
            tee(s.str());
        }
    } catch (const pairscope::Error& e) {
        return report_error(pairscope::category_name(e.category()), e.what());
    } catch (const std::exception& e) {
        return report_error("internal", e.what());
    }
    return 0;
}

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include <pairscope/constants.hpp>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run cli(const std::string& args, const fs::path& dir)
{
    const auto err_path = dir / "stderr.txt";
    const std::string cmd = std::string(PAIRSCOPE_CLI) + " " + args + " 2> " + err_path.string();
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p)
        return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0)
        r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = oracle::slurp(err_path);
    return r;
}

std::string scenario(const std::string& name)
{
    return std::string(PAIRSCOPE_SOURCE_DIR) + "/scenarios/" + name;
}

std::string fixture(const std::string& name)
{
    return std::string(PAIRSCOPE_SOURCE_DIR) + "/tests/fixtures/" + name;
}

const std::regex kErrorLine(R"(^error category=([a-z_]+) message="[^\n]*"\n$)");

std::string category(const Run& r)
{
    std::smatch m;
    return std::regex_match(r.err, m, kErrorLine) ? m[1].str() : "<malformed: " + r.err + ">";
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

} // namespace

TEST(Cli, GoldenEvents)
{
    const auto dir = oracle::scratch_dir("cli_golden_events");
    const auto r = cli("simulate --config " + scenario("golden_small.cfg") + " --out " + (dir / "e.csv").string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(oracle::slurp(dir / "e.csv"), oracle::slurp(fixture("golden_events.csv")));
    EXPECT_TRUE(fs::exists(dir / "e.csv.manifest"));
}

TEST(Cli, GoldenPairs)
{
    const auto dir = oracle::scratch_dir("cli_golden_pairs");
    const auto r = cli("pair --in " + fixture("golden_events.csv") + " --config " + scenario("golden_small.cfg") +
                           " --out " + (dir / "p.csv").string(),
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(oracle::slurp(dir / "p.csv"), oracle::slurp(fixture("golden_pairs.csv")));
}

TEST(Cli, RunEqualsStagedExecution)
{
    const auto dir = oracle::scratch_dir("cli_compose");
    const auto cfg = scenario("golden_small.cfg");
    ASSERT_EQ(cli("run --config " + cfg + " --out " + (dir / "run").string(), dir).code, 0);
    fs::create_directories(dir / "staged");
    const auto s = dir / "staged";
    ASSERT_EQ(cli("simulate --config " + cfg + " --out " + (s / "events.csv").string(), dir).code, 0);
    ASSERT_EQ(cli("pair --in " + (s / "events.csv").string() + " --config " + cfg + " --out " +
                      (s / "pairs.csv").string(),
                  dir)
                  .code,
              0);
    ASSERT_EQ(cli("analyze --in " + (s / "pairs.csv").string() + " --config " + cfg + " --out " +
                      (s / "report").string(),
                  dir)
                  .code,
              0);
    for (const auto& f : {"events.csv", "pairs.csv"})
        EXPECT_EQ(oracle::slurp(dir / "run" / f), oracle::slurp(s / f)) << f;
    std::size_t tables = 0;
    for (const auto& e : fs::directory_iterator(s / "report")) {
        if (e.path().extension() != ".csv" && e.path().extension() != ".txt")
            continue;
        if (e.path().filename() == "manifest.txt")
            continue;
        EXPECT_EQ(oracle::slurp(dir / "run" / "report" / e.path().filename()), oracle::slurp(e.path()))
            << e.path().filename();
        ++tables;
    }
    EXPECT_GE(tables, 8u);
}

TEST(Cli, SeedDeterminism)
{
    const auto dir = oracle::scratch_dir("cli_seed");
    const auto cfg = scenario("awgn_minimal.cfg");
    for (const char* name : {"a.csv", "b.csv"})
        ASSERT_EQ(cli("simulate --config " + cfg + " --seed 5 --out " + (dir / name).string(), dir).code, 0);
    ASSERT_EQ(cli("simulate --config " + cfg + " --seed 6 --out " + (dir / "c.csv").string(), dir).code, 0);
    EXPECT_EQ(oracle::slurp(dir / "a.csv"), oracle::slurp(dir / "b.csv"));
    const auto first_line = [](const std::string& t) { return t.substr(0, t.find('\n')); };
    EXPECT_EQ(first_line(oracle::slurp(dir / "a.csv.manifest")), first_line(oracle::slurp(dir / "b.csv.manifest")));
    EXPECT_NE(oracle::slurp(dir / "a.csv"), oracle::slurp(dir / "c.csv"));
    EXPECT_NE(oracle::slurp(dir / "a.csv").find("seed=5"), std::string::npos);
}

TEST(Cli, AwgnEventRate)
{
    const auto dir = oracle::scratch_dir("cli_awgn");
    const auto r = cli("simulate --config " + scenario("awgn_minimal.cfg") + " --out " + (dir / "e.csv").string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    std::smatch m;
    ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(epochs=(\d+) events=(\d+))")));
    const double epochs = std::stod(m[1]);
    const double events = std::stod(m[2]);
    const double trials = epochs * 2 /*segments*/ * 2 /*elements*/ * 256;
    const double p = std::exp(-std::pow(10.0, 0.85));
    const double sigma = std::sqrt(trials * p * (1 - p));
    EXPECT_LT(std::abs(events - trials * p), 3.0 * sigma) << events << " vs " << trials * p;
    // header, provenance and one row per event
    const auto text = oracle::slurp(dir / "e.csv");
    EXPECT_EQ(static_cast<double>(std::count(text.begin(), text.end(), '\n')), events + 2);
}

TEST(Cli, PairEchoesSettings)
{
    const auto dir = oracle::scratch_dir("cli_settings");
    const auto r = cli("pair --in " + fixture("golden_events.csv") + " --out " + (dir / "p.csv").string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* line : {" Pulse pair Δf = 300.0 kHz - 540.0 kHz\n", " DOI RA = 5.253750 hr\n",
                             " Number of RA bins / 24 hr = 3200 ; ΔRA = 0.0075 hr\n",
                             " Fringe period at DEC = 0.116 hr ≈ 15.5 RA bins\n",
                             " Log10 likelihood of composite pulse pair SNR threshold = -2.70\n"})
        EXPECT_NE(r.out.find(line), std::string::npos) << line;
}

TEST(Cli, AnalyzeEmptyPairs)
{
    const auto dir = oracle::scratch_dir("cli_empty");
    write_text(dir / "p.csv", "# manifest=x seed=3\n" + std::string(
                                  "mjd,lst_hr,ra_bin,f0_hz,df_hz,snr_e0_db,snr_w0_db,snr_edf_db,snr_wdf_db,dphi0_rad,"
                                  "dphidf_rad,ddfdphi_rad,llsnr_pair,segnoise_e0_db,segnoise_w0_db,segnoise_edf_db,"
                                  "segnoise_wdf_db,band50_e_db,band50_w_db\n"));
    const auto r = cli("analyze --in " + (dir / "p.csv").string() + " --out " + (dir / "rep").string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("pairs=0"), std::string::npos);
    EXPECT_NE(oracle::slurp(dir / "rep" / "summary.txt").find("doi_detected = no"), std::string::npos);
}

TEST(Cli, ErrorCategories)
{
    const auto dir = oracle::scratch_dir("cli_errors");
    {
        const auto missing = (dir / "absent.csv").string();
        const auto r = cli("pair --in " + missing + " --out " + (dir / "p.csv").string(), dir);
        EXPECT_NE(r.code, 0);
        EXPECT_EQ(category(r), "io");
        EXPECT_NE(r.err.find(missing), std::string::npos);
    }
    {
        const auto r = cli("frobnicate", dir);
        EXPECT_NE(r.code, 0);
        EXPECT_EQ(category(r), "usage");
    }
    {
        write_text(dir / "bad.cfg", "longitude_east_deg = 0\nmjd_start = 60500\nduration_days = 0.001\n"
                                    "segments_mhz = 1420\nfrequency = 3\n");
        const auto r = cli("simulate --config " + (dir / "bad.cfg").string() + " --out " + (dir / "e.csv").string(), dir);
        EXPECT_NE(r.code, 0);
        EXPECT_EQ(category(r), "config");
        EXPECT_NE(r.err.find("frequency"), std::string::npos);
    }
    {
        write_text(dir / "df.cfg", "longitude_east_deg = 0\nmjd_start = 60500\nduration_days = 0.001\n"
                                   "segments_mhz = 1420.0, 1420.4\n[source lonely]\nkind = celestial_pulse_pair\n"
                                   "ra_hr = 1\ndec_deg = -4.3\nf0_mhz = 1420.0\ndf_hz = 700000\n");
        const auto r = cli("simulate --config " + (dir / "df.cfg").string() + " --out " + (dir / "e.csv").string(), dir);
        EXPECT_NE(r.code, 0);
        EXPECT_EQ(category(r), "config");
        EXPECT_NE(r.err.find("lonely"), std::string::npos) << r.err;
    }
    {
        write_text(dir / "e.csv", "mjd,element\n1,E\n");
        const auto r = cli("pair --in " + (dir / "e.csv").string() + " --out " + (dir / "p.csv").string(), dir);
        EXPECT_NE(r.code, 0);
        EXPECT_EQ(category(r), "schema");
    }
    {
        const auto r = cli("geom --dec-deg 90", dir);
        EXPECT_NE(r.code, 0);
        EXPECT_EQ(category(r), "domain");
    }
}

TEST(Cli, IonoTable)
{
    const auto dir = oracle::scratch_dir("cli_iono");
    const auto r = cli("iono --tec 1e18 --out " + (dir / "iono.txt").string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(oracle::slurp(dir / "iono.txt"), r.out);
    std::smatch m;
    ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(pair_phase_diff_per_mhz\s+(\S+) rad/MHz)")));
    EXPECT_NEAR(std::stod(m[1]), -8.16e-4, 0.01 * 8.16e-4);
    ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(iono_delay\s+(\S+) ns)")));
    EXPECT_NEAR(std::stod(m[1]), 66.0, 0.66);

    const auto z = cli("iono --tec 0 --tec-rate 0", dir);
    ASSERT_EQ(z.code, 0) << z.err;
    for (const char* row : {"faraday_phase", "pair_phase_diff ", "iono_delay", "tec_drift"}) {
        ASSERT_TRUE(std::regex_search(z.out, m, std::regex(std::string(row) + R"(\s+(\S+))")));
        EXPECT_EQ(std::stod(m[1]), 0.0) << row;
    }
}

TEST(Cli, GeomTable)
{
    const auto dir = oracle::scratch_dir("cli_geom");
    const auto r = cli("geom --mjd 60500.755 --longitude-east-deg -121 --ra-hr 5.25375", dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("fringe_period          0.116076 hr"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("ra_bin_width           0.007500 hr"), std::string::npos);
    EXPECT_NE(r.out.find("ra_bin_traversal       27.000 s"), std::string::npos);
    EXPECT_NE(r.out.find("ra_bin                 700"), std::string::npos);
    std::smatch m;
    ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(\nlst\s+(\S+) hr)")));
    EXPECT_LT(std::abs(oracle::hours_diff(std::stod(m[1]), oracle::gmst_era_hours(60500.755) - 121.0 / 15.0)),
              0.1 / 3600.0);
}

#ifndef PAIRSCOPE_CONFIG_HPP
#define PAIRSCOPE_CONFIG_HPP

// Plain-text key = value configuration.
//
//   # comment
//   seed = 42
//   segments_mhz = 1410.0, 1410.4
//   [source rigel]
//   kind = celestial_pulse_pair
//   [filters]
//   df_min_hz = 300000
//
// Keys before any section header describe the observatory and scenario;
// `[source NAME]` opens one source; `[filters]` holds second-level settings;
// `[analysis]` holds report options.
// Every key must be consumed by the reader, so typos fail loudly.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "secondlevel.hpp"
#include "simulator.hpp"

namespace pairscope::config {

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// One section's keys with line numbers, tracking which were read.
class Section {
public:
    Section() = default;
    Section(std::string kind, std::string name, std::size_t line)
        : kind_(std::move(kind)), name_(std::move(name)), line_(line) {}

    const std::string& kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }
    std::size_t line() const noexcept { return line_; }

    void set(const std::string& key, std::string value, std::size_t line)
    {
        if (values_.count(key))
            fail(ErrorCategory::config, "line " + std::to_string(line) + ": duplicate key '" + key + "'");
        values_[key] = {std::move(value), line};
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string text(const std::string& key, const std::string& fallback) const
    {
        auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        used_.insert(key);
        return it->second.first;
    }

    std::string required_text(const std::string& key) const
    {
        if (!has(key))
            fail(ErrorCategory::config, where() + "missing required key '" + key + "'");
        return text(key, {});
    }

    double number(const std::string& key, double fallback) const
    {
        if (!has(key))
            return fallback;
        return parse_double(key, text(key, {}));
    }

    double required_number(const std::string& key) const
    {
        return parse_double(key, required_text(key));
    }

    std::uint64_t integer(const std::string& key, std::uint64_t fallback) const
    {
        if (!has(key))
            return fallback;
        const auto s = text(key, {});
        std::uint64_t v{};
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            fail(ErrorCategory::config, at(key) + "expected a non-negative integer, got '" + s + "'");
        return v;
    }

    bool boolean(const std::string& key, bool fallback) const
    {
        if (!has(key))
            return fallback;
        const auto s = text(key, {});
        if (s == "1" || s == "true" || s == "yes")
            return true;
        if (s == "0" || s == "false" || s == "no")
            return false;
        fail(ErrorCategory::config, at(key) + "expected true/false, got '" + s + "'");
    }

    std::vector<double> number_list(const std::string& key) const
    {
        std::vector<double> out;
        if (!has(key))
            return out;
        std::stringstream ss(text(key, {}));
        std::string item;
        while (std::getline(ss, item, ','))
            out.push_back(parse_double(key, std::string(trim(item))));
        return out;
    }

    /// Throws naming the first key nobody read.
    void check_all_used() const
    {
        for (const auto& [k, v] : values_)
            if (!used_.count(k))
                fail(ErrorCategory::config,
                     "line " + std::to_string(v.second) + ": unknown key '" + k + "'" +
                         (kind_.empty() ? "" : " in [" + kind_ + (name_.empty() ? "" : " " + name_) + "]"));
    }

    std::vector<std::pair<std::string, std::string>> items() const
    {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [k, v] : values_)
            out.emplace_back(k, v.first);
        return out;
    }

private:
    std::string where() const
    {
        return kind_.empty() ? std::string() : "[" + kind_ + (name_.empty() ? "" : " " + name_) + "] ";
    }

    std::string at(const std::string& key) const
    {
        auto it = values_.find(key);
        return "line " + std::to_string(it == values_.end() ? line_ : it->second.second) + ", key '" +
               key + "': ";
    }

    double parse_double(const std::string& key, const std::string& s) const
    {
        double v{};
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            fail(ErrorCategory::config, at(key) + "expected a number, got '" + s + "'");
        return v;
    }

    std::string kind_;
    std::string name_;
    std::size_t line_ = 0;
    std::map<std::string, std::pair<std::string, std::size_t>> values_;
    mutable std::set<std::string> used_;
};

struct ConfigFile {
    Section globals;
    std::vector<Section> sources;
    Section filters{"filters", "", 0};
    Section analysis{"analysis", "", 0};
    bool has_filters = false;
    bool has_analysis = false;

    void check_all_used() const
    {
        globals.check_all_used();
        for (const auto& s : sources)
            s.check_all_used();
        filters.check_all_used();
        analysis.check_all_used();
    }
};

inline ConfigFile parse(std::istream& in)
{
    ConfigFile cfg;
    Section* current = &cfg.globals;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = trim(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = trim(line.substr(0, hash));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                fail(ErrorCategory::config, "line " + std::to_string(line_no) + ": malformed section header");
            const auto inner = trim(line.substr(1, line.size() - 2));
            const auto sp = inner.find_first_of(" \t");
            const std::string kind(inner.substr(0, sp));
            const std::string name(sp == std::string_view::npos ? std::string_view{} : trim(inner.substr(sp)));
            if (kind == "source") {
                if (name.empty())
                    fail(ErrorCategory::config, "line " + std::to_string(line_no) + ": [source] needs a name");
                cfg.sources.emplace_back("source", name, line_no);
                current = &cfg.sources.back();
            } else if (kind == "filters") {
                if (cfg.has_filters)
                    fail(ErrorCategory::config, "line " + std::to_string(line_no) + ": duplicate [filters]");
                cfg.has_filters = true;
                current = &cfg.filters;
            } else if (kind == "analysis") {
                if (cfg.has_analysis)
                    fail(ErrorCategory::config, "line " + std::to_string(line_no) + ": duplicate [analysis]");
                cfg.has_analysis = true;
                current = &cfg.analysis;
            } else {
                fail(ErrorCategory::config, "line " + std::to_string(line_no) + ": unknown section '" + kind + "'");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorCategory::config, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty())
            fail(ErrorCategory::config, "line " + std::to_string(line_no) + ": empty key");
        current->set(key, std::string(trim(line.substr(eq + 1))), line_no);
    }
    return cfg;
}

inline ConfigFile parse_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorCategory::io, "cannot open config '" + path + "'");
    return parse(in);
}

inline ConfigFile parse_string(const std::string& text)
{
    std::istringstream in(text);
    return parse(in);
}

inline geometry::ObservatoryConfig read_observatory(const Section& g)
{
    geometry::ObservatoryConfig o;
    o.longitude_east_deg = g.required_number("longitude_east_deg");
    o.latitude_deg = g.number("latitude_deg", o.latitude_deg);
    o.baseline_wavelengths = g.number("baseline_wavelengths", o.baseline_wavelengths);
    o.reference_freq_mhz = g.number("reference_freq_mhz", o.reference_freq_mhz);
    o.pointing_dec_deg = g.number("pointing_dec_deg", o.pointing_dec_deg);
    o.pointing_az_deg = g.number("pointing_az_deg", o.pointing_az_deg);
    o.element_fwhm_deg = g.number("element_fwhm_deg", o.element_fwhm_deg);
    o.instrumental_delay_ns = g.number("instrumental_delay_ns", o.instrumental_delay_ns);
    o.validate();
    return o;
}

inline simulator::SourceKind parse_kind(const Section& s)
{
    const auto k = s.required_text("kind");
    if (k == "celestial_pulse_pair")
        return simulator::SourceKind::celestial_pulse_pair;
    if (k == "terrestrial_rfi")
        return simulator::SourceKind::terrestrial_rfi;
    if (k == "natural_broadband")
        return simulator::SourceKind::natural_broadband;
    fail(ErrorCategory::config, "source '" + s.name() + "': unknown kind '" + k + "'");
}

inline simulator::SourceSpec read_source(const Section& s)
{
    simulator::SourceSpec src;
    src.name = s.name();
    src.kind = parse_kind(s);
    const bool sky = src.kind != simulator::SourceKind::terrestrial_rfi;
    if (sky)
        src.direction = geometry::SkyDirection(s.required_number("ra_hr"), s.required_number("dec_deg"));
    src.snr_db = s.number("snr_db", src.snr_db);
    src.cadence_per_hr = s.number("cadence_per_hr", src.cadence_per_hr);
    if (src.kind == simulator::SourceKind::natural_broadband) {
        src.flux_band_db = s.required_number("flux_band_db");
        return src;
    }
    src.f0_mhz = s.required_number("f0_mhz");
    src.df_hz = s.number("df_hz", src.df_hz);
    src.jitter_bins = static_cast<std::uint32_t>(s.integer("jitter_bins", 0));
    src.freq_offset_bins = s.number("freq_offset_bins", 0.0);
    if (src.kind == simulator::SourceKind::celestial_pulse_pair) {
        src.emit_lst_halfwidth_hr = s.number("emit_lst_halfwidth_hr", -1.0);
    } else {
        src.fixed_phase_rad = s.number("phase_rad", 0.0);
        src.random_phase = s.boolean("random_phase", false);
        src.bins_lit = static_cast<std::uint32_t>(s.integer("bins_lit", 1));
    }
    return src;
}

inline simulator::NoiseModel parse_noise_model(const std::string& s)
{
    if (s == "full")
        return simulator::NoiseModel::full;
    if (s == "sparse")
        return simulator::NoiseModel::sparse;
    fail(ErrorCategory::config, "noise_model must be 'full' or 'sparse', got '" + s + "'");
}

inline simulator::ScenarioConfig read_scenario(const ConfigFile& f)
{
    const auto& g = f.globals;
    simulator::ScenarioConfig c;
    c.obs = read_observatory(g);
    c.duration_days = g.required_number("duration_days");
    c.mjd_start = g.required_number("mjd_start");
    c.seed = g.integer("seed", c.seed);
    c.segments_mhz = g.number_list("segments_mhz");
    c.band_noise_floor_db = g.number("band_noise_floor_db", c.band_noise_floor_db);
    c.noise_power = g.number("noise_power", c.noise_power);
    c.awgn = g.boolean("awgn", c.awgn);
    c.noise_model = parse_noise_model(g.text("noise_model", "full"));
    c.threshold_db = g.number("threshold_db", c.threshold_db);
    c.noise_history = static_cast<std::size_t>(g.integer("noise_history", c.noise_history));
    for (const auto& s : f.sources)
        c.sources.push_back(read_source(s));
    simulator::validate(c);
    return c;
}

inline std::vector<secondlevel::FreqRange> parse_ranges(const Section& s, const std::string& key,
                                                         std::vector<secondlevel::FreqRange> fallback)
{
    if (!s.has(key))
        return fallback;
    // "1398-1424, 1426-1451"
    std::vector<secondlevel::FreqRange> out;
    std::stringstream ss(s.text(key, {}));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = std::string(trim(item));
        const auto dash = t.find('-', 1);
        if (dash == std::string::npos)
            fail(ErrorCategory::config, "key '" + key + "': expected min-max, got '" + t + "'");
        secondlevel::FreqRange r;
        r.min_mhz = std::stod(t.substr(0, dash));
        r.max_mhz = std::stod(t.substr(dash + 1));
        out.push_back(r);
    }
    return out;
}

inline secondlevel::FilterSet read_filters(const ConfigFile& f)
{
    const auto& s = f.filters;
    secondlevel::FilterSet fs;
    fs.df_min_hz = s.number("df_min_hz", fs.df_min_hz);
    fs.df_max_hz = s.number("df_max_hz", fs.df_max_hz);
    fs.ddf_phase_window_rad = s.number("ddf_phase_window_rad", fs.ddf_phase_window_rad);
    fs.pulse_phase_window_rad = s.number("pulse_phase_window_rad", fs.pulse_phase_window_rad);
    fs.llsnr_pulse_threshold = s.number("llsnr_pulse_threshold", fs.llsnr_pulse_threshold);
    fs.llsnr_pair_threshold = s.number("llsnr_pair_threshold", fs.llsnr_pair_threshold);
    fs.rfi_margin_segments = s.number("rfi_margin_segments", fs.rfi_margin_segments);
    fs.rfi_population_limit =
        static_cast<std::uint32_t>(s.integer("rfi_population_limit", fs.rfi_population_limit));
    fs.rfi_window_hours = s.number("rfi_window_hours", fs.rfi_window_hours);
    fs.freq_ranges = parse_ranges(s, "freq_ranges_mhz", fs.freq_ranges);
    fs.detection_threshold_db = s.number("detection_threshold_db", fs.detection_threshold_db);
    fs.ra_bins = static_cast<std::size_t>(s.integer("ra_bins", fs.ra_bins));
    fs.validate();
    return fs;
}

/// Stable 64-bit FNV-1a digest as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Canonical text of a parsed file: sections in order, keys sorted.
inline std::string canonical_text(const ConfigFile& f)
{
    std::string out;
    auto dump = [&](const Section& s, const std::string& header) {
        if (!header.empty())
            out += header + "\n";
        for (const auto& [k, v] : s.items())
            out += k + "=" + v + "\n";
    };
    dump(f.globals, "");
    for (const auto& s : f.sources)
        dump(s, "[source " + s.name() + "]");
    if (f.has_filters)
        dump(f.filters, "[filters]");
    if (f.has_analysis)
        dump(f.analysis, "[analysis]");
    return out;
}

inline std::string config_hash(const ConfigFile& f) { return fnv1a_hex(canonical_text(f)); }

} // namespace pairscope::config

#endif

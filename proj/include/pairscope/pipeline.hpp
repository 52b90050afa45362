#ifndef PAIRSCOPE_PIPELINE_HPP
#define PAIRSCOPE_PIPELINE_HPP

// Scenario -> first-level events, and the in-memory end-to-end pipeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <set>
#include <vector>

#include "constants.hpp"
#include "firstlevel.hpp"
#include "rng.hpp"
#include "secondlevel.hpp"
#include "simulator.hpp"
#include "types.hpp"

namespace pairscope::pipeline {

struct EpochEvents {
    std::uint64_t epoch = 0;
    double mjd = 0.0;
    std::vector<PulseEvent> events; // canonical order
};

/// Per-bin false-alarm probability for exponential power at `threshold_db`.
inline double null_exceedance(double threshold_db)
{
    return std::exp(-std::pow(10.0, threshold_db / 10.0));
}

/// One draw of estimate_segment_noise on a noise-only block of mean bin
/// power `power`. The two middle order statistics of 256 exponentials are
/// built from spacings: X(k) = sum_{i<=k} E_i / (n - i + 1).
inline double null_noise_estimate(Rng& rng, double power)
{
    constexpr std::size_t n = kBinsPerSegment;
    double x = 0.0;
    for (std::size_t i = 1; i <= n / 2; ++i)
        x += rng.exponential() / static_cast<double>(n - i + 1);
    const double upper = x + rng.exponential() / static_cast<double>(n - n / 2);
    return power * 0.5 * (x + upper) / std::numbers::ln2;
}

/// Produces first-level events for a scenario, epoch by epoch.
///
/// NoiseModel::full channelizes every block. NoiseModel::sparse synthesizes
/// and channelizes only the (segment, element) blocks that carry injected
/// tones; elsewhere detections are drawn directly from the null law (bin
/// exceedances as a Bernoulli(exp(-T)) sequence, excess power exponential,
/// phase uniform), which makes multi-week runs cheap.
class EventGenerator {
public:
    explicit EventGenerator(const simulator::Simulator& sim) : sim_(&sim) {}

    template <class Sink>
    void run(Sink&& sink) const
    {
        if (sim_->config().noise_model == simulator::NoiseModel::full)
            run_full(sink);
        else
            run_sparse(sink);
    }

    std::vector<PulseEvent> collect() const
    {
        std::vector<PulseEvent> all;
        run([&](const EpochEvents& ep) { all.insert(all.end(), ep.events.begin(), ep.events.end()); });
        return all;
    }

private:
    template <class Sink>
    void run_full(Sink& sink) const
    {
        const auto& cfg = sim_->config();
        firstlevel::FirstLevel fl(cfg.segments_mhz.size(), cfg.threshold_db, cfg.noise_history);
        const auto n = sim_->epoch_count();
        for (std::uint64_t e = 0; e < n; ++e) {
            const auto d = sim_->synthesize_epoch(e);
            EpochEvents out{e, d.mjd, {}};
            for (const auto& b : d.blocks)
                fl.process(b, d.band50_db[element_index(b.element)], out.events);
            std::sort(out.events.begin(), out.events.end(), canonical_less);
            sink(out);
        }
    }

    /// Detections from one fully synthesized block with a warmed noise tracker.
    /// Warm-up estimates are drawn from their exact null law instead of being
    /// channelized.
    void signal_block(std::uint64_t epoch, std::uint32_t seg, Element el,
                      std::span<const simulator::Tone> tones, double band50,
                      firstlevel::Channelizer& ch, std::vector<PulseEvent>& out) const
    {
        const auto& cfg = sim_->config();
        firstlevel::NoiseTracker tracker(cfg.noise_history);
        const double power = cfg.noise_power * (1.0 + sim_->broadband_fraction(sim_->epoch_lst(epoch)));
        Rng warm(derive_seed(cfg.seed, {stream_tag::warmup, epoch, seg, element_index(el)}));
        for (std::size_t j = 1; j < cfg.noise_history; ++j)
            tracker.update(null_noise_estimate(warm, power));
        auto block = sim_->noise_block(epoch, seg, el);
        for (const auto& t : tones)
            if (t.segment == seg)
                simulator::add_tone(block, t);
        const auto spectrum = ch(block);
        const double noise =
            tracker.update(firstlevel::estimate_segment_noise(firstlevel::bin_powers(spectrum)));
        const firstlevel::BlockContext ctx{block.mjd, el, seg, block.segment_center_mhz, band50};
        auto ev = firstlevel::detect_pulses(spectrum, noise, ctx, cfg.threshold_db);
        out.insert(out.end(), ev.begin(), ev.end());
    }

    template <class Sink>
    void run_sparse(Sink& sink) const
    {
        const auto& cfg = sim_->config();
        const auto n_seg = static_cast<std::uint32_t>(cfg.segments_mhz.size());
        const double p = null_exceedance(cfg.threshold_db);
        const double t_lin = std::pow(10.0, cfg.threshold_db / 10.0);
        const std::uint64_t bins = kBinsPerSegment;

        struct Stream {
            Rng rng;
            std::uint64_t next; // flattened epoch * 256 + bin
        };
        std::vector<Stream> streams;
        for (std::uint32_t s = 0; s < n_seg; ++s)
            for (auto el : kElements) {
                Rng rng(derive_seed(cfg.seed, {stream_tag::sparse_noise, s, element_index(el)}));
                const auto first = rng.geometric(p);
                streams.push_back({rng, first});
            }

        firstlevel::Channelizer ch;
        const auto n = sim_->epoch_count();
        const auto& sched = sim_->schedule();
        auto sched_it = sched.begin();
        for (std::uint64_t e = 0; e < n; ++e) {
            while (sched_it != sched.end() && sched_it->first < e)
                ++sched_it;
            const bool has_signal = sched_it != sched.end() && sched_it->first == e;
            const std::uint64_t end_index = (e + 1) * bins;
            bool any_noise = false;
            for (const auto& st : streams)
                any_noise = any_noise || st.next < end_index;
            if (!has_signal && !any_noise)
                continue;

            std::vector<simulator::Tone> tones;
            std::set<std::uint32_t> signal_segments;
            if (has_signal) {
                tones = sim_->epoch_tones(e);
                for (const auto& t : tones)
                    signal_segments.insert(t.segment);
            }
            const double lst = sim_->epoch_lst(e);
            const double noise_db =
                firstlevel::to_db(cfg.noise_power * (1.0 + sim_->broadband_fraction(lst)));
            std::array<double, 2> band{};
            std::array<bool, 2> band_ready{};
            auto band_for = [&](Element el) {
                const auto i = element_index(el);
                if (!band_ready[i]) {
                    band[i] = sim_->band_power(e, el, tones);
                    band_ready[i] = true;
                }
                return band[i];
            };

            EpochEvents out{e, sim_->epoch_mjd(e), {}};
            for (std::uint32_t s = 0; s < n_seg; ++s)
                for (auto el : kElements) {
                    auto& st = streams[s * 2 + element_index(el)];
                    const bool synthesize = signal_segments.count(s) != 0;
                    while (st.next < end_index) {
                        if (!synthesize) {
                            PulseEvent ev;
                            ev.mjd = out.mjd;
                            ev.element = el;
                            ev.segment_index = s;
                            ev.bin_index = static_cast<std::uint32_t>(st.next % bins);
                            ev.rf_freq_hz = bin_frequency_hz(cfg.segments_mhz[s], ev.bin_index);
                            ev.snr_db = firstlevel::to_db(t_lin + st.rng.exponential());
                            ev.phase_rad = st.rng.phase();
                            ev.seg_noise_db = noise_db;
                            ev.band50_db = band_for(el);
                            out.events.push_back(ev);
                        }
                        const auto gap = st.rng.geometric(p);
                        st.next = gap >= UINT64_MAX - st.next ? UINT64_MAX : st.next + 1 + gap;
                    }
                    if (synthesize)
                        signal_block(e, s, el, tones, band_for(el), ch, out.events);
                }
            std::sort(out.events.begin(), out.events.end(), canonical_less);
            sink(out);
        }
    }

    const simulator::Simulator* sim_;
};

/// Runs the simulator through first- and second-level processing in memory.
inline secondlevel::FilterResult run_in_memory(const simulator::Simulator& sim,
                                               const secondlevel::FilterSet& fs)
{
    secondlevel::SecondLevel sl(fs, sim.config().obs);
    EventGenerator(sim).run([&](const EpochEvents& ep) { sl.add_epoch(ep.events); });
    sl.finish();
    return sl.result();
}

} // namespace pairscope::pipeline

#endif

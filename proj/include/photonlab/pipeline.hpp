#pragma once

// Glue between a Scenario and the run products: streamed window counts,
// tag files, source-rate estimates, click histograms, and target waveforms
// for the shaped-readout demos. Everything here streams; nothing holds a
// full click record in memory.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"

namespace photonlab {

// run the scenario and fold every trial into the two analysis windows
inline RunWindowCounts simulate_counts(const Scenario& s, int max_sep = 8) {
    TrialContext ctx = build_trial_context(s);
    WindowAccumulator a_in(s.windows.input_lo, s.windows.input_hi, max_sep);
    WindowAccumulator a_st(s.windows.stored_lo, s.windows.stored_hi, max_sep);
    const double in_lo = s.windows.input_lo, in_hi = s.windows.input_hi;
    const double st_lo = s.windows.stored_lo, st_hi = s.windows.stored_hi;
    run_trials(ctx, s.run.trials, s.run.seed,
               [&](uint64_t, const std::vector<ClickEvent>& ev) {
                   uint32_t ni[2] = {0, 0}, ns[2] = {0, 0};
                   for (const ClickEvent& c : ev) {
                       const int ch = (c.channel == CH_D1) ? 0 : 1;
                       if (c.t >= in_lo && c.t < in_hi) ++ni[ch];
                       else if (c.t >= st_lo && c.t < st_hi) ++ns[ch];
                   }
                   a_in.add_trial_counts(ni[0], ni[1]);
                   a_st.add_trial_counts(ns[0], ns[1]);
               });
    RunWindowCounts out;
    out.input = a_in.finalize();
    out.stored = a_st.finalize();
    return out;
}

// stream the scenario into a tag file; the bytes match what writing the
// equivalent in-memory dataset would produce
inline uint64_t simulate_to_file(const Scenario& s, const std::string& path) {
    if (s.run.trials > 0xffffffffull)
        throw ConfigError("config: run.trials exceeds the tag format's trial index range");
    TrialContext ctx = build_trial_context(s);
    const uint64_t period_ps = uint64_t(std::llround(s.windows.trial_period * 1e12));
    TagWriter w(path, s.run.kind, period_ps, s.run.trials, config_hash(s));
    run_trials(ctx, s.run.trials, s.run.seed,
               [&](uint64_t trial, const std::vector<ClickEvent>& ev) {
                   const uint64_t base = trial * period_ps;
                   w.add({base, uint32_t(trial), CH_TRIGGER});
                   for (const ClickEvent& c : ev) {
                       uint64_t ts = base + uint64_t(std::llround(c.t * 1e12));
                       if (ts >= base + period_ps) ts = base + period_ps - 1;
                       w.add({ts, uint32_t(trial), c.channel});
                   }
               });
    w.close();
    return w.n_records();
}

// per-trial histogram of click times over the trial period
inline std::vector<uint64_t> click_histogram(const Scenario& s, double bin_width) {
    if (!(bin_width > 0)) throw PreconditionError("click_histogram: bin_width must be > 0");
    const size_t nb = size_t(std::ceil(s.windows.trial_period / bin_width));
    std::vector<uint64_t> h(nb, 0);
    TrialContext ctx = build_trial_context(s);
    run_trials(ctx, s.run.trials, s.run.seed,
               [&](uint64_t, const std::vector<ClickEvent>& ev) {
                   for (const ClickEvent& c : ev) {
                       size_t b = size_t(c.t / bin_width);
                       if (b >= nb) b = nb - 1;
                       ++h[b];
                   }
               });
    return h;
}

struct SourceEstimate {
    ValueWithError p_gen;
    ValueWithError g2_0;
};

// fraction of the input waveform's energy that the input analysis window
// accepts; photons in the tails arrive outside it and are not counted
inline double input_window_acceptance(const Scenario& s) {
    return make_envelope(s).energy_in_window(s.windows.input_lo, s.windows.input_hi);
}

// per-photon probability that an emitted photon produces a click inside the
// input window of an input-only run
inline double input_alpha(const Scenario& s) {
    return s.detection.source_to_memory * s.detection.detector_efficiency *
           input_window_acceptance(s);
}

// invert the windowed click rate of an input-only run for the generation
// rate. p_gen is the mean photon number per trial (pi1 + 2*pi2 with
// pi2 = g2*p^2/2), so with per-photon click probability a the any-click
// probability of one trial is
//   p_any = a*p - pi2*a^2 = a*p - g2*p^2*a^2/2
// and p follows from the smaller quadratic root once g2 is known from the
// coincidence rate.
inline SourceEstimate estimate_source(const WindowedCounts& c, double alpha,
                                      double dark_any_prob = 0.0) {
    if (!(alpha > 0) || alpha > 1)
        throw PreconditionError("estimate_source: alpha must be in (0, 1]");
    SourceEstimate est;
    est.g2_0 = g2_of_n(c, 0);
    ValueWithError p_any = detail::binom(c.trials_any, c.n_trials);
    p_any.value -= dark_any_prob;
    if (p_any.value < 0) p_any.value = 0;

    const double g2 = est.g2_0.value;
    double p, slope;
    const double disc = 1.0 - 2.0 * g2 * p_any.value;
    if (g2 < 1e-9 || disc <= 0) {
        p = p_any.value / alpha;
        slope = 1.0 / alpha;
    } else {
        p = (1.0 - std::sqrt(disc)) / (g2 * alpha);
        slope = 1.0 / (alpha * std::sqrt(disc));
    }
    est.p_gen.value = p;
    est.p_gen.error = p_any.error * slope;
    return est;
}

// sha256 of a file's bytes, streamed
inline std::string file_sha256(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    Sha256 h;
    std::vector<char> buf(1 << 20);
    while (f) {
        f.read(buf.data(), std::streamsize(buf.size()));
        const std::streamsize got = f.gcount();
        if (got > 0) h.update(buf.data(), size_t(got));
    }
    return Sha256::hex(h.finalize());
}

// --- target waveforms for shaped readout -----------------------------------

// intensity of the standard input waveshape with its peak moved to peak_t
inline std::vector<double> envelope_target(const WaveshapeParams& p, double t0, double dt,
                                           size_t n, double peak_t) {
    std::vector<double> out(n);
    const double shift = peak_t - p.peak_time;
    for (size_t i = 0; i < n; ++i) {
        const double a = input_envelope(p, t0 + double(i) * dt - shift);
        out[i] = a * a;
    }
    return out;
}

// two flat bins of different height, zero elsewhere
inline std::vector<double> twobin_target(double t0, double dt, size_t n, double lo1, double hi1,
                                         double lo2, double hi2, double h2) {
    std::vector<double> out(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const double t = t0 + double(i) * dt;
        if (t >= lo1 && t < hi1) out[i] = 1.0;
        else if (t >= lo2 && t < hi2) out[i] = h2;
    }
    return out;
}

} // namespace photonlab

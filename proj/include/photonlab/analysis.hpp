#pragma once

// Figures of merit from click streams or tag datasets: windowed detection
// probabilities, the trial-separation correlation g2(n), memory efficiencies
// with background subtraction, SNR, mu1, s/t, survival, and the noise-mixing
// prediction for g2 of a retrieved photon.
//
// Coincidence convention: a trial "fires" a detector when it has >= 1 count
// in the window; c12(n) pairs D1 firing in trial k with D2 firing in trial
// k+n, symmetrized over channel order for n >= 1. Multi-count trials count
// once. g2(n) = c12(n) / (p1*p2).
//
// The accumulator is streaming: feed every trial in order (empty ones too,
// they carry separation information) and it holds O(max_sep) state, so
// billion-trial runs never materialize their clicks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "common.hpp"
#include "detection.hpp"
#include "timetag.hpp"

namespace photonlab {

struct ValueWithError {
    double value = 0;
    double error = 0;
};

struct WindowedCounts {
    uint64_t n_trials = 0;
    uint64_t trials_d1 = 0;    // trials with >= 1 count on D1 in the window
    uint64_t trials_d2 = 0;
    uint64_t trials_any = 0;   // >= 1 count on either detector
    uint64_t count_sum = 0;    // raw count total over both detectors (rate estimator)
    std::map<int, uint64_t> c12_raw; // n -> symmetrized coincidence count

    double p1() const { return n_trials ? double(trials_d1) / double(n_trials) : 0.0; }
    double p2() const { return n_trials ? double(trials_d2) / double(n_trials) : 0.0; }
    double p_any() const { return n_trials ? double(trials_any) / double(n_trials) : 0.0; }
    double rate() const { return n_trials ? double(count_sum) / double(n_trials) : 0.0; }

    // number of (ordered, symmetrized) pairs entering c12(n)
    double pairs(int n) const {
        if (n == 0) return double(n_trials);
        return 2.0 * double(n_trials > uint64_t(n) ? n_trials - uint64_t(n) : 0);
    }
    double c12(int n) const {
        auto it = c12_raw.find(n);
        if (it == c12_raw.end()) throw PreconditionError("c12: separation not accumulated");
        const double np = pairs(n);
        return np > 0 ? double(it->second) / np : 0.0;
    }
};

class WindowAccumulator {
  public:
    WindowAccumulator() = default;
    WindowAccumulator(double lo, double hi, int max_sep = 8) : lo_(lo), hi_(hi), max_sep_(max_sep) {
        if (!(hi > lo)) throw PreconditionError("window accumulator: empty window");
        if (max_sep < 0 || max_sep > RING - 1)
            throw PreconditionError("window accumulator: max_sep out of range");
    }

    void add_trial(const std::vector<ClickEvent>& clicks) {
        uint32_t n1 = 0, n2 = 0;
        for (const ClickEvent& c : clicks) {
            if (c.t < lo_ || c.t >= hi_) continue;
            if (c.channel == CH_D1) ++n1;
            else if (c.channel == CH_D2) ++n2;
        }
        add_trial_counts(n1, n2);
    }

    // same accounting when counts in the window are already known
    void add_trial_counts(uint32_t n1, uint32_t n2) {
        const uint8_t b1 = n1 > 0, b2 = n2 > 0;
        counts_.n_trials++;
        if (b1 || b2) {
            counts_.trials_d1 += b1;
            counts_.trials_d2 += b2;
            counts_.trials_any++;
            counts_.count_sum += n1 + n2;
            if (b1 && b2) coinc_[0]++;
            const uint64_t t = counts_.n_trials - 1; // index of this trial
            for (int n = 1; n <= max_sep_ && uint64_t(n) <= t; ++n) {
                const size_t j = (t - uint64_t(n)) & (RING - 1);
                coinc_[n] += uint64_t(b1) * ring2_[j] + uint64_t(b2) * ring1_[j];
            }
        }
        const size_t i = (counts_.n_trials - 1) & (RING - 1);
        ring1_[i] = b1;
        ring2_[i] = b2;
    }

    WindowedCounts finalize() const {
        WindowedCounts out = counts_;
        for (int n = 0; n <= max_sep_; ++n) out.c12_raw[n] = coinc_[n];
        return out;
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }

  private:
    static constexpr size_t RING = 16;
    double lo_ = 0, hi_ = 0;
    int max_sep_ = 8;
    WindowedCounts counts_;
    uint64_t coinc_[RING] = {};
    uint8_t ring1_[RING] = {};
    uint8_t ring2_[RING] = {};
};

// windowed counts from a tag dataset; window is in seconds relative to the
// trial trigger
inline WindowedCounts window_counts(const TimeTagDataset& ds, double lo, double hi,
                                    int max_sep = 8) {
    if (hi * 1e12 > double(ds.trial_period_ps) || lo < 0)
        throw PreconditionError("window_counts: window outside the trial period");
    WindowAccumulator acc(lo, hi, max_sep);
    const uint64_t lo_ps = uint64_t(std::llround(lo * 1e12));
    const uint64_t hi_ps = uint64_t(std::llround(hi * 1e12));
    uint64_t trial = 0;
    uint32_t n1 = 0, n2 = 0;
    for (const TagRecord& r : ds.records) {
        if (r.trial_index != trial) {
            acc.add_trial_counts(n1, n2);
            n1 = n2 = 0;
            for (uint64_t t = trial + 1; t < r.trial_index; ++t) acc.add_trial_counts(0, 0);
            trial = r.trial_index;
        }
        if (r.channel == CH_TRIGGER) continue;
        const uint64_t rel = r.timestamp_ps - uint64_t(r.trial_index) * ds.trial_period_ps;
        if (rel < lo_ps || rel >= hi_ps) continue;
        if (r.channel == CH_D1) ++n1;
        else ++n2;
    }
    if (ds.n_trials > 0) {
        acc.add_trial_counts(n1, n2); // the trial currently being collected
        for (uint64_t t = trial + 1; t < ds.n_trials; ++t) acc.add_trial_counts(0, 0);
    }
    WindowedCounts out = acc.finalize();
    if (out.n_trials != ds.n_trials)
        throw PreconditionError("window_counts: trial bookkeeping mismatch");
    return out;
}

inline ValueWithError g2_of_n(const WindowedCounts& w, int n) {
    const double p1 = w.p1(), p2 = w.p2();
    if (!(p1 > 0) || !(p2 > 0))
        throw PreconditionError("g2_of_n: a detector never fired in this window");
    const double c = w.c12(n);
    ValueWithError out;
    out.value = c / (p1 * p2);
    const double c_raw = double(w.c12_raw.at(n));
    if (c_raw > 0 && w.trials_d1 > 0 && w.trials_d2 > 0)
        out.error = out.value * std::sqrt(1.0 / c_raw + 1.0 / double(w.trials_d1) +
                                          1.0 / double(w.trials_d2));
    else
        out.error = out.value > 0 ? out.value : 1.0 / std::max<double>(1.0, double(w.n_trials));
    return out;
}

// prediction for the g2 of a signal mixed with uncorrelated noise at a given
// signal-to-noise ratio s: (s^2 g2 + 2 s + 1) / (s + 1)^2
inline double noise_mixed_g2(double g2_in, double snr) {
    if (snr < 0) throw PreconditionError("noise_mixed_g2: snr must be >= 0");
    if (g2_in < 0) throw PreconditionError("noise_mixed_g2: g2_in must be >= 0");
    const double s = snr;
    return (s * s * g2_in + 2.0 * s + 1.0) / ((s + 1.0) * (s + 1.0));
}

struct RunWindowCounts {
    WindowedCounts input;  // the 300 ns input window
    WindowedCounts stored; // the 100 ns retrieval window
};

inline RunWindowCounts analyze_run(const TimeTagDataset& ds, const WindowConfig& w,
                                   int max_sep = 8) {
    RunWindowCounts out;
    out.input = window_counts(ds, w.input_lo, w.input_hi, max_sep);
    out.stored = window_counts(ds, w.stored_lo, w.stored_hi, max_sep);
    return out;
}

struct TagFileCounts {
    TagFileHeader header;
    RunWindowCounts counts;
};

// one pass over a tag file, both analysis windows at once; binary files
// stream batch by batch, CSV mirrors load whole (they are the small format)
inline TagFileCounts analyze_tag_file(const std::string& path, const WindowConfig& w,
                                      int max_sep = 8) {
    TagFileCounts out;
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
        TimeTagDataset ds = read_tags_csv(path);
        out.header.run_kind = ds.kind;
        out.header.trial_period_ps = ds.trial_period_ps;
        out.header.n_records = ds.records.size();
        out.header.n_trials = ds.n_trials;
        out.header.config_hash = ds.config_hash;
        out.counts = analyze_run(ds, w, max_sep);
        return out;
    }

    TagReader reader(path);
    out.header = reader.header();
    const uint64_t period = out.header.trial_period_ps;
    if (w.stored_hi * 1e12 > double(period) || w.input_hi * 1e12 > double(period))
        throw PreconditionError("analyze: analysis windows exceed the file's trial period");

    WindowAccumulator a_in(w.input_lo, w.input_hi, max_sep);
    WindowAccumulator a_st(w.stored_lo, w.stored_hi, max_sep);
    const uint64_t in_lo = uint64_t(std::llround(w.input_lo * 1e12));
    const uint64_t in_hi = uint64_t(std::llround(w.input_hi * 1e12));
    const uint64_t st_lo = uint64_t(std::llround(w.stored_lo * 1e12));
    const uint64_t st_hi = uint64_t(std::llround(w.stored_hi * 1e12));

    uint64_t trial = 0;
    uint32_t n_in[2] = {0, 0}, n_st[2] = {0, 0};
    auto close_trial = [&]() {
        a_in.add_trial_counts(n_in[0], n_in[1]);
        a_st.add_trial_counts(n_st[0], n_st[1]);
        n_in[0] = n_in[1] = n_st[0] = n_st[1] = 0;
    };

    std::vector<TagRecord> batch;
    bool any = false;
    while (reader.next_batch(batch)) {
        for (const TagRecord& r : batch) {
            any = true;
            if (r.trial_index != trial) {
                close_trial();
                for (uint64_t t = trial + 1; t < r.trial_index; ++t) close_trial();
                trial = r.trial_index;
            }
            if (r.channel == CH_TRIGGER) continue;
            const uint64_t rel = r.timestamp_ps - uint64_t(r.trial_index) * period;
            const int ch = (r.channel == CH_D1) ? 0 : 1;
            if (rel >= in_lo && rel < in_hi) ++n_in[ch];
            else if (rel >= st_lo && rel < st_hi) ++n_st[ch];
        }
        batch.clear();
    }
    if (out.header.n_trials > 0) {
        close_trial();
        for (uint64_t t = trial + 1; t < out.header.n_trials; ++t) close_trial();
    }
    (void)any;
    out.counts.input = a_in.finalize();
    out.counts.stored = a_st.finalize();
    if (out.counts.input.n_trials != out.header.n_trials)
        throw ParseError("records claim trial beyond declared n_trials",
                         TAG_HEADER_SIZE + out.header.n_records * TAG_RECORD_SIZE);
    return out;
}

struct MemoryFigures {
    ValueWithError p_in;   // background-subtracted input probability
    ValueWithError p_t;    // background-subtracted transmitted probability
    ValueWithError p_s;    // background-subtracted stored probability
    ValueWithError p_n;    // noise probability in the stored window
    double p_s_raw = 0;
    ValueWithError eta_wr, eta_w, eta_r;
    ValueWithError snr;    // raw stored counts over noise counts
    ValueWithError mu1;    // noise per retrieved photon
    ValueWithError s_over_t, survival;
    bool clamped = false;  // a negative background-subtracted value was clamped to 0
};

namespace detail {

inline ValueWithError binom(uint64_t k, uint64_t n) {
    ValueWithError v;
    if (n == 0) return v;
    v.value = double(k) / double(n);
    v.error = std::sqrt(std::max(v.value * (1.0 - v.value), 1.0 / double(n)) / double(n));
    return v;
}

inline ValueWithError subtract(ValueWithError a, ValueWithError b, bool& clamped) {
    ValueWithError v;
    v.value = a.value - b.value;
    v.error = std::hypot(a.error, b.error);
    if (v.value < 0) {
        v.value = 0;
        clamped = true;
    }
    return v;
}

inline ValueWithError ratio(ValueWithError num, ValueWithError den) {
    ValueWithError v;
    if (den.value <= 0 || num.value < 0) {
        v.value = std::numeric_limits<double>::quiet_NaN();
        v.error = std::numeric_limits<double>::quiet_NaN();
        return v;
    }
    v.value = num.value / den.value;
    // first-order propagation in a form that stays finite at num == 0
    v.error = std::hypot(num.error / den.value, v.value * den.error / den.value);
    return v;
}

} // namespace detail

// the trio: an input reference run, a storage run, and a noise run that share
// the physics config
inline MemoryFigures memory_figures(const RunWindowCounts& input_run,
                                    const RunWindowCounts& storage_run,
                                    const RunWindowCounts& noise_run) {
    using detail::binom;
    MemoryFigures f;

    const ValueWithError p_in_raw = binom(input_run.input.trials_any, input_run.input.n_trials);
    const ValueWithError p_t_raw = binom(storage_run.input.trials_any, storage_run.input.n_trials);
    const ValueWithError p_s_raw = binom(storage_run.stored.trials_any, storage_run.stored.n_trials);
    const ValueWithError bg_input = binom(noise_run.input.trials_any, noise_run.input.n_trials);
    f.p_n = binom(noise_run.stored.trials_any, noise_run.stored.n_trials);
    f.p_s_raw = p_s_raw.value;

    f.p_in = detail::subtract(p_in_raw, bg_input, f.clamped);
    f.p_t = detail::subtract(p_t_raw, bg_input, f.clamped);
    f.p_s = detail::subtract(p_s_raw, f.p_n, f.clamped);

    f.eta_wr = detail::ratio(f.p_s, f.p_in);
    ValueWithError gap;
    bool gap_clamped = false;
    gap = detail::subtract(f.p_in, f.p_t, gap_clamped);
    f.eta_w = detail::ratio(gap, f.p_in);
    f.eta_r = detail::ratio(f.eta_wr, f.eta_w);
    f.snr = detail::ratio(p_s_raw, f.p_n);
    f.mu1 = detail::ratio(f.p_n, f.eta_wr);
    f.s_over_t = detail::ratio(f.p_s, f.p_t);
    ValueWithError surv_num;
    surv_num.value = f.p_s.value + f.p_t.value;
    surv_num.error = std::hypot(f.p_s.error, f.p_t.error);
    f.survival = detail::ratio(surv_num, f.p_in);
    return f;
}

// a figure set is degenerate when the write efficiency cannot be formed:
// nothing left the input window, or the input run and storage run look the
// same (e.g. the same file was passed for both)
inline bool degenerate(const MemoryFigures& f) {
    if (!(f.p_in.value > 0.0)) return true;
    if (!std::isfinite(f.eta_w.value) || f.eta_w.value <= 0.0) return true;
    return false;
}

} // namespace photonlab

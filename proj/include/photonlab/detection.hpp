#pragma once

// Stochastic model of everything between the source output and detector
// clicks: passive loss, the memory insertion, HBT splitting, detector
// efficiency, dark counts, and the lumped control-leakage noise floor.
//
// Reference planes: `stages` is the named passive budget used by
// chain_transmission (bookkeeping and documentation); simulated runs use the
// aggregate source_to_memory / post_memory / detector_efficiency numbers so
// the reference plane of each preset is explicit. The noise floor is a
// measured per-trial probability at the detector plane and is therefore not
// attenuated by detector_efficiency.
//
// Every trial is a pure function of (context, master_seed, trial_index); the
// draw order inside a trial is part of the reproducibility contract:
// emission count -> per-photon fate in emission order (survival, branch,
// arrival time, HBT arm) -> noise count -> noise times/arms -> darks on D1 ->
// darks on D2.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "envelope.hpp"
#include "raman.hpp"
#include "rng.hpp"
#include "source_model.hpp"
#include "timetag.hpp"

namespace photonlab {

struct DetectionStage {
    std::string name;
    double transmission = 1.0;
};

inline double chain_transmission(const std::vector<DetectionStage>& stages) {
    double p = 1.0;
    for (const DetectionStage& s : stages) {
        if (!(s.transmission > 0) || s.transmission > 1)
            throw ConfigError("detection: stage '" + s.name + "' transmission must be in (0, 1]");
        p *= s.transmission;
    }
    return p;
}

struct DetectionConfig {
    std::vector<DetectionStage> stages; // named passive budget, see chain_transmission
    double source_to_memory = 0.22;     // aggregate transmission source -> memory input
    double post_memory = 1.0;           // memory output -> detectors
    double detector_efficiency = 0.85;
    double dark_rate_hz = 3.0;            // per detector
    double filter_suppression_db = 43.4;  // recorded constant; the lumped noise floor
                                          // already reflects it

    void validate() const {
        (void)chain_transmission(stages);
        for (double v : {source_to_memory, post_memory, detector_efficiency})
            if (!(v > 0) || v > 1)
                throw ConfigError("detection: transmissions must be in (0, 1]");
        if (dark_rate_hz < 0) throw ConfigError("detection: dark_rate_hz must be >= 0");
    }
};

struct WindowConfig {
    double input_lo = 350e-9, input_hi = 650e-9;    // 300 ns detection window
    double stored_lo = 1715e-9, stored_hi = 1815e-9; // 100 ns retrieval window
    double trial_period = 4e-6;

    void validate() const {
        if (!(input_lo < input_hi) || !(stored_lo < stored_hi))
            throw ConfigError("windows: empty window");
        if (input_hi > stored_lo && stored_hi > input_lo)
            throw ConfigError("windows: input and stored windows overlap");
        if (input_lo < 0 || stored_lo < 0 || input_hi > trial_period || stored_hi > trial_period)
            throw ConfigError("windows: window outside the trial period");
    }
};

struct NoiseConfig {
    double p_noise_per_trial = 2.3e-4; // stored-window noise probability, detector plane
    void validate() const {
        if (p_noise_per_trial < 0 || p_noise_per_trial > 0.5)
            throw ConfigError("noise: p_noise_per_trial out of range");
    }
};

// memory action reduced to per-photon fate probabilities plus arrival-time
// samplers for the two surviving branches
struct MemoryResponse {
    double stored_prob = 0;      // end-to-end efficiency into the retrieved mode
    double transmitted_prob = 0; // leaked past the memory during write
    ArrivalSampler stored_times;
    ArrivalSampler transmitted_times;
};

inline MemoryResponse build_memory_response(const SampledEnvelope& e_in, const ControlPulse& write,
                                            const ControlPulse& read, double t_store,
                                            double read_span, const MemoryConfig& cfg) {
    StorageSolution sol = run_storage(e_in, write, read, t_store, read_span, cfg);
    MemoryResponse r;
    r.stored_prob = sol.eta_wr;
    r.transmitted_prob = sol.write.transmitted;
    r.stored_times = ArrivalSampler(sol.read.t0, sol.read.dt, sol.read.output_intensity);
    r.transmitted_times =
        ArrivalSampler(sol.write.t0, sol.write.dt, sol.write.transmitted_intensity);
    return r;
}

struct ClickEvent {
    double t = 0; // seconds from the trial trigger
    uint8_t channel = CH_D1;
};

// immutable per-run state shared by every trial
struct TrialContext {
    RunKind kind = RunKind::input_only;
    EmissionDistribution emission;
    ArrivalSampler input_times;
    MemoryResponse memory; // storage runs only
    double p_survive_input = 0;  // input_only: source -> detector
    double p_pre_memory = 0;     // storage: source -> memory input
    double p_post_memory = 0;    // storage: memory output -> click
    double p_noise = 0;
    double exp_neg_noise = 1;
    double dark_lambda = 0; // per detector per trial
    double exp_neg_dark = 1;
    WindowConfig windows;
};

inline TrialContext make_trial_context(RunKind kind, const EmissionDistribution& emission,
                                       const ArrivalSampler& input_times,
                                       const MemoryResponse& memory, const DetectionConfig& det,
                                       const WindowConfig& windows, const NoiseConfig& noise) {
    det.validate();
    windows.validate();
    noise.validate();
    TrialContext ctx;
    ctx.kind = kind;
    ctx.emission = emission;
    ctx.input_times = input_times;
    ctx.memory = memory;
    ctx.p_survive_input = det.source_to_memory * det.post_memory * det.detector_efficiency;
    ctx.p_pre_memory = det.source_to_memory;
    ctx.p_post_memory = det.post_memory * det.detector_efficiency;
    ctx.p_noise = (kind == RunKind::input_only) ? 0.0 : noise.p_noise_per_trial;
    ctx.exp_neg_noise = std::exp(-ctx.p_noise);
    ctx.dark_lambda = det.dark_rate_hz * windows.trial_period;
    ctx.exp_neg_dark = std::exp(-ctx.dark_lambda);
    ctx.windows = windows;
    if (kind == RunKind::storage && !(memory.stored_prob >= 0 && memory.transmitted_prob >= 0 &&
                                      memory.stored_prob + memory.transmitted_prob <= 1.0 + 1e-9))
        throw PreconditionError("trial context: memory fate probabilities are inconsistent");
    return ctx;
}

inline void generate_trial(const TrialContext& ctx, uint64_t master_seed, uint64_t trial_index,
                           std::vector<ClickEvent>& out) {
    Rng rng = Rng::for_trial(master_seed, trial_index);

    const int n = (ctx.kind == RunKind::noise_only) ? 0 : sample_trial(ctx.emission, rng);

    for (int i = 0; i < n; ++i) {
        if (ctx.kind == RunKind::input_only) {
            if (!rng.bernoulli(ctx.p_survive_input)) continue;
            const double t = ctx.input_times.sample(rng);
            out.push_back({t, rng.bernoulli(0.5) ? CH_D1 : CH_D2});
        } else { // storage
            if (!rng.bernoulli(ctx.p_pre_memory)) continue;
            const double u = rng.uniform();
            if (u < ctx.memory.stored_prob) {
                if (!rng.bernoulli(ctx.p_post_memory)) continue;
                const double t = ctx.memory.stored_times.sample(rng);
                out.push_back({t, rng.bernoulli(0.5) ? CH_D1 : CH_D2});
            } else if (u < ctx.memory.stored_prob + ctx.memory.transmitted_prob) {
                if (!rng.bernoulli(ctx.p_post_memory)) continue;
                const double t = ctx.memory.transmitted_times.sample(rng);
                out.push_back({t, rng.bernoulli(0.5) ? CH_D1 : CH_D2});
            } // else scattered inside the medium
        }
    }

    if (ctx.p_noise > 0) {
        const int k = rng.poisson_with_limit(ctx.exp_neg_noise);
        for (int i = 0; i < k; ++i) {
            const double t = rng.uniform(ctx.windows.stored_lo, ctx.windows.stored_hi);
            out.push_back({t, rng.bernoulli(0.5) ? CH_D1 : CH_D2});
        }
    }

    for (uint8_t ch : {CH_D1, CH_D2}) {
        const int k = rng.poisson_with_limit(ctx.exp_neg_dark);
        for (int i = 0; i < k; ++i)
            out.push_back({rng.uniform(0.0, ctx.windows.trial_period), ch});
    }

    std::sort(out.begin(), out.end(),
              [](const ClickEvent& a, const ClickEvent& b) { return a.t < b.t; });
}

// drives the per-trial generator and hands each trial to a sink:
// sink(trial_index, const std::vector<ClickEvent>&)
template <typename Sink>
void run_trials(const TrialContext& ctx, uint64_t n_trials, uint64_t master_seed, Sink&& sink) {
    std::vector<ClickEvent> scratch;
    scratch.reserve(8);
    for (uint64_t trial = 0; trial < n_trials; ++trial) {
        scratch.clear();
        generate_trial(ctx, master_seed, trial, scratch);
        sink(trial, scratch);
    }
}

inline TimeTagDataset make_dataset(const TrialContext& ctx, uint64_t n_trials,
                                   uint64_t master_seed,
                                   const std::array<uint8_t, 32>& config_hash) {
    TimeTagDataset ds;
    ds.kind = ctx.kind;
    ds.trial_period_ps = uint64_t(std::llround(ctx.windows.trial_period * 1e12));
    ds.n_trials = n_trials;
    ds.config_hash = config_hash;
    ds.records.reserve(size_t(n_trials) + size_t(n_trials) / 16);
    run_trials(ctx, n_trials, master_seed, [&](uint64_t trial, const std::vector<ClickEvent>& ev) {
        const uint64_t base = trial * ds.trial_period_ps;
        ds.records.push_back({base, uint32_t(trial), CH_TRIGGER});
        for (const ClickEvent& c : ev) {
            uint64_t ts = base + uint64_t(std::llround(c.t * 1e12));
            if (ts >= base + ds.trial_period_ps) ts = base + ds.trial_period_ps - 1;
            ds.records.push_back({ts, uint32_t(trial), c.channel});
        }
    });
    return ds;
}

// drops each detection record with probability 1 - keep_prob (triggers kept);
// models extra passive loss downstream of the HBT splitter
inline TimeTagDataset thin_photons(const TimeTagDataset& in, double keep_prob, uint64_t seed) {
    if (!(keep_prob >= 0) || keep_prob > 1)
        throw PreconditionError("thin_photons: keep_prob must be in [0, 1]");
    TimeTagDataset out;
    out.kind = in.kind;
    out.trial_period_ps = in.trial_period_ps;
    out.n_trials = in.n_trials;
    out.config_hash = in.config_hash;
    out.records.reserve(in.records.size());
    Rng rng = Rng::seeded(seed);
    for (const TagRecord& r : in.records) {
        if (r.channel == CH_TRIGGER || rng.bernoulli(keep_prob)) out.records.push_back(r);
    }
    return out;
}

} // namespace photonlab

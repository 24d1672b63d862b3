// Acceptance gates. One entry per released guarantee; each prints a single
// PASS/FAIL line with the measured numbers. Run all with no arguments or a
// subset by name: ./acceptance 5 11 stored-g2
// Exit code is the number of failed criteria.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "photonlab/config.hpp"
#include "photonlab/fitting.hpp"
#include "photonlab/pipeline.hpp"

namespace pl = photonlab;

namespace {

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.6g", v);
    return b;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw CheckFailure(what);
}

void require_close(double got, double want, double tol, const std::string& label) {
    if (!(std::fabs(got - want) <= tol))
        throw CheckFailure(label + " = " + fmt(got) + ", want " + fmt(want) + " +/- " + fmt(tol));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string tmp_path(const std::string& leaf) {
    return (std::filesystem::temp_directory_path() / leaf).string();
}

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(bool(f), "cannot open " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spew(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    require(bool(f), "cannot write " + path);
}

// ---- 1: the documented passive budget -------------------------------------

std::string crit_chain() {
    const pl::Scenario s = pl::preset_by_name("memory-trio");
    require(s.detection.stages.size() == 5,
            "expected 5 stages, preset has " + std::to_string(s.detection.stages.size()));
    const auto t0 = std::chrono::steady_clock::now();
    const double p = pl::chain_transmission(s.detection.stages);
    const double wall = seconds_since(t0);
    require_close(p, 0.1003, 5e-5, "chain transmission");
    require(wall < 1e-3, "chain transmission took " + fmt(wall) + " s");
    return "transmission " + fmt(p) + " in " + fmt(wall * 1e6) + " us";
}

// ---- 2: noise-mixed correlation closed form --------------------------------

std::string crit_mixed_g2() {
    const double g = pl::noise_mixed_g2(0.20, 11.0);
    require_close(g, 0.328, 0.005, "mixed g2 at snr 11");
    return "g2 " + fmt(g);
}

// ---- 3: source operating point recovered from clicks -----------------------

std::string crit_source_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    pl::Scenario s = pl::preset_by_name("source-characterization");
    s.run.trials = 10000000;
    s.run.seed = 42;
    const pl::CalibrationPoint cp = pl::calibrate_source(s.source, s.source.probe_setting);
    require_close(cp.p_gen, 0.120, 1e-3, "calibrated p_gen");
    require_close(cp.g2_0, 0.230, 1e-3, "calibrated g2");

    const pl::RunWindowCounts c = pl::simulate_counts(s);
    const double win = s.windows.input_hi - s.windows.input_lo;
    const double dark_any = 1.0 - std::exp(-2.0 * s.detection.dark_rate_hz * win);
    const pl::SourceEstimate est = pl::estimate_source(c.input, pl::input_alpha(s), dark_any);
    const double wall = seconds_since(t0);

    const double pull_p = (est.p_gen.value - cp.p_gen) / est.p_gen.error;
    const double pull_g = (est.g2_0.value - cp.g2_0) / est.g2_0.error;
    require(std::fabs(pull_p) <= 3.0, "p_gen " + fmt(est.p_gen.value) + " +/- " +
                                          fmt(est.p_gen.error) + " pulls " + fmt(pull_p) +
                                          " sigma from " + fmt(cp.p_gen));
    require(std::fabs(pull_g) <= 3.0, "g2 " + fmt(est.g2_0.value) + " +/- " +
                                          fmt(est.g2_0.error) + " pulls " + fmt(pull_g) +
                                          " sigma from " + fmt(cp.g2_0));
    require(wall < 300.0, "recovery took " + fmt(wall) + " s, budget 300 s");
    return "p_gen " + fmt(est.p_gen.value) + " (" + fmt(pull_p) + " sigma), g2 " +
           fmt(est.g2_0.value) + " (" + fmt(pull_g) + " sigma)";
}

// ---- 4: lumped noise floor --------------------------------------------------

std::string crit_noise_floor() {
    pl::Scenario s = pl::preset_by_name("memory-trio-noise");
    s.run.trials = 10000000;
    s.run.seed = 9;
    require_close(s.noise.p_noise_per_trial, 2.3e-4, 1e-12, "configured noise floor");

    const pl::RunWindowCounts c = pl::simulate_counts(s);
    // noise clicks land in the retrieval window; dark counts thin into it
    const double win = s.windows.stored_hi - s.windows.stored_lo;
    const double lam = s.noise.p_noise_per_trial + 2.0 * s.detection.dark_rate_hz * win;
    const double expect = 1.0 - std::exp(-lam);
    const double obs = c.stored.p_any();
    const double sig = std::sqrt(expect * (1.0 - expect) / double(s.run.trials));
    const double pull = (obs - expect) / sig;
    require(std::fabs(pull) <= 3.0, "stored-window probability " + fmt(obs) + " pulls " +
                                        fmt(pull) + " sigma from " + fmt(expect));
    return "probability " + fmt(obs) + " vs " + fmt(expect) + " (" + fmt(pull) + " sigma)";
}

// ---- 5: calibrated storage, solver and simulated trio ----------------------

std::string crit_trio_figures() {
    pl::Scenario st = pl::preset_by_name("memory-trio");
    const pl::SampledEnvelope env = pl::make_envelope(st);
    const pl::StorageSolution sol =
        pl::run_storage(env, st.write, st.read, st.t_store, st.grid.read_span, st.memory);
    require_close(sol.eta_wr, 0.21, 0.02, "solver eta_wr");

    pl::Scenario in = pl::preset_by_name("memory-trio-input");
    pl::Scenario no = pl::preset_by_name("memory-trio-noise");
    in.run.trials = 6000000;
    in.run.seed = 101;
    st.run.trials = 6000000;
    st.run.seed = 102;
    no.run.trials = 30000000;
    no.run.seed = 103;
    const pl::MemoryFigures f = pl::memory_figures(
        pl::simulate_counts(in), pl::simulate_counts(st), pl::simulate_counts(no));
    require(!pl::degenerate(f), "trio figures are degenerate");
    require_close(f.eta_wr.value, 0.21, 0.02, "measured eta_wr");
    require(f.snr.value >= 20.0 && f.snr.value <= 28.0,
            "snr " + fmt(f.snr.value) + " outside [20, 28]");
    require_close(f.mu1.value, 1.1e-3, 0.15 * 1.1e-3, "mu1");
    return "solver eta_wr " + fmt(sol.eta_wr) + ", measured " + fmt(f.eta_wr.value) + ", snr " +
           fmt(f.snr.value) + ", mu1 " + fmt(f.mu1.value);
}

// ---- 6: conservation in the scatter-free limit, grid convergence -----------

std::string crit_conservation() {
    const pl::Scenario s = pl::preset_by_name("memory-trio");
    pl::MemoryConfig weak = s.memory;
    weak.gamma = 1e-3 * std::fabs(weak.delta);
    weak.gamma_s = 0.0;

    const pl::SampledEnvelope env = pl::make_envelope(s);
    const pl::WriteResult w = pl::solve_write(env, s.write, weak);
    const double total = w.transmitted + w.eta_w;
    require(std::fabs(total - 1.0) <= 1e-3,
            "transmitted + stored = " + fmt(total) + ", want 1 +/- 1e-3");

    const auto refinement_shift = [&](const pl::MemoryConfig& base) {
        const pl::SampledEnvelope env_c =
            pl::make_input_envelope(s.source.envelope, s.grid.t_lo, s.grid.t_hi, base.dt);
        const pl::StorageSolution coarse =
            pl::run_storage(env_c, s.write, s.read, s.t_store, s.grid.read_span, base);
        pl::MemoryConfig fine = base;
        fine.dt = base.dt / 2.0;
        fine.nz = base.nz * 2;
        const pl::SampledEnvelope env_f =
            pl::make_input_envelope(s.source.envelope, s.grid.t_lo, s.grid.t_hi, fine.dt);
        const pl::StorageSolution refined =
            pl::run_storage(env_f, s.write, s.read, s.t_store, s.grid.read_span, fine);
        return std::fabs(coarse.eta_wr - refined.eta_wr);
    };
    const double shift_weak = refinement_shift(weak);
    require(shift_weak < 1e-3, "halving dt and dz moved eta_wr by " + fmt(shift_weak));
    // same bound holds at the calibrated scattering rate, where eta_wr ~ 0.21
    const double shift_cal = refinement_shift(s.memory);
    require(shift_cal < 1e-3,
            "halving dt and dz moved the calibrated eta_wr by " + fmt(shift_cal));
    return "norm total " + fmt(total) + ", refinement shifts " + fmt(shift_weak) + " and " +
           fmt(shift_cal);
}

// ---- 7: detuning response centered and symmetric ----------------------------

std::string crit_detuning_line() {
    const pl::Scenario s = pl::preset_by_name("detuning-line");

    // time-symmetric gaussian input so the response symmetry is the solver's
    pl::SampledEnvelope env;
    env.t0 = s.grid.t_lo;
    env.dt = s.memory.dt;
    const size_t n = size_t(std::llround((s.grid.t_hi - s.grid.t_lo) / env.dt)) + 1;
    env.amp.resize(n);
    const double tc = 500e-9, sigma = 72e-9;
    for (size_t i = 0; i < n; ++i) {
        const double t = env.time(i) - tc;
        env.amp[i] = std::exp(-t * t / (2.0 * sigma * sigma));
    }
    env.normalize();

    const std::vector<double> axis = s.sweep.values();
    const std::vector<pl::SweepPoint> pts = pl::sweep_detuning(
        axis, env, s.write, s.read, s.t_store, s.grid.read_span, s.memory);

    size_t best = 0;
    for (size_t i = 1; i < pts.size(); ++i)
        if (pts[i].eta_wr > pts[best].eta_wr) best = i;
    const double step = axis[1] - axis[0];
    require(std::fabs(axis[best]) <= step + 1e-9,
            "peak at detuning " + fmt(axis[best] / pl::TWO_PI) + " Hz, more than one step from 0");

    // line symmetry is about the line's own center; the residual center offset
    // (edge-averaged compensation residual, tens of kHz) is separately bounded
    // by the one-grid-step clause above
    require(best > 0 && best + 1 < pts.size(), "peak on the sweep edge");
    const double ym = pts[best - 1].eta_wr, y0 = pts[best].eta_wr, yp = pts[best + 1].eta_wr;
    const double center = axis[best] + 0.5 * step * (ym - yp) / (ym - 2.0 * y0 + yp);
    require(std::fabs(center) <= step,
            "line center " + fmt(center / pl::TWO_PI) + " Hz, more than one step from 0");

    std::vector<double> mirror;
    for (int k = 8; k >= 1; --k) mirror.push_back(center - k * step);
    for (int k = 1; k <= 8; ++k) mirror.push_back(center + k * step);
    const std::vector<pl::SweepPoint> mp = pl::sweep_detuning(
        mirror, env, s.write, s.read, s.t_store, s.grid.read_span, s.memory);
    double worst = 0;
    for (size_t k = 0; k < mp.size() / 2; ++k) {
        const size_t j = mp.size() - 1 - k;
        const auto rel = [](double a, double b) { return std::fabs(a - b) / (0.5 * (a + b)); };
        worst = std::max({worst, rel(mp[k].eta_wr, mp[j].eta_wr), rel(mp[k].eta_w, mp[j].eta_w)});
    }
    require(worst <= 0.02, "mirror-pair asymmetry " + fmt(worst) + " exceeds 2%");
    return "peak at " + fmt(axis[best] / pl::TWO_PI * 1e-6) + " MHz, center " +
           fmt(center / pl::TWO_PI * 1e-3) + " kHz, worst asymmetry " + fmt(worst * 100) + "%";
}

// ---- 8: write-power scan shapes ---------------------------------------------

std::string crit_write_power() {
    const pl::Scenario s = pl::preset_by_name("beam-splitter");
    const pl::SampledEnvelope env = pl::make_envelope(s);
    const std::vector<double> powers = s.sweep.values();
    const std::vector<pl::SweepPoint> pts = pl::sweep_write_power(
        powers, env, s.write, s.read, s.t_store, s.grid.read_span, s.memory);

    for (size_t i = 1; i < pts.size(); ++i) {
        require(pts[i].eta_w >= pts[i - 1].eta_w - 1e-12,
                "eta_w drops at power " + fmt(pts[i].parameter));
        require(pts[i].survival <= pts[i - 1].survival + 1e-12,
                "survival rises at power " + fmt(pts[i].parameter));
    }
    size_t best = 0;
    for (size_t i = 1; i < pts.size(); ++i)
        if (pts[i].s_over_t > pts[best].s_over_t) best = i;
    require(best > 0 && best + 1 < pts.size(),
            "stored/transmitted peak sits on the sweep edge (index " + std::to_string(best) + ")");
    require(pts[best].s_over_t > pts[best - 1].s_over_t &&
                pts[best].s_over_t > pts[best + 1].s_over_t,
            "stored/transmitted peak is not strict");
    return "eta_w " + fmt(pts.front().eta_w) + " -> " + fmt(pts.back().eta_w) +
           ", s/t peak " + fmt(pts[best].s_over_t) + " at power " + fmt(pts[best].parameter);
}

// ---- 9: retrieval length control and shaped readout -------------------------

std::string crit_retrieval_shaping() {
    const pl::Scenario s = pl::preset_by_name("waveshape");
    const pl::SampledEnvelope env = pl::make_envelope(s);
    const pl::WriteResult wr = pl::solve_write(env, s.write, s.memory);
    const std::vector<pl::cplx> spin = pl::apply_storage_decay(wr.spin, s.t_store, s.memory);

    const std::vector<double> powers = s.sweep.values();
    const std::vector<pl::ReadPowerPoint> pts =
        pl::sweep_read_power(powers, spin, s.read, s.grid.read_span, s.memory);
    for (size_t i = 1; i < pts.size(); ++i)
        require(pts[i].fwhm < pts[i - 1].fwhm,
                "retrieved width not decreasing at power " + fmt(pts[i].power));
    const double span = pts.front().fwhm / pts.back().fwhm;
    require(span >= 10.0, "width span factor " + fmt(span) + " below 10");

    const double t0 = s.read.t_start;
    const double dt = 1e-9;
    const size_t ntgt = 700;
    const auto scale_to_budget = [&](std::vector<double> target) {
        double total = 0;
        for (double v : target) total += v * dt;
        const double want = 0.5 * pl::spin_norm_of(spin);
        for (double& v : target) v *= want / total;
        return target;
    };
    const std::vector<double> t_wave =
        scale_to_budget(pl::envelope_target(s.source.envelope, t0, dt, ntgt, t0 + 260e-9));
    const pl::ShapedReadout sh_wave = pl::shape_readout(t_wave, t0, dt, spin, s.memory);
    require(sh_wave.mismatch < 0.05,
            "input-replica target mismatch " + fmt(sh_wave.mismatch));
    const std::vector<double> t_bins = scale_to_budget(pl::twobin_target(
        t0, dt, ntgt, t0 + 80e-9, t0 + 180e-9, t0 + 300e-9, t0 + 400e-9, 0.5));
    const pl::ShapedReadout sh_bins = pl::shape_readout(t_bins, t0, dt, spin, s.memory);
    require(sh_bins.mismatch < 0.05, "two-bin target mismatch " + fmt(sh_bins.mismatch));
    return "width " + fmt(pts.front().fwhm * 1e9) + " -> " + fmt(pts.back().fwhm * 1e9) +
           " ns (factor " + fmt(span) + "), mismatches " + fmt(sh_wave.mismatch) + " and " +
           fmt(sh_bins.mismatch);
}

// ---- 10: lifetime recovery on synthetic decays -------------------------------

std::string crit_lifetime() {
    const double tau = 30e-6, eta0 = 0.21;
    std::vector<double> t, sig;
    for (int i = 0; i <= 40; ++i) {
        t.push_back(2e-6 * i);
        sig.push_back(0.01 * eta0);
    }

    pl::Rng rng = pl::Rng::seeded(131);
    std::vector<double> y_plain;
    for (double ti : t)
        y_plain.push_back(eta0 * std::exp(-ti * ti / (tau * tau)) + rng.normal(0.0, 0.01 * eta0));
    const pl::LifetimeFit plain = pl::fit_lifetime(t, y_plain, sig);
    require(!plain.has_oscillation, "plain decay flagged as modulated");
    require_close(plain.tau, tau, 0.05 * tau, "plain tau");

    const double amp = 0.10, omega = pl::TWO_PI * 8e4;
    pl::Rng rng2 = pl::Rng::seeded(177);
    std::vector<double> y_mod;
    for (double ti : t)
        y_mod.push_back(eta0 * std::exp(-ti * ti / (tau * tau)) *
                            (1.0 - amp + amp * std::cos(omega * ti)) +
                        rng2.normal(0.0, 0.01 * eta0));
    const pl::LifetimeFit mod = pl::fit_lifetime(t, y_mod, sig);
    require(mod.has_oscillation, "modulated decay not flagged");
    require_close(mod.tau, tau, 0.05 * tau, "modulated tau");
    require_close(mod.amplitude, amp, 0.10 * amp, "modulation amplitude");
    require_close(mod.omega, omega, 0.10 * omega, "modulation frequency");
    return "plain tau " + fmt(plain.tau * 1e6) + " us, modulated tau " + fmt(mod.tau * 1e6) +
           " us, A " + fmt(mod.amplitude) + ", omega/2pi " + fmt(mod.omega / pl::TWO_PI) + " Hz";
}

// ---- 11: tag file roundtrip and corruption detection -------------------------

std::string crit_tagfile() {
    // deterministic dataset: 250k trials, one trigger + three clicks each
    pl::TimeTagDataset ds;
    ds.kind = pl::RunKind::storage;
    ds.trial_period_ps = 4000000;
    ds.n_trials = 250000;
    ds.config_hash = pl::Sha256::of("tag-roundtrip");
    ds.records.reserve(size_t(ds.n_trials) * 4);
    pl::Rng rng = pl::Rng::seeded(2024);
    for (uint64_t trial = 0; trial < ds.n_trials; ++trial) {
        const uint64_t base = trial * ds.trial_period_ps;
        ds.records.push_back({base, uint32_t(trial), pl::CH_TRIGGER});
        std::array<uint64_t, 3> off{};
        for (uint64_t& o : off)
            o = 1 + uint64_t(rng.uniform() * double(ds.trial_period_ps - 2));
        std::sort(off.begin(), off.end());
        for (uint64_t o : off)
            ds.records.push_back(
                {base + o, uint32_t(trial), rng.bernoulli(0.5) ? pl::CH_D1 : pl::CH_D2});
    }
    require(ds.records.size() == 1000000,
            "expected 1e6 records, built " + std::to_string(ds.records.size()));

    const std::string p1 = tmp_path("acc_tags_a.qtt");
    const std::string p2 = tmp_path("acc_tags_b.qtt");
    const std::string p3 = tmp_path("acc_tags_bad.qtt");
    pl::write_tags(ds, p1);
    const pl::TimeTagDataset rd = pl::read_tags(p1);
    pl::write_tags(rd, p2);
    require(pl::file_sha256(p1) == pl::file_sha256(p2), "write-read-write changed the bytes");

    const std::vector<uint8_t> good = slurp(p1);
    require(good.size() == 80 + 16 * 1000000, "unexpected file size");

    struct Case {
        const char* what;
        uint64_t offset;
        std::function<void(std::vector<uint8_t>&)> mutate;
    };
    // a record on a channel already seen with a nonzero timestamp; zeroing its
    // timestamp breaks per-channel order at exactly that record
    size_t mono_idx = 0;
    {
        uint64_t last_ts[3] = {0, 0, 0};
        bool seen[3] = {false, false, false};
        for (size_t i = 0; i < ds.records.size(); ++i) {
            const auto& r = ds.records[i];
            if (r.channel != pl::CH_TRIGGER && seen[r.channel] && last_ts[r.channel] > 0) {
                mono_idx = i;
                break;
            }
            seen[r.channel] = true;
            last_ts[r.channel] = r.timestamp_ps;
        }
        require(mono_idx > 0, "no record suitable for the order-violation case");
    }
    const uint64_t mono_base = 80 + 16 * uint64_t(mono_idx);
    const uint64_t rec_base = 80 + 16 * uint64_t(123456);
    const uint64_t trial_base = 80 + 16 * uint64_t(4000); // trigger of trial 1000

    const std::vector<Case> cases = {
        {"bad magic", 0, [](auto& b) { b[0] = 'X'; }},
        {"bad version", 4, [](auto& b) { b[4] = 9; }},
        {"bad run kind", 6, [](auto& b) { b[6] = 7; }},
        {"header pad", 7, [](auto& b) { b[7] = 1; }},
        {"reserved byte", 70, [](auto& b) { b[70] = 1; }},
        {"truncated header", 50, [](auto& b) { b.resize(50); }},
        {"truncated record", 80 + 16 * 999999ull, [](auto& b) { b.resize(b.size() - 7); }},
        {"trailing bytes", 80 + 16 * 1000000ull, [](auto& b) { b.push_back(0); }},
        {"record channel", rec_base + 12, [=](auto& b) { b[rec_base + 12] = 9; }},
        {"record pad", rec_base + 13, [=](auto& b) { b[rec_base + 13] = 1; }},
        {"channel order", mono_base,
         [=](auto& b) { std::fill_n(b.begin() + long(mono_base), 8, uint8_t(0)); }},
        {"trial order", trial_base + 8,
         [=](auto& b) { std::fill_n(b.begin() + long(trial_base) + 8, 4, uint8_t(0)); }},
    };
    for (const Case& c : cases) {
        std::vector<uint8_t> b = good;
        c.mutate(b);
        spew(p3, b);
        uint64_t got = ~0ull;
        try {
            (void)pl::read_tags(p3);
        } catch (const pl::ParseError& e) {
            got = e.offset;
        }
        require(got != ~0ull, std::string(c.what) + " was not detected");
        require(got == c.offset, std::string(c.what) + " reported offset " +
                                     std::to_string(got) + ", want " + std::to_string(c.offset));
    }
    for (const std::string& p : {p1, p2, p3}) std::filesystem::remove(p);
    return "roundtrip byte-identical, " + std::to_string(cases.size()) +
           " corruption classes at exact offsets";
}

// ---- 12: estimator statistics ------------------------------------------------

std::string crit_statistics() {
    // independent trials carry no cross-trial correlation
    pl::Scenario s = pl::preset_by_name("memory-trio-input");
    s.run.trials = 1000000;
    s.run.seed = 7;
    const pl::RunWindowCounts c = pl::simulate_counts(s);
    double worst_pull = 0;
    for (int n = 1; n <= 8; ++n) {
        const pl::ValueWithError g = pl::g2_of_n(c.input, n);
        const double pull = std::fabs(g.value - 1.0) / g.error;
        worst_pull = std::max(worst_pull, pull);
        require(pull <= 3.0, "g2(" + std::to_string(n) + ") = " + fmt(g.value) + " +/- " +
                                 fmt(g.error) + " pulls " + fmt(pull) + " sigma from 1");
    }

    // zero-delay correlation survives 50% passive thinning
    pl::Scenario s4 = pl::preset_by_name("memory-trio-input");
    s4.run.trials = 4000000;
    s4.run.seed = 11;
    const pl::TrialContext ctx = pl::build_trial_context(s4);
    const pl::TimeTagDataset full =
        pl::make_dataset(ctx, s4.run.trials, s4.run.seed, pl::config_hash(s4));
    const pl::TimeTagDataset half = pl::thin_photons(full, 0.5, 99);
    const pl::ValueWithError gf = pl::g2_of_n(pl::analyze_run(full, s4.windows, 8).input, 0);
    const pl::ValueWithError gt = pl::g2_of_n(pl::analyze_run(half, s4.windows, 8).input, 0);
    const double gap = std::fabs(gf.value - gt.value);
    const double sig = std::hypot(gf.error, gt.error);
    require(gap <= 3.0 * sig, "thinning moved g2(0) from " + fmt(gf.value) + " to " +
                                  fmt(gt.value) + " (" + fmt(gap / sig) + " sigma)");

    // analytic jacobians against finite differences
    const std::vector<double> t_life = {0.0, 5e-6, 12e-6, 20e-6, 31e-6, 44e-6, 60e-6, 80e-6};
    const double j2 = pl::jacobian_fd_error(pl::LifetimeModel::eval, pl::LifetimeModel::jac,
                                            t_life, {0.21, 30e-6});
    const double j4 = pl::jacobian_fd_error(pl::LifetimeModel::eval, pl::LifetimeModel::jac,
                                            t_life, {0.21, 30e-6, 0.10, pl::TWO_PI * 8e4});
    const std::vector<double> t_wave = {250e-9, 350e-9, 450e-9, 560e-9, 650e-9, 800e-9};
    const double jw = pl::jacobian_fd_error(pl::WaveshapeModel::eval, pl::WaveshapeModel::jac,
                                            t_wave, {0.8, 515e-9, 100e-9, 53e-9});
    require(j2 < 1e-6, "2-parameter decay jacobian off by " + fmt(j2));
    require(j4 < 1e-6, "4-parameter decay jacobian off by " + fmt(j4));
    require(jw < 1e-6, "waveshape jacobian off by " + fmt(jw));
    return "worst g2(n>=1) pull " + fmt(worst_pull) + " sigma, thinning gap " +
           fmt(gap / sig) + " sigma, jacobians " + fmt(std::max({j2, j4, jw}));
}

// ---- stored-g2: single-photon character after storage -------------------------

std::string crit_stored_g2() {
    pl::Scenario s = pl::preset_by_name("stored-g2");
    s.run.trials = 1200000000;
    s.run.seed = 5;
    const pl::RunWindowCounts c = pl::simulate_counts(s);
    const pl::ValueWithError g = pl::g2_of_n(c.stored, 0);
    require(g.value >= 0.28 && g.value <= 0.40,
            "stored g2(0) " + fmt(g.value) + " +/- " + fmt(g.error) + " outside [0.28, 0.40]");

    pl::Scenario no = s;
    no.run.kind = pl::RunKind::noise_only;
    no.run.trials = 20000000;
    no.run.seed = 6;
    const pl::RunWindowCounts cn = pl::simulate_counts(no);
    const double p_n = cn.stored.p_any();
    const double snr_sub = (c.stored.p_any() - p_n) / p_n;
    require(snr_sub >= 9.0 && snr_sub <= 13.0,
            "subtracted snr " + fmt(snr_sub) + " outside [9, 13]");
    return "g2(0) " + fmt(g.value) + " +/- " + fmt(g.error) + " at subtracted snr " +
           fmt(snr_sub);
}

struct Criterion {
    const char* name;
    const char* label;
    std::string (*run)();
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {"1", "detection chain budget", &crit_chain},
        {"2", "noise-mixed g2 closed form", &crit_mixed_g2},
        {"3", "source recovery from clicks", &crit_source_recovery},
        {"4", "stored-window noise floor", &crit_noise_floor},
        {"5", "calibrated storage trio", &crit_trio_figures},
        {"6", "conservation and grid convergence", &crit_conservation},
        {"7", "detuning line shape", &crit_detuning_line},
        {"8", "write-power splitting", &crit_write_power},
        {"9", "retrieval shaping", &crit_retrieval_shaping},
        {"10", "lifetime recovery", &crit_lifetime},
        {"11", "tag file integrity", &crit_tagfile},
        {"12", "estimator statistics", &crit_statistics},
        {"stored-g2", "stored-photon correlation", &crit_stored_g2},
    };
    return all;
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> wanted(argv + 1, argv + argc);
    for (const std::string& w : wanted) {
        const bool known = std::any_of(criteria().begin(), criteria().end(),
                                       [&](const Criterion& c) { return w == c.name; });
        if (!known) {
            std::fprintf(stderr, "unknown criterion '%s'; known:", w.c_str());
            for (const Criterion& c : criteria()) std::fprintf(stderr, " %s", c.name);
            std::fprintf(stderr, "\n");
            return 2;
        }
    }

    int failures = 0, ran = 0;
    for (const Criterion& c : criteria()) {
        if (!wanted.empty() &&
            std::find(wanted.begin(), wanted.end(), c.name) == wanted.end())
            continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const std::string detail = c.run();
            std::printf("PASS %-9s %s: %s (%.2f s)\n", c.name, c.label, detail.c_str(),
                        seconds_since(t0));
        } catch (const std::exception& e) {
            ++failures;
            std::printf("FAIL %-9s %s: %s\n", c.name, c.label, e.what());
        }
        std::fflush(stdout);
    }
    if (failures)
        std::printf("%d of %d criteria failed\n", failures, ran);
    else
        std::printf("all %d criteria passed\n", ran);
    return failures ? 1 : 0;
}

#pragma once

// Experiment configuration: JSON schema, validation, canonical hashing, and
// the versioned built-in presets behind the zero-argument figure pipelines.
//
// Canonical form stores SI values (seconds, rad/s); inputs may use *_mhz,
// *_ns, *_us variants of any such key instead. Dumps always emit canonical
// keys, so dump -> load -> dump is byte-stable and so is the config hash.
//
// config_hash covers the physics sections only (schema_version, source,
// memory, detection, windows, noise, sweep). The run section (kind, trials,
// seed) and the name are excluded: the three runs of a memory trio share one
// lineage hash by construction.

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"
#include "detection.hpp"
#include "envelope.hpp"
#include "raman.hpp"
#include "sha256.hpp"
#include "source_model.hpp"
#include "timetag.hpp"

namespace photonlab {

using nlohmann::json;

struct GridSettings {
    double t_lo = 150e-9;      // write-stage solve grid start
    double t_hi = 1100e-9;     // write-stage solve grid end
    double read_span = 140e-9; // length of the retrieval solve window

    void validate() const {
        if (!(t_hi > t_lo)) throw ConfigError("grid: t_hi must exceed t_lo");
        if (!(read_span > 0)) throw ConfigError("grid: read_span must be > 0");
    }
};

struct SweepSettings {
    enum class Axis { none, write_power, detuning, read_power, t_store };
    Axis axis = Axis::none;
    double lo = 0, hi = 0;
    int points = 0;
    bool log = false;

    void validate() const {
        if (axis == Axis::none) return;
        if (points < 2) throw ConfigError("sweep: need at least 2 points");
        if (!(hi > lo)) throw ConfigError("sweep: hi must exceed lo");
        if (log && !(lo > 0)) throw ConfigError("sweep: log axis needs lo > 0");
    }

    std::vector<double> values() const {
        std::vector<double> v;
        if (axis == Axis::none) return v;
        v.reserve(points);
        for (int i = 0; i < points; ++i) {
            const double f = double(i) / double(points - 1);
            v.push_back(log ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
        }
        return v;
    }
};

struct RunSettings {
    RunKind kind = RunKind::storage;
    uint64_t trials = 1000000;
    uint64_t seed = 1;
};

struct Scenario {
    int schema_version = 1;
    std::string name;
    SourceConfig source;
    MemoryConfig memory;
    ControlPulse write;
    ControlPulse read;
    double t_store = 1.2e-6;
    GridSettings grid;
    DetectionConfig detection;
    WindowConfig windows;
    NoiseConfig noise;
    SweepSettings sweep;
    RunSettings run;

    void validate() const {
        if (schema_version != 1)
            throw ConfigError("config: unsupported schema_version " +
                              std::to_string(schema_version));
        source.validate();
        memory.validate();
        write.validate();
        read.validate();
        grid.validate();
        detection.validate();
        windows.validate();
        noise.validate();
        sweep.validate();
        if (!(t_store >= 0)) throw ConfigError("config: t_store must be >= 0");

        // cross-module constraints
        CalibrationPoint cp = calibrate_source(source, source.probe_setting);
        if (cp.p_gen > 0) (void)emission_distribution(cp.p_gen, cp.g2_defined ? cp.g2_0 : 1.0);
        if (read.t_start < windows.input_hi)
            throw ConfigError("config: read control starts inside the input window");
        if (write.t_start + write.duration > read.t_start)
            throw ConfigError("config: write control overlaps the read control");
        if (write.t_start + write.duration > grid.t_hi)
            throw ConfigError("config: write control runs past the solve grid");
        if (source.envelope.peak_time < grid.t_lo || source.envelope.peak_time > grid.t_hi)
            throw ConfigError("config: input envelope peak outside the solve grid");
        SampledEnvelope env =
            make_input_envelope(source.envelope, grid.t_lo, grid.t_hi, memory.dt);
        if (env.energy_in_window(windows.input_lo, windows.input_hi) < 0.9)
            throw ConfigError("config: input window captures < 90% of the envelope");
    }
};

namespace cfgdetail {

inline void require_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& section) {
    if (!j.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in section '" + section +
                              "'");
}

inline double plain_number(const json& j, const std::string& key, double def) {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_number()) throw ConfigError("config: '" + key + "' must be a number");
    return j.at(key).get<double>();
}

// frequency field: canonical "<base>_rad_s", alternate "<base>_mhz"
inline double freq_field(const json& j, const std::string& base, double def) {
    const std::string k1 = base + "_rad_s", k2 = base + "_mhz";
    if (j.contains(k1) && j.contains(k2))
        throw ConfigError("config: give either '" + k1 + "' or '" + k2 + "', not both");
    if (j.contains(k1)) return plain_number(j, k1, def);
    if (j.contains(k2)) return plain_number(j, k2, 0.0) * TWO_PI * 1e6;
    return def;
}

// time field: canonical "<base>_s", alternates "<base>_ns" / "<base>_us"
inline double time_field(const json& j, const std::string& base, double def) {
    const std::string ks = base + "_s", kn = base + "_ns", ku = base + "_us";
    int given = int(j.contains(ks)) + int(j.contains(kn)) + int(j.contains(ku));
    if (given > 1) throw ConfigError("config: '" + base + "' given in multiple units");
    if (j.contains(ks)) return plain_number(j, ks, def);
    if (j.contains(kn)) return plain_number(j, kn, 0.0) * 1e-9;
    if (j.contains(ku)) return plain_number(j, ku, 0.0) * 1e-6;
    return def;
}

inline std::set<std::string> with_units(std::initializer_list<const char*> freq,
                                        std::initializer_list<const char*> time,
                                        std::initializer_list<const char*> plain) {
    std::set<std::string> s;
    for (const char* b : freq) {
        s.insert(std::string(b) + "_rad_s");
        s.insert(std::string(b) + "_mhz");
    }
    for (const char* b : time) {
        s.insert(std::string(b) + "_s");
        s.insert(std::string(b) + "_ns");
        s.insert(std::string(b) + "_us");
    }
    for (const char* b : plain) s.insert(b);
    return s;
}

} // namespace cfgdetail

// ---- section serializers (canonical SI form) ----

inline json envelope_to_json(const WaveshapeParams& p) {
    return {{"rise_sigma_s", p.rise_sigma},
            {"decay_tau_s", p.decay_tau},
            {"fwhm_s", p.fwhm},
            {"peak_time_s", p.peak_time}};
}

inline WaveshapeParams envelope_from_json(const json& j) {
    using namespace cfgdetail;
    require_keys(j, with_units({}, {"rise_sigma", "decay_tau", "fwhm", "peak_time"}, {}),
                 "source.envelope");
    WaveshapeParams p;
    p.rise_sigma = time_field(j, "rise_sigma", p.rise_sigma);
    p.decay_tau = time_field(j, "decay_tau", p.decay_tau);
    p.fwhm = time_field(j, "fwhm", p.fwhm);
    p.peak_time = time_field(j, "peak_time", p.peak_time);
    return p;
}

inline json source_to_json(const SourceConfig& s) {
    return {{"rabi_curve", {{"amplitude", s.rabi_curve.amplitude}, {"period", s.rabi_curve.period}}},
            {"g2_curve", {{"g_min", s.g2_curve.g_min}, {"scale", s.g2_curve.scale}}},
            {"probe_min", s.probe_min},
            {"probe_max", s.probe_max},
            {"probe_setting", s.probe_setting},
            {"envelope", envelope_to_json(s.envelope)}};
}

inline SourceConfig source_from_json(const json& j) {
    using namespace cfgdetail;
    require_keys(j,
                 {"rabi_curve", "g2_curve", "probe_min", "probe_max", "probe_setting",
                  "envelope"},
                 "source");
    SourceConfig s;
    if (j.contains("rabi_curve")) {
        const json& c = j.at("rabi_curve");
        require_keys(c, {"amplitude", "period"}, "source.rabi_curve");
        s.rabi_curve.amplitude = plain_number(c, "amplitude", s.rabi_curve.amplitude);
        s.rabi_curve.period = plain_number(c, "period", s.rabi_curve.period);
    }
    if (j.contains("g2_curve")) {
        const json& c = j.at("g2_curve");
        require_keys(c, {"g_min", "scale"}, "source.g2_curve");
        s.g2_curve.g_min = plain_number(c, "g_min", s.g2_curve.g_min);
        s.g2_curve.scale = plain_number(c, "scale", s.g2_curve.scale);
    }
    s.probe_min = plain_number(j, "probe_min", s.probe_min);
    s.probe_max = plain_number(j, "probe_max", s.probe_max);
    s.probe_setting = plain_number(j, "probe_setting", s.probe_setting);
    if (j.contains("envelope")) s.envelope = envelope_from_json(j.at("envelope"));
    return s;
}

inline json pulse_to_json(const ControlPulse& p) {
    json j = {{"shape", p.shape == ControlPulse::Shape::square ? "square" : "table"},
              {"peak_rabi_rad_s", p.peak_rabi},
              {"t_start_s", p.t_start},
              {"duration_s", p.duration},
              {"edge_s", p.edge},
              {"power_scale", p.power_scale},
              {"detuning_offset_rad_s", p.detuning_offset}};
    if (p.shape == ControlPulse::Shape::table) {
        j["table_t_s"] = p.table_t;
        j["table_omega_rad_s"] = p.table_omega;
    }
    return j;
}

inline ControlPulse pulse_from_json(const json& j, const std::string& section) {
    using namespace cfgdetail;
    auto allowed = with_units({"peak_rabi", "detuning_offset"},
                              {"t_start", "duration", "edge"}, {"shape", "power_scale"});
    allowed.insert("table_t_s");
    allowed.insert("table_omega_rad_s");
    require_keys(j, allowed, section);
    ControlPulse p;
    if (j.contains("shape")) {
        const std::string s = j.at("shape").get<std::string>();
        if (s == "square") p.shape = ControlPulse::Shape::square;
        else if (s == "table") p.shape = ControlPulse::Shape::table;
        else throw ConfigError("config: " + section + ".shape must be 'square' or 'table'");
    }
    p.peak_rabi = freq_field(j, "peak_rabi", p.peak_rabi);
    p.detuning_offset = freq_field(j, "detuning_offset", p.detuning_offset);
    p.t_start = time_field(j, "t_start", p.t_start);
    p.duration = time_field(j, "duration", p.duration);
    p.edge = time_field(j, "edge", p.edge);
    p.power_scale = plain_number(j, "power_scale", p.power_scale);
    if (j.contains("table_t_s")) p.table_t = j.at("table_t_s").get<std::vector<double>>();
    if (j.contains("table_omega_rad_s"))
        p.table_omega = j.at("table_omega_rad_s").get<std::vector<double>>();
    return p;
}

inline json memory_to_json(const Scenario& s) {
    return {{"optical_depth", s.memory.optical_depth},
            {"delta_rad_s", s.memory.delta},
            {"gamma_rad_s", s.memory.gamma},
            {"gamma_s_rad_s", s.memory.gamma_s},
            {"delta2_rad_s", s.memory.delta2},
            {"tau_mem_s", s.memory.tau_mem},
            {"osc_amplitude", s.memory.osc_amplitude},
            {"osc_omega_rad_s", s.memory.osc_omega},
            {"nz", s.memory.nz},
            {"dt_s", s.memory.dt},
            {"stark_compensation", s.memory.stark_compensation},
            {"write", pulse_to_json(s.write)},
            {"read", pulse_to_json(s.read)},
            {"t_store_s", s.t_store},
            {"grid",
             {{"t_lo_s", s.grid.t_lo}, {"t_hi_s", s.grid.t_hi}, {"read_span_s", s.grid.read_span}}}};
}

inline void memory_from_json(const json& j, Scenario& s) {
    using namespace cfgdetail;
    auto allowed = with_units({"delta", "gamma", "gamma_s", "delta2", "osc_omega"},
                              {"tau_mem", "dt", "t_store"},
                              {"optical_depth", "osc_amplitude", "nz", "stark_compensation",
                               "write", "read", "grid"});
    require_keys(j, allowed, "memory");
    s.memory.optical_depth = plain_number(j, "optical_depth", s.memory.optical_depth);
    s.memory.delta = freq_field(j, "delta", s.memory.delta);
    s.memory.gamma = freq_field(j, "gamma", s.memory.gamma);
    s.memory.gamma_s = freq_field(j, "gamma_s", s.memory.gamma_s);
    s.memory.delta2 = freq_field(j, "delta2", s.memory.delta2);
    s.memory.tau_mem = time_field(j, "tau_mem", s.memory.tau_mem);
    s.memory.osc_amplitude = plain_number(j, "osc_amplitude", s.memory.osc_amplitude);
    s.memory.osc_omega = freq_field(j, "osc_omega", s.memory.osc_omega);
    if (j.contains("nz")) s.memory.nz = j.at("nz").get<int>();
    s.memory.dt = time_field(j, "dt", s.memory.dt);
    if (j.contains("stark_compensation"))
        s.memory.stark_compensation = j.at("stark_compensation").get<bool>();
    if (j.contains("write")) s.write = pulse_from_json(j.at("write"), "memory.write");
    if (j.contains("read")) s.read = pulse_from_json(j.at("read"), "memory.read");
    s.t_store = time_field(j, "t_store", s.t_store);
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        require_keys(g, with_units({}, {"t_lo", "t_hi", "read_span"}, {}), "memory.grid");
        s.grid.t_lo = time_field(g, "t_lo", s.grid.t_lo);
        s.grid.t_hi = time_field(g, "t_hi", s.grid.t_hi);
        s.grid.read_span = time_field(g, "read_span", s.grid.read_span);
    }
}

inline json detection_to_json(const DetectionConfig& d) {
    json stages = json::array();
    for (const auto& st : d.stages)
        stages.push_back({{"name", st.name}, {"transmission", st.transmission}});
    return {{"stages", stages},
            {"source_to_memory", d.source_to_memory},
            {"post_memory", d.post_memory},
            {"detector_efficiency", d.detector_efficiency},
            {"dark_rate_hz", d.dark_rate_hz},
            {"filter_suppression_db", d.filter_suppression_db}};
}

inline DetectionConfig detection_from_json(const json& j) {
    using namespace cfgdetail;
    require_keys(j,
                 {"stages", "source_to_memory", "post_memory", "detector_efficiency",
                  "dark_rate_hz", "filter_suppression_db"},
                 "detection");
    DetectionConfig d;
    if (j.contains("stages")) {
        d.stages.clear();
        for (const json& st : j.at("stages")) {
            require_keys(st, {"name", "transmission"}, "detection.stages[]");
            d.stages.push_back({st.at("name").get<std::string>(),
                                st.at("transmission").get<double>()});
        }
    }
    d.source_to_memory = plain_number(j, "source_to_memory", d.source_to_memory);
    d.post_memory = plain_number(j, "post_memory", d.post_memory);
    d.detector_efficiency = plain_number(j, "detector_efficiency", d.detector_efficiency);
    d.dark_rate_hz = plain_number(j, "dark_rate_hz", d.dark_rate_hz);
    d.filter_suppression_db = plain_number(j, "filter_suppression_db", d.filter_suppression_db);
    return d;
}

inline json windows_to_json(const WindowConfig& w) {
    return {{"input_lo_s", w.input_lo},
            {"input_hi_s", w.input_hi},
            {"stored_lo_s", w.stored_lo},
            {"stored_hi_s", w.stored_hi},
            {"trial_period_s", w.trial_period}};
}

inline WindowConfig windows_from_json(const json& j) {
    using namespace cfgdetail;
    require_keys(j,
                 with_units({}, {"input_lo", "input_hi", "stored_lo", "stored_hi", "trial_period"},
                            {}),
                 "windows");
    WindowConfig w;
    w.input_lo = time_field(j, "input_lo", w.input_lo);
    w.input_hi = time_field(j, "input_hi", w.input_hi);
    w.stored_lo = time_field(j, "stored_lo", w.stored_lo);
    w.stored_hi = time_field(j, "stored_hi", w.stored_hi);
    w.trial_period = time_field(j, "trial_period", w.trial_period);
    return w;
}

inline json sweep_to_json(const SweepSettings& s) {
    const char* axis = "none";
    switch (s.axis) {
        case SweepSettings::Axis::none: axis = "none"; break;
        case SweepSettings::Axis::write_power: axis = "write_power"; break;
        case SweepSettings::Axis::detuning: axis = "detuning"; break;
        case SweepSettings::Axis::read_power: axis = "read_power"; break;
        case SweepSettings::Axis::t_store: axis = "t_store"; break;
    }
    return {{"axis", axis}, {"lo", s.lo}, {"hi", s.hi}, {"points", s.points}, {"log", s.log}};
}

inline SweepSettings sweep_from_json(const json& j) {
    using namespace cfgdetail;
    require_keys(j, {"axis", "lo", "hi", "points", "log"}, "sweep");
    SweepSettings s;
    if (j.contains("axis")) {
        const std::string a = j.at("axis").get<std::string>();
        if (a == "none") s.axis = SweepSettings::Axis::none;
        else if (a == "write_power") s.axis = SweepSettings::Axis::write_power;
        else if (a == "detuning") s.axis = SweepSettings::Axis::detuning;
        else if (a == "read_power") s.axis = SweepSettings::Axis::read_power;
        else if (a == "t_store") s.axis = SweepSettings::Axis::t_store;
        else throw ConfigError("config: unknown sweep axis '" + a + "'");
    }
    s.lo = plain_number(j, "lo", s.lo);
    s.hi = plain_number(j, "hi", s.hi);
    if (j.contains("points")) s.points = j.at("points").get<int>();
    if (j.contains("log")) s.log = j.at("log").get<bool>();
    return s;
}

inline RunKind run_kind_from_name(const std::string& s) {
    if (s == "input_only") return RunKind::input_only;
    if (s == "storage") return RunKind::storage;
    if (s == "noise_only") return RunKind::noise_only;
    throw ConfigError("config: run.kind must be input_only, storage, or noise_only");
}

inline json run_to_json(const RunSettings& r) {
    return {{"kind", run_kind_name(r.kind)}, {"trials", r.trials}, {"seed", r.seed}};
}

inline RunSettings run_from_json(const json& j) {
    using namespace cfgdetail;
    require_keys(j, {"kind", "trials", "seed"}, "run");
    RunSettings r;
    if (j.contains("kind")) r.kind = run_kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("trials")) r.trials = j.at("trials").get<uint64_t>();
    if (j.contains("seed")) r.seed = j.at("seed").get<uint64_t>();
    return r;
}

// ---- whole-scenario serialization, hashing, loading ----

inline json scenario_to_json(const Scenario& s, bool include_run = true) {
    json j = {{"schema_version", s.schema_version},
              {"name", s.name},
              {"source", source_to_json(s.source)},
              {"memory", memory_to_json(s)},
              {"detection", detection_to_json(s.detection)},
              {"windows", windows_to_json(s.windows)},
              {"noise", {{"p_noise_per_trial", s.noise.p_noise_per_trial}}},
              {"sweep", sweep_to_json(s.sweep)}};
    if (include_run) j["run"] = run_to_json(s.run);
    return j;
}

inline Scenario scenario_from_json(const json& j) {
    using namespace cfgdetail;
    require_keys(j,
                 {"schema_version", "name", "source", "memory", "detection", "windows", "noise",
                  "sweep", "run"},
                 "(top level)");
    Scenario s;
    if (j.contains("schema_version")) s.schema_version = j.at("schema_version").get<int>();
    if (j.contains("name")) s.name = j.at("name").get<std::string>();
    if (j.contains("source")) s.source = source_from_json(j.at("source"));
    if (j.contains("memory")) memory_from_json(j.at("memory"), s);
    if (j.contains("detection")) s.detection = detection_from_json(j.at("detection"));
    if (j.contains("windows")) s.windows = windows_from_json(j.at("windows"));
    if (j.contains("noise")) {
        require_keys(j.at("noise"), {"p_noise_per_trial"}, "noise");
        s.noise.p_noise_per_trial =
            plain_number(j.at("noise"), "p_noise_per_trial", s.noise.p_noise_per_trial);
    }
    if (j.contains("sweep")) s.sweep = sweep_from_json(j.at("sweep"));
    if (j.contains("run")) s.run = run_from_json(j.at("run"));
    return s;
}

inline std::string dump_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

// hash of the physics sections in canonical compact form
inline Sha256::Digest config_hash(const Scenario& s) {
    json j = scenario_to_json(s, /*include_run=*/false);
    j.erase("name");
    const std::string canon = j.dump();
    Sha256 h;
    h.update(canon.data(), canon.size());
    return h.finalize();
}

inline std::string config_hash_hex(const Scenario& s) { return Sha256::hex(config_hash(s)); }

// ---- built-in presets ----

namespace presets {

// shared physics of the calibrated storage demonstration
inline Scenario storage_base() {
    Scenario s;
    s.name = "memory-trio";
    // source at the (p_gen = 0.120, g2 = 0.230) operating point: defaults
    // memory constants: defaults (d = 5, delta = -2pi 52 MHz, gamma = 2pi 3.03 MHz)
    s.write.peak_rabi = TWO_PI * 8.25e6;
    s.write.t_start = 300e-9;
    s.write.duration = 300e-9;
    s.read.peak_rabi = TWO_PI * 33e6;
    s.read.t_start = 1715e-9;
    s.read.duration = 60e-9;
    s.t_store = 1.2e-6;
    s.detection.stages = {{"fiber_after_source", 0.40},
                          {"aom_shifter", 0.62},
                          {"fiber_after_memory", 0.83},
                          {"filter_cavity", 0.65},
                          {"misc_optics", 0.75}};
    s.run.kind = RunKind::storage;
    s.run.trials = 10000000;
    s.run.seed = 1;
    return s;
}

inline Scenario memory_trio() { return storage_base(); }

inline Scenario memory_trio_input() {
    Scenario s = storage_base();
    s.name = "memory-trio-input";
    s.run.kind = RunKind::input_only;
    return s;
}

inline Scenario memory_trio_noise() {
    Scenario s = storage_base();
    s.name = "memory-trio-noise";
    s.run.kind = RunKind::noise_only;
    return s;
}

// source characterization bench: no memory in the beam line, the input
// photon goes straight to the detectors through fiber + shifter
inline Scenario source_characterization() {
    Scenario s = storage_base();
    s.name = "source-characterization";
    s.detection.stages = {{"fiber_after_source", 0.40}, {"aom_shifter", 0.62}};
    s.detection.source_to_memory = 0.248; // 0.40 * 0.62
    s.detection.post_memory = 1.0;
    s.run.kind = RunKind::input_only;
    s.run.trials = 10000000;
    return s;
}

// weaker probe so the retrieved photon sits at snr ~ 11 after background
// subtraction; probe solves p_gen = 11 p_noise / (0.187 * eta_wr)
inline Scenario stored_g2() {
    Scenario s = storage_base();
    s.name = "stored-g2";
    s.source.probe_setting = 1.539232;
    s.run.kind = RunKind::storage;
    s.run.trials = 100000000;
    return s;
}

inline Scenario detuning_line() {
    Scenario s = storage_base();
    s.name = "detuning-line";
    s.sweep.axis = SweepSettings::Axis::detuning;
    s.sweep.lo = -TWO_PI * 2.0e6;
    s.sweep.hi = TWO_PI * 2.0e6;
    s.sweep.points = 17;
    s.sweep.log = false;
    return s;
}

// write-power scan with the softer 500 ns write pulse: eta_w keeps rising
// across the grid while scattering erodes survival, so s/t peaks inside
inline Scenario beam_splitter() {
    Scenario s = storage_base();
    s.name = "beam-splitter";
    s.write.peak_rabi = TWO_PI * 5.2e6;
    s.write.t_start = 250e-9;
    s.write.duration = 500e-9;
    s.sweep.axis = SweepSettings::Axis::write_power;
    s.sweep.lo = 0.04;
    s.sweep.hi = 4.0;
    s.sweep.points = 17;
    s.sweep.log = true;
    return s;
}

// long read control scanned over two decades of power: retrieval time
// stretches as the control weakens
inline Scenario waveshape() {
    Scenario s = storage_base();
    s.name = "waveshape";
    s.read.peak_rabi = TWO_PI * 15e6;
    s.read.duration = 1000e-9;
    s.grid.read_span = 1100e-9;
    s.sweep.axis = SweepSettings::Axis::read_power;
    s.sweep.lo = 0.04;
    s.sweep.hi = 4.0;
    s.sweep.points = 9;
    s.sweep.log = true;
    return s;
}

} // namespace presets

struct PresetEntry {
    const char* name;
    const char* summary;
    Scenario (*build)();
};

inline const std::vector<PresetEntry>& preset_table() {
    static const std::vector<PresetEntry> table = {
        {"memory-trio", "calibrated storage run (write/read/store at the documented point)",
         &presets::memory_trio},
        {"memory-trio-input", "input reference run of the trio (memory bypassed)",
         &presets::memory_trio_input},
        {"memory-trio-noise", "noise run of the trio (input blocked)",
         &presets::memory_trio_noise},
        {"source-characterization", "source-only bench: fiber + shifter + detector",
         &presets::source_characterization},
        {"stored-g2", "storage run at reduced probe for snr ~ 11 retrieval",
         &presets::stored_g2},
        {"detuning-line", "two-photon detuning scan of the write control",
         &presets::detuning_line},
        {"beam-splitter", "write-power scan: stored/transmitted splitting",
         &presets::beam_splitter},
        {"waveshape", "read-power scan: retrieved pulse length control",
         &presets::waveshape},
    };
    return table;
}

inline Scenario preset_by_name(const std::string& name) {
    for (const PresetEntry& e : preset_table())
        if (name == e.name) {
            Scenario s = e.build();
            s.validate();
            return s;
        }
    std::string known;
    for (const PresetEntry& e : preset_table()) {
        if (!known.empty()) known += ", ";
        known += e.name;
    }
    throw ConfigError("config: unknown preset '" + name + "' (known: " + known + ")");
}

// path to a JSON file, or the name of a built-in preset
inline Scenario load_scenario(const std::string& path_or_name) {
    for (const PresetEntry& e : preset_table())
        if (path_or_name == e.name) return preset_by_name(path_or_name);
    std::ifstream in(path_or_name);
    if (!in) {
        // a bare word was probably meant as a preset, not a file
        if (path_or_name.find('/') == std::string::npos &&
            path_or_name.find('.') == std::string::npos)
            return preset_by_name(path_or_name); // throws with the preset list
        throw IoError("cannot open config '" + path_or_name + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    Scenario s;
    try {
        s = scenario_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    s.validate();
    return s;
}

// ---- scenario -> runnable pieces ----

inline SampledEnvelope make_envelope(const Scenario& s) {
    return make_input_envelope(s.source.envelope, s.grid.t_lo, s.grid.t_hi, s.memory.dt);
}

inline ArrivalSampler arrival_sampler_of(const SampledEnvelope& env) {
    std::vector<double> intens(env.amp.size());
    for (size_t i = 0; i < intens.size(); ++i) intens[i] = env.amp[i] * env.amp[i];
    return ArrivalSampler(env.t0, env.dt, intens);
}

inline EmissionDistribution emission_of(const Scenario& s) {
    CalibrationPoint cp = calibrate_source(s.source, s.source.probe_setting);
    if (cp.p_gen <= 0) {
        EmissionDistribution e;
        e.pi0 = 1;
        e.pi1 = 0;
        e.pi2 = 0;
        return e;
    }
    return emission_distribution(cp.p_gen, cp.g2_defined ? cp.g2_0 : 1.0);
}

// runs the deterministic solver when the kind needs it, then assembles the
// per-trial sampling context
inline TrialContext build_trial_context(const Scenario& s) {
    SampledEnvelope env = make_envelope(s);
    MemoryResponse response;
    if (s.run.kind == RunKind::storage)
        response =
            build_memory_response(env, s.write, s.read, s.t_store, s.grid.read_span, s.memory);
    ArrivalSampler input_times;
    if (s.run.kind == RunKind::input_only) input_times = arrival_sampler_of(env);
    return make_trial_context(s.run.kind, emission_of(s), input_times, response, s.detection,
                              s.windows, s.noise);
}

} // namespace photonlab

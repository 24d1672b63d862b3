// photonlab: simulate detector tag streams for an ensemble photon memory,
// analyze them back into efficiencies and correlations, and rebuild the
// reference figures as CSV bundles.

#include <CLI11.hpp>

#include <photonlab/analysis.hpp>
#include <photonlab/config.hpp>
#include <photonlab/fitting.hpp>
#include <photonlab/parallel.hpp>
#include <photonlab/pipeline.hpp>
#include <photonlab/raman.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace pl = photonlab;
using nlohmann::json;

namespace {

// exit codes: 0 ok, 2 config, 3 precondition, 4 io, 5 parse, 6 infeasible,
// 7 lineage, 1 anything else
constexpr int kExitConfig = 2;

double now_s() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::string fmt(double v, int prec = 9) {
    std::ostringstream o;
    o << std::setprecision(prec) << v;
    return o.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw pl::IoError("cannot open " + path + " for writing");
    return f;
}

void finish_out(std::ofstream& f, const std::string& path) {
    f.flush();
    if (!f) throw pl::IoError("write failed on " + path);
}

json ve(const pl::ValueWithError& v) { return {{"value", v.value}, {"error", v.error}}; }

// ---- presets ----------------------------------------------------------------

void cmd_presets(const std::string& name) {
    if (name.empty()) {
        for (const auto& e : pl::preset_table())
            std::cout << std::left << std::setw(26) << e.name << e.summary << "\n";
        return;
    }
    std::cout << pl::dump_scenario(pl::preset_by_name(name));
}

// ---- simulate ----------------------------------------------------------------

void cmd_simulate(pl::Scenario s, const std::string& out, const std::string& format) {
    const bool csv_ext = out.size() >= 4 && out.compare(out.size() - 4, 4, ".csv") == 0;
    if (!format.empty() && (format == "csv") != csv_ext)
        throw pl::ConfigError("--format " + format + " disagrees with the extension of '" + out +
                              "'");
    if (s.sweep.axis != pl::SweepSettings::Axis::none)
        std::cerr << "warning: the sweep section drives reproduce, simulate ignores it\n";

    const double t0 = now_s();
    const uint64_t records = pl::simulate_to_file(s, out);
    std::cout << "simulate name=" << s.name << " kind=" << pl::run_kind_name(s.run.kind)
              << " trials=" << s.run.trials << " records=" << records << " wall_s=" << std::fixed
              << std::setprecision(3) << (now_s() - t0) << " out=" << out
              << " hash=" << pl::config_hash_hex(s).substr(0, 16) << "\n";
}

// ---- analyze -----------------------------------------------------------------

json g2_table(const pl::WindowedCounts& c, int max_sep) {
    json rows = json::array();
    if (c.trials_d1 == 0 || c.trials_d2 == 0) return rows; // needs both detectors firing
    for (int n = 0; n <= max_sep; ++n) {
        const pl::ValueWithError g = pl::g2_of_n(c, n);
        rows.push_back({{"separation", n},
                        {"g2", g.value},
                        {"error", g.error},
                        {"coincidences", c.c12(n)},
                        {"pairs", c.pairs(n)}});
    }
    return rows;
}

json run_provenance(const std::string& path, const pl::TagFileCounts& t) {
    return {{"path", path},
            {"sha256", pl::file_sha256(path)},
            {"run_kind", pl::run_kind_name(t.header.run_kind)},
            {"n_trials", t.header.n_trials},
            {"n_records", t.header.n_records}};
}

void cmd_analyze(const std::string& input_path, const std::string& storage_path,
                 const std::string& noise_path, const std::string& out,
                 const pl::WindowConfig& windows, int max_sep) {
    const double t0 = now_s();
    const pl::TagFileCounts fin = pl::analyze_tag_file(input_path, windows, max_sep);
    const pl::TagFileCounts fst = pl::analyze_tag_file(storage_path, windows, max_sep);
    const pl::TagFileCounts fno = pl::analyze_tag_file(noise_path, windows, max_sep);

    if (fin.header.config_hash != fst.header.config_hash ||
        fin.header.config_hash != fno.header.config_hash)
        throw pl::LineageError("the three tag files were produced under different physics "
                               "configs; refusing to combine them");
    if (fin.header.run_kind != pl::RunKind::input_only)
        std::cerr << "warning: input file is kind=" << pl::run_kind_name(fin.header.run_kind)
                  << ", expected input_only\n";
    if (fst.header.run_kind != pl::RunKind::storage)
        std::cerr << "warning: storage file is kind=" << pl::run_kind_name(fst.header.run_kind)
                  << ", expected storage\n";
    if (fno.header.run_kind != pl::RunKind::noise_only)
        std::cerr << "warning: noise file is kind=" << pl::run_kind_name(fno.header.run_kind)
                  << ", expected noise_only\n";

    const pl::MemoryFigures f = pl::memory_figures(fin.counts, fst.counts, fno.counts);
    const bool deg = pl::degenerate(f);
    if (deg)
        std::cerr << "warning: efficiency figures are degenerate (no usable input/storage "
                     "contrast)\n";

    json j;
    j["schema_version"] = 1;
    j["figures"] = {{"p_in", ve(f.p_in)},
                    {"p_t", ve(f.p_t)},
                    {"p_s", ve(f.p_s)},
                    {"p_n", ve(f.p_n)},
                    {"p_s_raw", f.p_s_raw},
                    {"eta_wr", ve(f.eta_wr)},
                    {"eta_w", ve(f.eta_w)},
                    {"eta_r", ve(f.eta_r)},
                    {"snr", ve(f.snr)},
                    {"mu1", ve(f.mu1)},
                    {"s_over_t", ve(f.s_over_t)},
                    {"survival", ve(f.survival)},
                    {"clamped", f.clamped},
                    {"degenerate", deg}};
    j["g2"] = {{"input_run_input_window", g2_table(fin.counts.input, max_sep)},
               {"storage_run_stored_window", g2_table(fst.counts.stored, max_sep)}};
    j["runs"] = {{"input", run_provenance(input_path, fin)},
                 {"storage", run_provenance(storage_path, fst)},
                 {"noise", run_provenance(noise_path, fno)}};
    j["config_hash"] = pl::Sha256::hex(fin.header.config_hash);

    std::ofstream of = open_out(out);
    of << j.dump(2) << "\n";
    finish_out(of, out);

    std::cout << "analyze trials=" << fst.header.n_trials << " eta_wr=" << fmt(f.eta_wr.value, 4)
              << " snr=" << fmt(f.snr.value, 4) << " degenerate=" << (deg ? 1 : 0)
              << " wall_s=" << std::fixed << std::setprecision(3) << (now_s() - t0)
              << " out=" << out << "\n";
}

// ---- reproduce ---------------------------------------------------------------

// figure 2: source calibration curve plus simulated spot checks
void figure2(const std::string& dir, uint64_t trials, uint64_t seed,
             std::vector<std::string>& files) {
    pl::Scenario base = pl::preset_by_name("source-characterization");
    base.run.trials = trials ? trials : 1000000;

    {
        const std::string path = dir + "/fig2_curve.csv";
        std::ofstream f = open_out(path);
        f << "# generation probability and intrinsic g2(0) against the drive probe\n";
        f << "probe,p_gen,g2_0\n";
        const int N = 241;
        for (int i = 0; i < N; ++i) {
            const double x = base.source.probe_min +
                             (base.source.probe_max - base.source.probe_min) * (i + 0.5) / N;
            const pl::CalibrationPoint cp = pl::calibrate_source(base.source, x);
            f << fmt(x) << ',' << fmt(cp.p_gen) << ','
              << (cp.g2_defined ? fmt(cp.g2_0) : std::string("nan")) << "\n";
        }
        finish_out(f, path);
        files.push_back(path);
    }

    const std::vector<double> probes = {1.0, 1.7, 2.3878405, 3.2, 4.5};
    struct Row {
        double probe, p_true, g_true;
        pl::SourceEstimate est;
    };
    std::vector<Row> rows(probes.size());
    pl::parallel_for(probes.size(), [&](size_t i) {
        pl::Scenario s = base;
        s.source.probe_setting = probes[i];
        s.run.seed = seed + 10 + i;
        s.validate();
        const pl::RunWindowCounts counts = pl::simulate_counts(s);
        const double alpha = pl::input_alpha(s);
        const double dark_any =
            1.0 - std::exp(-2.0 * s.detection.dark_rate_hz *
                           (s.windows.input_hi - s.windows.input_lo));
        const pl::CalibrationPoint cp = pl::calibrate_source(s.source, probes[i]);
        rows[i] = {probes[i], cp.p_gen, cp.g2_0,
                   pl::estimate_source(counts.input, alpha, dark_any)};
    });

    const std::string path = dir + "/fig2_probes.csv";
    std::ofstream f = open_out(path);
    f << "# simulated input-only runs analyzed back to the source rates\n";
    f << "# trials_per_probe=" << base.run.trials << "\n";
    f << "probe,p_gen_true,g2_true,p_gen_est,p_gen_err,g2_est,g2_err\n";
    for (const Row& r : rows)
        f << fmt(r.probe) << ',' << fmt(r.p_true) << ',' << fmt(r.g_true) << ','
          << fmt(r.est.p_gen.value) << ',' << fmt(r.est.p_gen.error) << ','
          << fmt(r.est.g2_0.value) << ',' << fmt(r.est.g2_0.error) << "\n";
    finish_out(f, path);
    files.push_back(path);
}

void write_histogram(const std::string& path, const std::vector<uint64_t>& h, double bin,
                     uint64_t trials, std::vector<std::string>& files) {
    std::ofstream f = open_out(path);
    f << "# click arrival histogram, " << fmt(bin * 1e9, 6) << " ns bins, " << trials
      << " trials\n";
    f << "bin_start_ps,count\n";
    for (size_t i = 0; i < h.size(); ++i)
        f << uint64_t(std::llround(double(i) * bin * 1e12)) << ',' << h[i] << "\n";
    finish_out(f, path);
    files.push_back(path);
}

// figure 3: the run trio as histograms, then efficiency against storage time
void figure3(const std::string& dir, uint64_t trials, uint64_t seed,
             std::vector<std::string>& files) {
    const uint64_t n = trials ? trials : 500000;
    pl::Scenario input = pl::preset_by_name("memory-trio-input");
    pl::Scenario noise = pl::preset_by_name("memory-trio-noise");
    pl::Scenario trio = pl::preset_by_name("memory-trio");
    input.run.trials = noise.run.trials = trio.run.trials = n;
    input.run.seed = seed + 1;
    noise.run.seed = seed + 2;
    trio.run.seed = seed + 3;

    const double bin = 20e-9;
    write_histogram(dir + "/fig3_hist_input.csv", pl::click_histogram(input, bin), bin, n, files);
    write_histogram(dir + "/fig3_hist_storage.csv", pl::click_histogram(trio, bin), bin, n, files);
    write_histogram(dir + "/fig3_hist_noise.csv", pl::click_histogram(noise, bin), bin, n, files);

    // sweep only the storage-decay argument; timeline and windows stay put
    std::vector<double> t_us;
    for (int i = 0; i < 12; ++i) t_us.push_back(5.0 * i);
    const pl::RunWindowCounts c_in = pl::simulate_counts(input);
    const pl::RunWindowCounts c_no = pl::simulate_counts(noise);
    std::vector<pl::ValueWithError> eta(t_us.size());
    pl::parallel_for(t_us.size(), [&](size_t i) {
        pl::Scenario s = trio;
        s.t_store = t_us[i] * 1e-6;
        s.run.seed = seed + 100 + i;
        eta[i] = pl::memory_figures(c_in, pl::simulate_counts(s), c_no).eta_wr;
    });

    std::vector<double> t_s(t_us.size()), y(t_us.size()), sig(t_us.size());
    for (size_t i = 0; i < t_us.size(); ++i) {
        t_s[i] = t_us[i] * 1e-6;
        y[i] = eta[i].value;
        sig[i] = eta[i].error;
    }
    const pl::LifetimeFit fit = pl::fit_lifetime(t_s, y, sig);

    const std::string path = dir + "/fig3_lifetime.csv";
    std::ofstream f = open_out(path);
    f << "# end-to-end efficiency against storage time, " << n << " trials per point\n";
    f << "# fit_tau_us=" << fmt(fit.tau * 1e6, 6) << " fit_tau_err_us=" << fmt(fit.tau_err * 1e6, 4)
      << " fit_eta0=" << fmt(fit.eta0, 6) << " model="
      << (fit.has_oscillation ? "modulated" : "plain") << "\n";
    f << "t_store_us,eta_wr,eta_wr_err\n";
    for (size_t i = 0; i < t_us.size(); ++i)
        f << fmt(t_us[i]) << ',' << fmt(y[i]) << ',' << fmt(sig[i]) << "\n";
    finish_out(f, path);
    files.push_back(path);
}

// figure 4: storage efficiency against write-control detuning
void figure4(const std::string& dir, std::vector<std::string>& files) {
    pl::Scenario s = pl::preset_by_name("detuning-line");
    const std::vector<double> axis = s.sweep.values();
    const pl::SampledEnvelope env = pl::make_envelope(s);
    const std::vector<pl::SweepPoint> pts =
        pl::sweep_detuning(axis, env, s.write, s.read, s.t_store, s.grid.read_span, s.memory);

    const std::string path = dir + "/fig4_detuning.csv";
    std::ofstream f = open_out(path);
    f << "# solver sweep of the write control's two-photon detuning offset\n";
    f << "detuning_rad_s,detuning_mhz,eta_w,eta_r,eta_wr\n";
    for (const pl::SweepPoint& p : pts)
        f << fmt(p.parameter) << ',' << fmt(p.parameter / (2e6 * M_PI)) << ',' << fmt(p.eta_w)
          << ',' << fmt(p.eta_r) << ',' << fmt(p.eta_wr) << "\n";
    finish_out(f, path);
    files.push_back(path);
}

// figure 5: the write beam-splitter curve against control power
void figure5(const std::string& dir, std::vector<std::string>& files) {
    pl::Scenario s = pl::preset_by_name("beam-splitter");
    const std::vector<double> powers = s.sweep.values();
    const pl::SampledEnvelope env = pl::make_envelope(s);
    const std::vector<pl::SweepPoint> pts =
        pl::sweep_write_power(powers, env, s.write, s.read, s.t_store, s.grid.read_span, s.memory);

    const std::string path = dir + "/fig5_power.csv";
    std::ofstream f = open_out(path);
    f << "# solver sweep of write power (1.0 = calibration point)\n";
    f << "power,eta_w,eta_r,eta_wr,s_over_t,survival\n";
    for (const pl::SweepPoint& p : pts)
        f << fmt(p.parameter) << ',' << fmt(p.eta_w) << ',' << fmt(p.eta_r) << ','
          << fmt(p.eta_wr) << ',' << fmt(p.s_over_t) << ',' << fmt(p.survival) << "\n";
    finish_out(f, path);
    files.push_back(path);
}

void write_shaped(const std::string& path, const pl::ShapedReadout& sh,
                  const std::vector<double>& target, double t0, double dt,
                  std::vector<std::string>& files) {
    double tsum = 0, asum = 0;
    for (double v : target) tsum += v * dt;
    for (double v : sh.achieved) asum += v * dt;
    std::ofstream f = open_out(path);
    f << "# shaped retrieval against its target, both normalized as densities\n";
    f << "# mismatch_l2=" << fmt(sh.mismatch, 6) << "\n";
    f << "t_s,target_density,achieved_density\n";
    for (size_t i = 0; i < target.size(); ++i)
        f << fmt(t0 + double(i) * dt) << ',' << fmt(tsum > 0 ? target[i] / tsum : 0.0) << ','
          << fmt(asum > 0 ? sh.achieved[i] / asum : 0.0) << "\n";
    finish_out(f, path);
    files.push_back(path);
}

// figure 6: retrieved pulse width against read power, plus shaped readout
void figure6(const std::string& dir, std::vector<std::string>& files) {
    pl::Scenario s = pl::preset_by_name("waveshape");
    const pl::SampledEnvelope env = pl::make_envelope(s);
    const pl::WriteResult wr = pl::solve_write(env, s.write, s.memory);
    const std::vector<pl::cplx> spin = pl::apply_storage_decay(wr.spin, s.t_store, s.memory);

    const std::vector<double> powers = s.sweep.values();
    const std::vector<pl::ReadPowerPoint> pts =
        pl::sweep_read_power(powers, spin, s.read, s.grid.read_span, s.memory);
    {
        const std::string path = dir + "/fig6_fwhm.csv";
        std::ofstream f = open_out(path);
        f << "# retrieved intensity FWHM against read power (1.0 = calibration point)\n";
        f << "power,fwhm_ns,eta_r\n";
        for (const pl::ReadPowerPoint& p : pts)
            f << fmt(p.power) << ',' << fmt(p.fwhm * 1e9) << ',' << fmt(p.eta_r) << "\n";
        finish_out(f, path);
        files.push_back(path);
    }

    const double t0 = s.read.t_start;
    const double dt = 1e-9;
    const size_t n = 700;
    // the target is in absolute units; ask for half the stored excitation,
    // well inside the retrievable bound
    const auto scale_to_budget = [&](std::vector<double> target) {
        double total = 0;
        for (double v : target) total += v * dt;
        const double want = 0.5 * pl::spin_norm_of(spin);
        for (double& v : target) v *= want / total;
        return target;
    };
    {
        const std::vector<double> target =
            scale_to_budget(pl::envelope_target(s.source.envelope, t0, dt, n, t0 + 260e-9));
        const pl::ShapedReadout sh = pl::shape_readout(target, t0, dt, spin, s.memory);
        write_shaped(dir + "/fig6_shaped_waveform.csv", sh, target, t0, dt, files);
    }
    {
        const std::vector<double> target = scale_to_budget(pl::twobin_target(
            t0, dt, n, t0 + 80e-9, t0 + 180e-9, t0 + 300e-9, t0 + 400e-9, 0.5));
        const pl::ShapedReadout sh = pl::shape_readout(target, t0, dt, spin, s.memory);
        write_shaped(dir + "/fig6_shaped_twobin.csv", sh, target, t0, dt, files);
    }
}

void cmd_reproduce(int figure, const std::string& out_dir, uint64_t trials, uint64_t seed) {
    if (figure < 2 || figure > 6)
        throw pl::ConfigError("unknown figure " + std::to_string(figure) + " (known: 2..6)");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw pl::IoError("cannot create directory '" + out_dir + "': " + ec.message());

    const double t0 = now_s();
    std::vector<std::string> files;
    switch (figure) {
        case 2: figure2(out_dir, trials, seed, files); break;
        case 3: figure3(out_dir, trials, seed, files); break;
        case 4: figure4(out_dir, files); break;
        case 5: figure5(out_dir, files); break;
        case 6: figure6(out_dir, files); break;
    }
    std::cout << "reproduce figure=" << figure << " files=" << files.size()
              << " wall_s=" << std::fixed << std::setprecision(3) << (now_s() - t0)
              << " out=" << out_dir << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulator and analysis toolkit for an ensemble photon memory"};
    app.require_subcommand(1);

    auto* c_presets = app.add_subcommand("presets", "list built-in configs, or dump one as JSON");
    std::string preset_name;
    c_presets->add_option("name", preset_name, "preset to dump");

    auto* c_sim = app.add_subcommand("simulate", "generate a detector tag stream");
    std::string sim_cfg, sim_out, sim_format;
    uint64_t sim_trials = 0, sim_seed = 0;
    c_sim->add_option("--config", sim_cfg, "preset name or config JSON path")->required();
    c_sim->add_option("--out", sim_out, "output tag file (.qtt binary, .csv text)")->required();
    auto* o_trials = c_sim->add_option("--trials", sim_trials, "override run.trials");
    auto* o_seed = c_sim->add_option("--seed", sim_seed, "override run.seed");
    c_sim->add_option("--format", sim_format, "qtt or csv; must match the --out extension")
        ->check(CLI::IsMember({"qtt", "csv"}));

    auto* c_an = app.add_subcommand("analyze", "turn a run trio into efficiency figures");
    std::string an_input, an_storage, an_noise, an_out, an_cfg;
    int an_max_sep = 8;
    c_an->add_option("input", an_input, "input-only reference tag file")->required();
    c_an->add_option("storage", an_storage, "storage run tag file")->required();
    c_an->add_option("noise", an_noise, "noise-only run tag file")->required();
    c_an->add_option("--out", an_out, "output JSON path")->required();
    c_an->add_option("--config", an_cfg, "take analysis windows from this config");
    c_an->add_option("--max-sep", an_max_sep, "largest trial separation for g2(n)")
        ->check(CLI::Range(1, 15));

    auto* c_rep = app.add_subcommand("reproduce", "rebuild a reference figure as CSV");
    int rep_fig = 0;
    std::string rep_out;
    uint64_t rep_trials = 0, rep_seed = 1;
    c_rep->add_option("figure", rep_fig, "figure number, 2..6")->required();
    c_rep->add_option("--out", rep_out, "output directory")->required();
    c_rep->add_option("--trials", rep_trials, "override trials per simulated point");
    c_rep->add_option("--seed", rep_seed, "seed for simulated points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*c_presets) {
            cmd_presets(preset_name);
        } else if (*c_sim) {
            pl::Scenario s = pl::load_scenario(sim_cfg);
            if (o_trials->count()) s.run.trials = sim_trials;
            if (o_seed->count()) s.run.seed = sim_seed;
            cmd_simulate(std::move(s), sim_out, sim_format);
        } else if (*c_an) {
            pl::WindowConfig windows;
            if (!an_cfg.empty()) windows = pl::load_scenario(an_cfg).windows;
            windows.validate();
            cmd_analyze(an_input, an_storage, an_noise, an_out, windows, an_max_sep);
        } else if (*c_rep) {
            cmd_reproduce(rep_fig, rep_out, rep_trials, rep_seed);
        }
    } catch (const pl::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const pl::PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const pl::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const pl::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const pl::FitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const pl::InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 6;
    } catch (const pl::LineageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 7;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#pragma once

// Adiabatic two-mode dynamics of a ladder/lambda ensemble memory after
// elimination of the intermediate state. Co-moving frame, medium rescaled to
// z in [0, 1], t in seconds, all rates angular. With D = gamma + i*delta and
// c = sqrt(d * gamma):
//
//   dE/dz = -(d*gamma*E + c*Omega(t)*S) / D
//   dS/dt = -(gamma_s + i*delta2_eff)*S - (c*Omega(t)*E + |Omega(t)|^2*S) / D
//
// E(z, t) is the slowly varying field with unit input flux norm
// (integral |E(0,t)|^2 dt = 1), S(z, t) the spin wave with integral |S|^2 dz
// equal to the stored excitation fraction. Omega(t) is the (real) control
// Rabi amplitude. The |Omega|^2 term carries both the power-induced
// scattering (real part) and the light shift (imaginary part); with
// stark_compensation on, the control detuning tracks the plateau light shift
// |Omega_pk|^2 * delta / (gamma^2 + delta^2), i.e. the control is kept on the
// dressed two-photon resonance the way one tunes up the real experiment.
// delta2 and any pulse detuning offset are then measured from that dressed
// resonance.
//
// Scheme: method of lines. S lives on an nz+1 node grid and advances with
// classic RK4; at every stage the field is re-marched across the medium with
// an implicit trapezoidal step (the E equation is linear in E, so the step is
// a closed-form update). Output field samples are recorded at z = 1.
//
// Checks worth knowing about: with gamma_s = 0 and gamma -> 0 the scheme
// conserves integral |E_out|^2 + integral |S|^2 (photon bookkeeping), and the
// end-to-end efficiency factorizes exactly as eta_w * decay * eta_r because
// the read stage normalizes by the spin norm it was handed.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"
#include "envelope.hpp"

namespace photonlab {

using cplx = std::complex<double>;

struct MemoryConfig {
    double optical_depth = 5.0;
    double delta = -TWO_PI * 52.0e6;  // rad/s, one-photon detuning
    double gamma = TWO_PI * 3.03e6;   // rad/s, intermediate-state HWHM
    double gamma_s = 0.0;             // rad/s, spin-wave decay during the solve
    double delta2 = 0.0;              // rad/s, two-photon detuning
    double tau_mem = 30e-6;           // s, Gaussian 1/e storage time
    double osc_amplitude = 0.0;       // residual-field beat contrast, 0..0.5
    double osc_omega = 0.0;           // rad/s, beat frequency
    int nz = 64;
    double dt = 0.5e-9;               // s
    bool stark_compensation = true;

    void validate() const {
        if (optical_depth < 0) throw ConfigError("memory: optical_depth must be >= 0");
        if (!(gamma > 0)) throw ConfigError("memory: gamma must be > 0");
        if (gamma_s < 0) throw ConfigError("memory: gamma_s must be >= 0");
        if (nz < 32) throw ConfigError("memory: nz must be >= 32, got " + std::to_string(nz));
        if (!(dt > 0)) throw ConfigError("memory: dt must be > 0");
        if (dt * std::abs(delta) >= 0.2)
            throw ConfigError("memory: dt*|delta| = " + std::to_string(dt * std::abs(delta)) +
                              " must stay below 0.2, refine the time step");
        if (!(tau_mem > 0)) throw ConfigError("memory: tau_mem must be > 0");
        if (osc_amplitude < 0 || osc_amplitude > 0.5)
            throw ConfigError("memory: osc_amplitude must be in [0, 0.5]");
    }
};

struct ControlPulse {
    enum class Shape { square, table };
    Shape shape = Shape::square;
    double peak_rabi = 0;   // rad/s at power_scale = 1
    double t_start = 0;     // s
    double duration = 0;    // s
    double edge = 10e-9;    // s, raised-cosine edge of the square shape
    double power_scale = 1; // multiplies |Omega|^2
    double detuning_offset = 0; // rad/s, added to delta2 while this pulse drives
    std::vector<double> table_t;     // table shape: sample times
    std::vector<double> table_omega; // table shape: Omega >= 0 at those times

    double amplitude_scale() const { return std::sqrt(power_scale); }

    double peak_effective() const {
        if (shape == Shape::square) return peak_rabi * amplitude_scale();
        double m = 0;
        for (double w : table_omega) m = std::max(m, w);
        return m * amplitude_scale();
    }

    double rabi(double t) const {
        if (shape == Shape::square) {
            const double rel = t - t_start;
            if (rel <= 0 || rel >= duration) return 0;
            double env = 1;
            if (rel < edge)
                env = 0.5 * (1 - std::cos(PI * rel / edge));
            else if (rel > duration - edge)
                env = 0.5 * (1 - std::cos(PI * (duration - rel) / edge));
            return peak_rabi * amplitude_scale() * env;
        }
        // piecewise-linear table, zero outside
        if (table_t.size() < 2 || t <= table_t.front() || t >= table_t.back()) return 0;
        const auto it = std::upper_bound(table_t.begin(), table_t.end(), t);
        const size_t hi = size_t(it - table_t.begin());
        const double t0 = table_t[hi - 1], t1 = table_t[hi];
        const double w0 = table_omega[hi - 1], w1 = table_omega[hi];
        const double f = (t1 > t0) ? (t - t0) / (t1 - t0) : 0.5;
        return (w0 + f * (w1 - w0)) * amplitude_scale();
    }

    double t_end() const {
        if (shape == Shape::square) return t_start + duration;
        return table_t.empty() ? t_start : table_t.back();
    }

    ControlPulse with_power(double scale) const {
        ControlPulse p = *this;
        p.power_scale *= scale;
        return p;
    }

    void validate() const {
        if (power_scale < 0) throw ConfigError("pulse: power_scale must be >= 0");
        if (shape == Shape::square) {
            if (peak_rabi < 0) throw ConfigError("pulse: peak_rabi must be >= 0");
            if (duration < 0) throw ConfigError("pulse: duration must be >= 0");
            if (edge < 0 || 2 * edge > duration + 1e-15)
                if (duration > 0) throw ConfigError("pulse: edges do not fit in the duration");
        } else {
            if (table_t.size() != table_omega.size() || table_t.size() < 2)
                throw ConfigError("pulse: table needs >= 2 matching samples");
            for (size_t i = 1; i < table_t.size(); ++i)
                if (!(table_t[i] > table_t[i - 1]))
                    throw ConfigError("pulse: table times must increase");
            for (double w : table_omega)
                if (w < 0) throw ConfigError("pulse: table Rabi values must be >= 0");
        }
    }
};

// plateau light shift of the two-photon line for a given drive strength
inline double stark_shift(const ControlPulse& pulse, const MemoryConfig& cfg) {
    const double w = pulse.peak_effective();
    return w * w * cfg.delta / (cfg.gamma * cfg.gamma + cfg.delta * cfg.delta);
}

inline double effective_delta2(const ControlPulse& pulse, const MemoryConfig& cfg) {
    double d2 = cfg.delta2 + pulse.detuning_offset;
    if (cfg.stark_compensation) d2 += stark_shift(pulse, cfg);
    return d2;
}

struct PropagationResult {
    std::vector<cplx> spin;        // S(z) at the final time, nz+1 nodes
    double t0 = 0, dt = 0;
    std::vector<cplx> field_out;   // E(z=1, t) samples
    double energy_in = 0;          // integral |E(0,t)|^2 dt over the span
    double energy_out = 0;         // integral |E(1,t)|^2 dt
    double spin_norm = 0;          // integral |S|^2 dz at the final time

    std::vector<double> output_intensity() const {
        std::vector<double> out(field_out.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::norm(field_out[i]);
        return out;
    }
};

inline double spin_norm_of(const std::vector<cplx>& s) {
    if (s.size() < 2) return 0;
    const double h = 1.0 / double(s.size() - 1);
    double acc = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        const double w = (i == 0 || i + 1 == s.size()) ? 0.5 : 1.0;
        acc += w * std::norm(s[i]);
    }
    return acc * h;
}

namespace detail {

// trapezoid integral of |f|^2 over a uniform time grid
inline double flux_energy(const std::vector<cplx>& f, double dt) {
    double acc = 0;
    for (size_t i = 0; i < f.size(); ++i) {
        const double w = (i == 0 || i + 1 == f.size()) ? 0.5 : 1.0;
        acc += w * std::norm(f[i]);
    }
    return acc * dt;
}

class TwoModeSolver {
  public:
    TwoModeSolver(const MemoryConfig& cfg, double delta2_eff) : cfg_(cfg) {
        cfg.validate();
        nz_ = size_t(cfg.nz);
        h_ = 1.0 / double(nz_);
        D_ = cplx(cfg.gamma, cfg.delta);
        a_ = -cfg.optical_depth * cfg.gamma / D_;
        c_ = std::sqrt(cfg.optical_depth * cfg.gamma);
        decay_ = cplx(cfg.gamma_s, delta2_eff);
        E_.assign(nz_ + 1, cplx(0));
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &tmp_}) v->assign(nz_ + 1, cplx(0));
    }

    // E_in: boundary field at z=0 as a function of t; omega: control Rabi(t)
    PropagationResult run(std::vector<cplx> S, const std::function<cplx(double)>& E_in,
                          const std::function<double(double)>& omega, double t0, double t1) {
        if (S.size() != nz_ + 1)
            throw PreconditionError("solver: spin grid has " + std::to_string(S.size()) +
                                    " nodes, expected " + std::to_string(nz_ + 1));
        const double dt = cfg_.dt;
        const size_t nt = size_t(std::ceil((t1 - t0) / dt - 1e-9));
        PropagationResult res;
        res.t0 = t0;
        res.dt = dt;
        res.field_out.resize(nt + 1);

        std::vector<cplx> in_samples(nt + 1);
        double ein_energy = 0;
        for (size_t n = 0; n <= nt; ++n) in_samples[n] = E_in(t0 + double(n) * dt);
        ein_energy = flux_energy(in_samples, dt);

        for (size_t n = 0; n < nt; ++n) {
            const double t = t0 + double(n) * dt;
            const double w0 = omega(t), wh = omega(t + 0.5 * dt), w1 = omega(t + dt);
            const cplx e0 = in_samples[n];
            const cplx eh = E_in(t + 0.5 * dt);
            const cplx e1 = in_samples[n + 1];

            march(S, w0, e0);
            res.field_out[n] = E_[nz_];
            deriv(S, w0, k1_);

            axpy(S, 0.5 * dt, k1_, tmp_);
            march(tmp_, wh, eh);
            deriv(tmp_, wh, k2_);

            axpy(S, 0.5 * dt, k2_, tmp_);
            march(tmp_, wh, eh);
            deriv(tmp_, wh, k3_);

            axpy(S, dt, k3_, tmp_);
            march(tmp_, w1, e1);
            deriv(tmp_, w1, k4_);

            for (size_t k = 0; k <= nz_; ++k)
                S[k] += dt / 6.0 * (k1_[k] + 2.0 * k2_[k] + 2.0 * k3_[k] + k4_[k]);
        }
        march(S, omega(t0 + double(nt) * dt), in_samples[nt]);
        res.field_out[nt] = E_[nz_];

        res.energy_in = ein_energy;
        res.energy_out = flux_energy(res.field_out, dt);
        res.spin_norm = spin_norm_of(S);
        res.spin = std::move(S);
        return res;
    }

  private:
    // implicit trapezoidal march of the linear field equation across z,
    // E' = a*E + b(z) with b = -(c*omega/D) * S
    void march(const std::vector<cplx>& S, double omega, cplx e_boundary) {
        const cplx bcoef = -(c_ * omega) / D_;
        const cplx num = 1.0 + 0.5 * h_ * a_;
        const cplx den = 1.0 / (1.0 - 0.5 * h_ * a_);
        E_[0] = e_boundary;
        for (size_t k = 0; k < nz_; ++k) {
            const cplx bsum = bcoef * (S[k] + S[k + 1]);
            E_[k + 1] = (num * E_[k] + 0.5 * h_ * bsum) * den;
        }
    }

    void deriv(const std::vector<cplx>& S, double omega, std::vector<cplx>& out) const {
        const cplx drive = -(c_ * omega) / D_;
        const cplx self = -decay_ - (omega * omega) / D_;
        for (size_t k = 0; k <= nz_; ++k) out[k] = self * S[k] + drive * E_[k];
    }

    static void axpy(const std::vector<cplx>& base, double s, const std::vector<cplx>& dir,
                     std::vector<cplx>& out) {
        for (size_t k = 0; k < base.size(); ++k) out[k] = base[k] + s * dir[k];
    }

    MemoryConfig cfg_;
    size_t nz_;
    double h_;
    cplx D_, a_, decay_;
    double c_;
    std::vector<cplx> E_, k1_, k2_, k3_, k4_, tmp_;
};

} // namespace detail

struct WriteResult {
    std::vector<cplx> spin;                 // S(z) after the write window
    double t0 = 0, dt = 0;
    std::vector<double> transmitted_intensity; // |E(1,t)|^2 on the write grid
    double eta_w = 0;       // stored fraction, integral |S|^2 dz
    double transmitted = 0; // leaked fraction, integral |E(1,t)|^2 dt
    double loss = 0;        // scattered fraction, 1 - eta_w - transmitted
};

inline WriteResult solve_write(const SampledEnvelope& e_in, const ControlPulse& pulse,
                               const MemoryConfig& cfg) {
    cfg.validate();
    pulse.validate();
    const double n2 = e_in.norm2();
    if (std::abs(n2 - 1.0) > 1e-6)
        throw PreconditionError("solve_write: input envelope norm^2 is " + std::to_string(n2) +
                                ", expected 1 within 1e-6");
    const double t0 = e_in.t0;
    const double t1 = std::max(e_in.time(e_in.size() - 1), pulse.t_end() + 5 * cfg.dt);

    auto e_of_t = [&](double t) -> cplx {
        const double x = (t - e_in.t0) / e_in.dt;
        if (x <= 0 || x >= double(e_in.size() - 1)) {
            // clamp to end samples (envelope is built to be negligible there)
            if (x <= 0) return cplx(e_in.amp.front(), 0);
            return cplx(e_in.amp.back(), 0);
        }
        const size_t i = size_t(x);
        const double f = x - double(i);
        return cplx(e_in.amp[i] * (1 - f) + e_in.amp[i + 1] * f, 0);
    };
    auto omega = [&](double t) { return pulse.rabi(t); };

    detail::TwoModeSolver solver(cfg, effective_delta2(pulse, cfg));
    std::vector<cplx> s0(size_t(cfg.nz) + 1, cplx(0));
    PropagationResult prop = solver.run(std::move(s0), e_of_t, omega, t0, t1);

    WriteResult w;
    w.t0 = prop.t0;
    w.dt = prop.dt;
    w.transmitted_intensity = prop.output_intensity();
    // normalize by the energy actually fed in on this grid so bookkeeping is
    // grid-consistent
    const double ein = prop.energy_in;
    w.eta_w = prop.spin_norm / ein;
    w.transmitted = prop.energy_out / ein;
    w.loss = 1.0 - w.eta_w - w.transmitted;
    w.spin = std::move(prop.spin);
    return w;
}

struct ReadResult {
    double t0 = 0, dt = 0;
    std::vector<double> output_intensity; // |E(1,t)|^2, absolute (units 1/s times stored fraction)
    std::vector<cplx> field_out;
    std::vector<cplx> spin_final;
    double eta_r = 0;        // retrieved fraction of the spin norm handed in
    double output_energy = 0;
    double spin_in = 0;
};

inline ReadResult solve_read(const std::vector<cplx>& spin, const ControlPulse& pulse,
                             const MemoryConfig& cfg, double t0, double t1) {
    cfg.validate();
    pulse.validate();
    const double sn = spin_norm_of(spin);
    if (!(sn > 0)) throw PreconditionError("solve_read: spin wave is empty");
    auto zero_in = [](double) { return cplx(0); };
    auto omega = [&](double t) { return pulse.rabi(t); };
    detail::TwoModeSolver solver(cfg, effective_delta2(pulse, cfg));
    PropagationResult prop = solver.run(spin, zero_in, omega, t0, t1);
    ReadResult r;
    r.t0 = prop.t0;
    r.dt = prop.dt;
    r.output_intensity = prop.output_intensity();
    r.field_out = std::move(prop.field_out);
    r.spin_final = std::move(prop.spin);
    r.spin_in = sn;
    r.output_energy = prop.energy_out;
    r.eta_r = prop.energy_out / sn;
    return r;
}

// in-storage decay: efficiency factor exp(-t^2/tau^2) * (1 - A + A*cos(w t)),
// applied to the spin amplitude as its square root
inline double storage_efficiency_factor(double t_store, const MemoryConfig& cfg) {
    const double g = std::exp(-(t_store * t_store) / (cfg.tau_mem * cfg.tau_mem));
    const double osc = 1.0 - cfg.osc_amplitude + cfg.osc_amplitude * std::cos(cfg.osc_omega * t_store);
    return g * osc;
}

inline std::vector<cplx> apply_storage_decay(const std::vector<cplx>& spin, double t_store,
                                             const MemoryConfig& cfg) {
    if (t_store < 0) throw PreconditionError("apply_storage_decay: t_store must be >= 0");
    const double f = storage_efficiency_factor(t_store, cfg);
    const double amp = std::sqrt(std::max(f, 0.0));
    std::vector<cplx> out(spin.size());
    for (size_t i = 0; i < spin.size(); ++i) out[i] = spin[i] * amp;
    return out;
}

// full write -> idle -> read pass; the idle gap is not time-stepped, the
// decay factor stands in for it
struct StorageSolution {
    WriteResult write;
    ReadResult read;
    double decay_factor = 1;
    double eta_w = 0, eta_r = 0, eta_wr = 0;
};

inline StorageSolution run_storage(const SampledEnvelope& e_in, const ControlPulse& write,
                                   const ControlPulse& read, double t_store, double read_span,
                                   const MemoryConfig& cfg) {
    StorageSolution sol;
    sol.write = solve_write(e_in, write, cfg);
    sol.decay_factor = storage_efficiency_factor(t_store, cfg);
    std::vector<cplx> spin = apply_storage_decay(sol.write.spin, t_store, cfg);
    const double read_t0 = read.t_start - 5 * cfg.dt;
    sol.read = solve_read(spin, read, cfg, read_t0, read_t0 + read_span);
    sol.eta_w = sol.write.eta_w;
    sol.eta_r = sol.read.eta_r;
    sol.eta_wr = sol.eta_w * sol.decay_factor * sol.eta_r;
    return sol;
}

struct SweepPoint {
    double parameter = 0;
    double eta_w = 0;
    double eta_r = 0;     // NaN when undefined (nothing stored)
    double eta_wr = 0;
    double s_over_t = 0;  // +inf sentinel when eta_w == 1
    double survival = 1;
    bool eta_r_defined = true;
    bool s_over_t_finite = true;
};

inline SweepPoint make_sweep_point(double param, double eta_w, double eta_r_num, double eta_wr) {
    SweepPoint p;
    p.parameter = param;
    p.eta_w = eta_w;
    p.eta_wr = eta_wr;
    if (eta_w > 0) {
        p.eta_r = eta_r_num;
    } else {
        p.eta_r = std::numeric_limits<double>::quiet_NaN();
        p.eta_r_defined = false;
    }
    const double denom = 1.0 - eta_w;
    if (denom > 0) {
        p.s_over_t = eta_wr / denom;
    } else {
        p.s_over_t = std::numeric_limits<double>::infinity();
        p.s_over_t_finite = false;
    }
    p.survival = eta_wr + (1.0 - eta_w);
    return p;
}

inline std::vector<SweepPoint> sweep_write_power(const std::vector<double>& powers,
                                                 const SampledEnvelope& e_in,
                                                 const ControlPulse& write, const ControlPulse& read,
                                                 double t_store, double read_span,
                                                 const MemoryConfig& cfg) {
    std::vector<SweepPoint> out;
    out.reserve(powers.size());
    for (double p : powers) {
        if (p < 0) throw PreconditionError("sweep_write_power: power must be >= 0");
        if (p == 0 || write.peak_effective() == 0) {
            out.push_back(make_sweep_point(p, 0.0, 0.0, 0.0)); // pure transmission
            continue;
        }
        StorageSolution sol = run_storage(e_in, write.with_power(p), read, t_store, read_span, cfg);
        out.push_back(make_sweep_point(p, sol.eta_w, sol.eta_r, sol.eta_wr));
    }
    return out;
}

// detuning of the write control relative to the (dressed) two-photon
// resonance; read control stays at the calibration point
inline std::vector<SweepPoint> sweep_detuning(const std::vector<double>& delta2_axis,
                                              const SampledEnvelope& e_in, const ControlPulse& write,
                                              const ControlPulse& read, double t_store,
                                              double read_span, const MemoryConfig& cfg) {
    std::vector<SweepPoint> out;
    out.reserve(delta2_axis.size());
    for (double d2 : delta2_axis) {
        ControlPulse w = write;
        w.detuning_offset += d2;
        StorageSolution sol = run_storage(e_in, w, read, t_store, read_span, cfg);
        out.push_back(make_sweep_point(d2, sol.eta_w, sol.eta_r, sol.eta_wr));
    }
    return out;
}

struct ReadPowerPoint {
    double power = 0;
    double fwhm = 0;
    double eta_r = 0;
    ReadResult result;
};

inline std::vector<ReadPowerPoint> sweep_read_power(const std::vector<double>& powers,
                                                    const std::vector<cplx>& spin,
                                                    const ControlPulse& read, double span_cap,
                                                    const MemoryConfig& cfg) {
    std::vector<ReadPowerPoint> out;
    out.reserve(powers.size());
    for (double p : powers) {
        if (!(p > 0)) throw PreconditionError("sweep_read_power: powers must be > 0");
        ControlPulse r = read.with_power(p);
        const double t0 = r.t_start - 5 * cfg.dt;
        ReadResult res = solve_read(spin, r, cfg, t0, t0 + span_cap);
        ReadPowerPoint pt;
        pt.power = p;
        pt.fwhm = fwhm_of_intensity(res.output_intensity, res.dt);
        pt.eta_r = res.eta_r;
        pt.result = std::move(res);
        out.push_back(std::move(pt));
    }
    return out;
}

// --- shaped readout ---------------------------------------------------------
//
// Target |E_out(t)|^2 profile -> control |Omega(t)|^2. Seed from the drained-
// reservoir rate rule |Omega(t)|^2 proportional to q(t) / (1 - f * int_0^t q),
// then re-solve and correct multiplicatively until the normalized L2 mismatch
// of the achieved intensity drops below tol.

struct ShapedReadout {
    ControlPulse pulse;                 // table pulse realizing the target
    std::vector<double> achieved;      // |E_out(t)|^2 on the target grid
    double mismatch = 1;               // normalized L2 distance, shapes as densities
    int iterations = 0;
    bool converged = false;
    double eta_r_max = 0;              // retrievable bound used for feasibility
};

namespace detail {

inline double density_mismatch(const std::vector<double>& a, const std::vector<double>& b,
                               double dt) {
    double ia = 0, ib = 0;
    for (double v : a) ia += v;
    for (double v : b) ib += v;
    ia *= dt;
    ib *= dt;
    if (!(ia > 0) || !(ib > 0)) return 1.0;
    double num = 0, den = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] / ia, db = b[i] / ib;
        num += (da - db) * (da - db);
        den += db * db;
    }
    return std::sqrt(num / den);
}

} // namespace detail

inline ShapedReadout shape_readout(const std::vector<double>& target_intensity, double target_t0,
                                   double target_dt, const std::vector<cplx>& spin,
                                   const MemoryConfig& cfg, double tol = 0.05, int max_iter = 20) {
    if (target_intensity.size() < 8)
        throw PreconditionError("shape_readout: target grid too coarse");
    for (double v : target_intensity)
        if (v < 0) throw PreconditionError("shape_readout: target intensity must be >= 0");
    const double sn = spin_norm_of(spin);
    if (!(sn > 0)) throw PreconditionError("shape_readout: spin wave is empty");

    double target_total = 0;
    for (double v : target_intensity) target_total += v;
    target_total *= target_dt;
    if (!(target_total > 0)) throw PreconditionError("shape_readout: target has no energy");

    // probe the retrievable bound with a strong square read over the window
    const double span = double(target_intensity.size() - 1) * target_dt;
    ShapedReadout out;
    {
        ControlPulse strong;
        strong.shape = ControlPulse::Shape::square;
        strong.peak_rabi = std::sqrt(0.12 * std::abs(cfg.delta) / cfg.dt);
        strong.t_start = target_t0;
        strong.duration = span;
        strong.edge = std::min(10e-9, span / 8);
        ReadResult probe = solve_read(spin, strong, cfg, target_t0 - 2 * cfg.dt, target_t0 + span);
        out.eta_r_max = probe.eta_r;
    }
    const double budget = out.eta_r_max * sn;
    if (target_total > budget * 1.0001)
        throw InfeasibleError("shape_readout: target energy " + std::to_string(target_total) +
                              " exceeds the retrievable bound " + std::to_string(budget));

    // seed pulse from the rate rule
    const size_t n = target_intensity.size();
    std::vector<double> omega2(n);
    {
        const double f = std::min(target_total / budget, 0.98);
        double cum = 0;
        // rate scale: drained-reservoir model, Gamma(t) = P(t)/(eta_max*sn - int P)
        // converted to Omega^2 with the small-signal retrieval rate r_c
        const double r_c = [&] {
            // one moderate square read to estimate d(extraction)/dt per Omega^2
            ControlPulse ref;
            ref.shape = ControlPulse::Shape::square;
            ref.peak_rabi = 0.3 * std::abs(cfg.delta);
            ref.t_start = target_t0;
            ref.duration = span;
            ref.edge = std::min(10e-9, span / 8);
            ReadResult rr = solve_read(spin, ref, cfg, target_t0 - 2 * cfg.dt, target_t0 + span / 4);
            const double extracted = rr.output_energy / (out.eta_r_max * sn);
            const double frac = std::min(std::max(extracted, 1e-6), 0.999999);
            return -std::log(1 - frac) / (ref.peak_rabi * ref.peak_rabi * (span / 4));
        }();
        for (size_t i = 0; i < n; ++i) {
            const double q = target_intensity[i] / target_total; // density
            const double denom = std::max(1.0 - f * cum, 0.02);
            omega2[i] = (target_total / budget) * q / denom / r_c;
            cum += q * target_dt;
        }
    }

    std::vector<double> times(n);
    for (size_t i = 0; i < n; ++i) times[i] = target_t0 + double(i) * target_dt;
    const double omega_cap = std::sqrt(0.15 * std::abs(cfg.delta) / cfg.dt);

    ControlPulse pulse;
    pulse.shape = ControlPulse::Shape::table;
    pulse.table_t = times;
    pulse.t_start = target_t0;

    const double eps = 1e-3 * (*std::max_element(target_intensity.begin(), target_intensity.end()));
    for (int it = 0; it < max_iter; ++it) {
        pulse.table_omega.resize(n);
        for (size_t i = 0; i < n; ++i)
            pulse.table_omega[i] = std::min(std::sqrt(std::max(omega2[i], 0.0)), omega_cap);
        ReadResult rr = solve_read(spin, pulse, cfg, target_t0 - 2 * cfg.dt, target_t0 + span);
        // resample achieved intensity onto the target grid
        std::vector<double> achieved(n);
        for (size_t i = 0; i < n; ++i) {
            const double x = (times[i] - rr.t0) / rr.dt;
            const size_t j = std::min(size_t(std::max(x, 0.0)), rr.output_intensity.size() - 2);
            const double fr = std::min(std::max(x - double(j), 0.0), 1.0);
            achieved[i] = rr.output_intensity[j] * (1 - fr) + rr.output_intensity[j + 1] * fr;
        }
        out.achieved = achieved;
        out.iterations = it + 1;
        out.mismatch = detail::density_mismatch(achieved, target_intensity, target_dt);
        out.pulse = pulse;
        double achieved_total = 0;
        for (double v : achieved) achieved_total += v;
        achieved_total *= target_dt;
        // converge on shape and on delivered energy
        if (out.mismatch < tol && std::abs(achieved_total / target_total - 1.0) < tol) {
            out.converged = true;
            break;
        }
        // damped multiplicative correction toward the target
        for (size_t i = 0; i < n; ++i) {
            const double ratio = (target_intensity[i] + eps) / (achieved[i] + eps);
            const double step = std::pow(std::min(std::max(ratio, 1.0 / 3.0), 3.0), 0.7);
            omega2[i] *= step;
        }
    }
    return out;
}

} // namespace photonlab

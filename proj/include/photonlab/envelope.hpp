#pragma once

// Heralded photon waveshape: Gaussian leading edge glued to an exponential
// tail at the peak, parametrized on intensity,
//
//   I(t) = exp(-((t-t_pk)/rise_sigma)^2)   t <  t_pk
//   I(t) = exp(-(t-t_pk)/decay_tau)        t >= t_pk
//
// The amplitude is sqrt(I) normalized to unit L2 norm. Closed forms used
// below: FWHM = rise_sigma*sqrt(ln 2) + decay_tau*ln 2, total intensity
// integral = rise_sigma*sqrt(pi)/2 + decay_tau.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "common.hpp"
#include "rng.hpp"

namespace photonlab {

struct WaveshapeParams {
    double rise_sigma = 100e-9; // s, Gaussian intensity sigma of the leading edge
    double decay_tau = 53e-9;   // s, intensity 1/e time of the tail
    double fwhm = 120e-9;       // s, configured target, cross-checked below
    double peak_time = 515e-9;  // s, peak position relative to the trial trigger

    double derived_fwhm() const {
        return rise_sigma * std::sqrt(std::log(2.0)) + decay_tau * std::log(2.0);
    }

    // intensity-weighted mean arrival time relative to trigger
    double centroid_time() const {
        const double el = rise_sigma * std::sqrt(PI) / 2.0;
        const double er = decay_tau;
        return peak_time + (-rise_sigma * rise_sigma / 2.0 + decay_tau * decay_tau) / (el + er);
    }

    void validate() const {
        if (!(rise_sigma > 0) || !(decay_tau > 0) || !(fwhm > 0))
            throw ConfigError("waveshape: rise_sigma, decay_tau and fwhm must be positive");
        const double d = derived_fwhm();
        if (std::abs(d - fwhm) > 0.01 * fwhm)
            throw ConfigError("waveshape: FWHM derived from (rise_sigma, decay_tau) is " +
                              std::to_string(d * 1e9) + " ns, more than 1% away from the configured " +
                              std::to_string(fwhm * 1e9) + " ns target");
    }
};

// pointwise amplitude with analytic unit-norm scaling
inline double input_envelope(const WaveshapeParams& p, double t) {
    const double norm2 = p.rise_sigma * std::sqrt(PI) / 2.0 + p.decay_tau;
    const double u = t - p.peak_time;
    double intensity;
    if (u < 0) {
        const double x = u / p.rise_sigma;
        intensity = std::exp(-x * x);
    } else {
        intensity = std::exp(-u / p.decay_tau);
    }
    return std::sqrt(intensity / norm2);
}

// real amplitude on a uniform grid, trapezoid-normalized so that the discrete
// L2 norm is exactly 1 on its own grid
struct SampledEnvelope {
    double t0 = 0;
    double dt = 0;
    std::vector<double> amp;

    size_t size() const { return amp.size(); }
    double time(size_t i) const { return t0 + double(i) * dt; }

    double norm2() const {
        double acc = 0;
        for (size_t i = 0; i < amp.size(); ++i) {
            const double w = (i == 0 || i + 1 == amp.size()) ? 0.5 : 1.0;
            acc += w * amp[i] * amp[i];
        }
        return acc * dt;
    }

    void normalize() {
        const double n2 = norm2();
        if (n2 <= 0) throw PreconditionError("envelope: cannot normalize zero envelope");
        const double s = 1.0 / std::sqrt(n2);
        for (double& a : amp) a *= s;
    }

    double energy_in_window(double lo, double hi) const {
        double acc = 0;
        for (size_t i = 0; i + 1 < amp.size(); ++i) {
            const double ta = time(i), tb = time(i + 1);
            if (tb <= lo || ta >= hi) continue;
            // clip the cell to the window, trapezoid on the clipped piece
            const double a = std::max(ta, lo), b = std::min(tb, hi);
            const double fa = amp[i] + (amp[i + 1] - amp[i]) * (a - ta) / dt;
            const double fb = amp[i] + (amp[i + 1] - amp[i]) * (b - ta) / dt;
            acc += 0.5 * (fa * fa + fb * fb) * (b - a);
        }
        return acc;
    }
};

inline SampledEnvelope make_input_envelope(const WaveshapeParams& p, double t_lo, double t_hi,
                                           double dt) {
    p.validate();
    if (!(dt > 0) || !(t_hi > t_lo))
        throw PreconditionError("envelope grid: need dt > 0 and t_hi > t_lo");
    SampledEnvelope e;
    e.t0 = t_lo;
    e.dt = dt;
    const size_t n = size_t(std::ceil((t_hi - t_lo) / dt)) + 1;
    e.amp.resize(n);
    for (size_t i = 0; i < n; ++i) e.amp[i] = input_envelope(p, e.time(i));
    e.normalize();
    return e;
}

// FWHM of a sampled nonnegative intensity profile, linear interpolation at the
// half-max crossings; used for measured output shapes as well
inline double fwhm_of_intensity(const std::vector<double>& intensity, double dt) {
    if (intensity.size() < 3) throw PreconditionError("fwhm: need at least 3 samples");
    size_t ipk = 0;
    for (size_t i = 1; i < intensity.size(); ++i)
        if (intensity[i] > intensity[ipk]) ipk = i;
    const double half = intensity[ipk] / 2.0;
    if (half <= 0) throw PreconditionError("fwhm: profile is zero");
    double left = 0;
    for (size_t i = ipk; i > 0; --i) {
        if (intensity[i - 1] <= half) {
            const double frac = (intensity[i] - half) / (intensity[i] - intensity[i - 1]);
            left = (double(i) - frac) * dt;
            break;
        }
        if (i == 1) left = 0; // profile clipped at grid start
    }
    double right = double(intensity.size() - 1) * dt;
    for (size_t i = ipk; i + 1 < intensity.size(); ++i) {
        if (intensity[i + 1] <= half) {
            const double frac = (intensity[i] - half) / (intensity[i] - intensity[i + 1]);
            right = (double(i) + frac) * dt;
            break;
        }
    }
    return right - left;
}

// inverse-CDF arrival-time sampler over a gridded intensity profile
class ArrivalSampler {
  public:
    ArrivalSampler() = default;

    ArrivalSampler(double t0, double dt, const std::vector<double>& intensity) : t0_(t0), dt_(dt) {
        if (intensity.size() < 2) throw PreconditionError("arrival sampler: need >= 2 samples");
        cum_.resize(intensity.size());
        cum_[0] = 0;
        for (size_t i = 1; i < intensity.size(); ++i) {
            const double cell = 0.5 * (std::max(intensity[i - 1], 0.0) + std::max(intensity[i], 0.0));
            cum_[i] = cum_[i - 1] + cell;
        }
        const double total = cum_.back();
        if (total <= 0) throw PreconditionError("arrival sampler: profile has no weight");
        for (double& c : cum_) c /= total;
    }

    bool valid() const { return !cum_.empty(); }

    double sample(Rng& rng) const {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
        size_t hi = size_t(it - cum_.begin());
        if (hi >= cum_.size()) hi = cum_.size() - 1;
        if (hi == 0) hi = 1;
        const double c0 = cum_[hi - 1], c1 = cum_[hi];
        const double frac = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.5;
        return t0_ + (double(hi - 1) + frac) * dt_;
    }

  private:
    double t0_ = 0, dt_ = 0;
    std::vector<double> cum_;
};

} // namespace photonlab

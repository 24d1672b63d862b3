#pragma once

// Nonlinear least squares (damped Levenberg-Marquardt, analytic Jacobians)
// plus the two domain fits built on it:
//   fit_lifetime  — Gaussian decay with optional slow modulation,
//                   eta(t) = eta0 * exp(-t^2/tau^2) * (1 - A + A cos(w t)),
//                   modulation kept only if an F-test at 95% demands it
//   fit_waveshape — Gaussian rise / exponential tail pulse, FWHM readout
//
// Parameter errors are sqrt of the diagonal of (J^T W J)^-1 scaled by the
// reduced chi^2, so misdeclared point sigmas rescale out.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "common.hpp"

namespace photonlab {

struct FitResult {
    std::vector<double> params;
    std::vector<double> errors;
    double chi2 = 0;
    int dof = 0;
    int iterations = 0;
    bool converged = false;
};

// model(t, p) -> value; jacobian(t, p, row) fills d(model)/d(p[j])
using FitModel = std::function<double(double, const std::vector<double>&)>;
using FitJacobian = std::function<void(double, const std::vector<double>&, double*)>;

namespace detail {

// solve A x = b in place for small symmetric positive-ish systems
inline bool solve_dense(std::vector<double>& a, std::vector<double>& b, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[piv * n + col])) piv = r;
        if (std::fabs(a[piv * n + col]) < 1e-300) return false;
        if (piv != col) {
            for (int k = 0; k < n; ++k) std::swap(a[col * n + k], a[piv * n + k]);
            std::swap(b[col], b[piv]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col] * inv;
            if (f == 0) continue;
            for (int k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
            b[r] -= f * b[col];
        }
    }
    for (int i = 0; i < n; ++i) b[i] /= a[i * n + i];
    return true;
}

inline double chi2_of(const std::vector<double>& t, const std::vector<double>& y,
                      const std::vector<double>& w2, const std::vector<double>& p,
                      const FitModel& model) {
    double c = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        const double r = y[i] - model(t[i], p);
        c += w2[i] * r * r;
    }
    return c;
}

} // namespace detail

inline FitResult lm_fit(const std::vector<double>& t, const std::vector<double>& y,
                        const std::vector<double>& sigma, std::vector<double> p,
                        const FitModel& model, const FitJacobian& jacobian,
                        int max_iter = 200) {
    const size_t m = t.size();
    const int np = int(p.size());
    if (m != y.size() || (!sigma.empty() && sigma.size() != m))
        throw PreconditionError("lm_fit: mismatched data lengths");
    if (m < size_t(np)) throw FitError("lm_fit: fewer points than parameters");

    std::vector<double> w2(m, 1.0);
    if (!sigma.empty())
        for (size_t i = 0; i < m; ++i) {
            if (!(sigma[i] > 0)) throw PreconditionError("lm_fit: sigma must be > 0");
            w2[i] = 1.0 / (sigma[i] * sigma[i]);
        }

    FitResult res;
    res.dof = int(m) - np;
    double chi2 = detail::chi2_of(t, y, w2, p, model);
    double lambda = 1e-3;
    std::vector<double> jtj(size_t(np) * np), jtr(np), row(np);
    std::vector<double> a(size_t(np) * np), g(np), trial(np);

    int it = 0;
    for (; it < max_iter; ++it) {
        std::fill(jtj.begin(), jtj.end(), 0.0);
        std::fill(jtr.begin(), jtr.end(), 0.0);
        for (size_t i = 0; i < m; ++i) {
            jacobian(t[i], p, row.data());
            const double r = y[i] - model(t[i], p);
            for (int a1 = 0; a1 < np; ++a1) {
                jtr[a1] += w2[i] * row[a1] * r;
                for (int b1 = a1; b1 < np; ++b1) jtj[a1 * np + b1] += w2[i] * row[a1] * row[b1];
            }
        }
        for (int a1 = 0; a1 < np; ++a1)
            for (int b1 = 0; b1 < a1; ++b1) jtj[a1 * np + b1] = jtj[b1 * np + a1];

        bool stepped = false;
        for (int attempt = 0; attempt < 24 && !stepped; ++attempt) {
            a = jtj;
            g = jtr;
            for (int d = 0; d < np; ++d) a[d * np + d] += lambda * std::max(jtj[d * np + d], 1e-30);
            if (!detail::solve_dense(a, g, np)) {
                lambda *= 10;
                continue;
            }
            for (int d = 0; d < np; ++d) trial[d] = p[d] + g[d];
            const double c_new = detail::chi2_of(t, y, w2, trial, model);
            if (std::isfinite(c_new) && c_new <= chi2) {
                double step2 = 0, scale2 = 0;
                for (int d = 0; d < np; ++d) {
                    step2 += g[d] * g[d];
                    scale2 += p[d] * p[d];
                }
                const bool tiny_step = step2 < 1e-24 * std::max(scale2, 1e-30);
                const bool tiny_gain = (chi2 - c_new) < 1e-12 * std::max(chi2, 1e-30);
                p = trial;
                chi2 = c_new;
                lambda = std::max(lambda * 0.25, 1e-12);
                stepped = true;
                if (tiny_step || tiny_gain) {
                    res.converged = true;
                    ++it;
                }
            } else {
                lambda *= 10;
            }
        }
        if (!stepped) {
            res.converged = true; // no downhill direction left
            break;
        }
        if (res.converged) break;
    }

    res.iterations = it;
    res.params = p;
    res.chi2 = chi2;

    // covariance from the undamped normal matrix
    std::fill(jtj.begin(), jtj.end(), 0.0);
    for (size_t i = 0; i < m; ++i) {
        jacobian(t[i], p, row.data());
        for (int a1 = 0; a1 < np; ++a1)
            for (int b1 = a1; b1 < np; ++b1) jtj[a1 * np + b1] += w2[i] * row[a1] * row[b1];
    }
    for (int a1 = 0; a1 < np; ++a1)
        for (int b1 = 0; b1 < a1; ++b1) jtj[a1 * np + b1] = jtj[b1 * np + a1];
    res.errors.assign(np, 0.0);
    const double redchi = res.dof > 0 ? std::max(chi2 / res.dof, 0.0) : 1.0;
    std::vector<double> inv(size_t(np) * np, 0.0);
    for (int c = 0; c < np; ++c) {
        std::vector<double> acopy = jtj, e(np, 0.0);
        e[c] = 1.0;
        if (!detail::solve_dense(acopy, e, np)) {
            res.errors.assign(np, std::numeric_limits<double>::quiet_NaN());
            break;
        }
        for (int r2 = 0; r2 < np; ++r2) inv[r2 * np + c] = e[r2];
    }
    if (!res.errors.empty() && !std::isnan(res.errors[0]))
        for (int d = 0; d < np; ++d)
            res.errors[d] = std::sqrt(std::max(inv[d * np + d], 0.0) * std::max(redchi, 1e-300));
    return res;
}

// finite-difference probe of an analytic jacobian; returns the worst relative
// deviation over the given points
inline double jacobian_fd_error(const FitModel& model, const FitJacobian& jacobian,
                                const std::vector<double>& t, const std::vector<double>& p) {
    const int np = int(p.size());
    std::vector<double> row(np), pp(p);
    double worst = 0;
    for (double ti : t) {
        jacobian(ti, p, row.data());
        for (int j = 0; j < np; ++j) {
            const double h = 1e-5 * std::fabs(p[j]) + 1e-12; // scaled central differences
            pp = p;
            pp[j] = p[j] + h;
            const double up = model(ti, pp);
            pp[j] = p[j] - h;
            const double dn = model(ti, pp);
            const double fd = (up - dn) / (2 * h);
            const double scale = std::max({std::fabs(fd), std::fabs(row[j]), 1e-9});
            worst = std::max(worst, std::fabs(fd - row[j]) / scale);
        }
    }
    return worst;
}

// ---- lifetime ----

struct LifetimeModel {
    // p = {eta0, tau} or {eta0, tau, A, omega}
    static double eval(double t, const std::vector<double>& p) {
        const double e = p[0] * std::exp(-(t * t) / (p[1] * p[1]));
        if (p.size() == 2) return e;
        return e * (1.0 - p[2] + p[2] * std::cos(p[3] * t));
    }
    static void jac(double t, const std::vector<double>& p, double* row) {
        const double g = std::exp(-(t * t) / (p[1] * p[1]));
        const double dg_dtau = g * 2.0 * t * t / (p[1] * p[1] * p[1]);
        if (p.size() == 2) {
            row[0] = g;
            row[1] = p[0] * dg_dtau;
            return;
        }
        const double c = std::cos(p[3] * t);
        const double osc = 1.0 - p[2] + p[2] * c;
        row[0] = g * osc;
        row[1] = p[0] * dg_dtau * osc;
        row[2] = p[0] * g * (c - 1.0);
        row[3] = -p[0] * g * p[2] * t * std::sin(p[3] * t);
    }
};

struct LifetimeFit {
    double eta0 = 0, tau = 0, amplitude = 0, omega = 0;
    double eta0_err = 0, tau_err = 0, amplitude_err = 0, omega_err = 0;
    bool has_oscillation = false;
    double f_statistic = 0, f_critical = 0;
    FitResult plain, modulated;
};

namespace detail {

// F threshold at 95% for 2 extra parameters against d2 residual dof
inline double f_crit_95_two(int d2) {
    if (d2 <= 0) return std::numeric_limits<double>::infinity();
    return 0.5 * d2 * (std::pow(0.05, -2.0 / d2) - 1.0);
}

inline double seed_omega(const std::vector<double>& t, const std::vector<double>& resid) {
    // coarse spectral scan of the residuals for the modulation frequency
    const double span = t.back() - t.front();
    if (!(span > 0)) return 0;
    double best_w = 0, best_a = -1;
    const double w_lo = TWO_PI / span, w_hi = PI * t.size() / span;
    for (int k = 0; k <= 400; ++k) {
        const double w = w_lo + (w_hi - w_lo) * k / 400.0;
        double cs = 0, sn = 0;
        for (size_t i = 0; i < t.size(); ++i) {
            cs += resid[i] * std::cos(w * t[i]);
            sn += resid[i] * std::sin(w * t[i]);
        }
        const double a = cs * cs + sn * sn;
        if (a > best_a) {
            best_a = a;
            best_w = w;
        }
    }
    return best_w;
}

} // namespace detail

inline LifetimeFit fit_lifetime(const std::vector<double>& t, const std::vector<double>& eta,
                                const std::vector<double>& sigma = {}) {
    if (t.size() < 6) throw PreconditionError("fit_lifetime: need at least 6 points");
    const double peak = *std::max_element(eta.begin(), eta.end());
    if (!(peak > 0)) throw FitError("fit_lifetime: no positive efficiency values");

    // tau seed: first time the curve falls below peak/e
    double tau0 = t.back() * 0.5;
    for (size_t i = 0; i < t.size(); ++i)
        if (eta[i] < peak * 0.3679 && t[i] > 0) {
            tau0 = t[i];
            break;
        }

    LifetimeFit out;
    out.plain = lm_fit(t, eta, sigma, {peak, tau0}, LifetimeModel::eval, LifetimeModel::jac);
    if (!out.plain.converged) throw FitError("fit_lifetime: decay fit did not converge");

    std::vector<double> resid(t.size());
    for (size_t i = 0; i < t.size(); ++i)
        resid[i] = eta[i] - LifetimeModel::eval(t[i], out.plain.params);
    double amp0 = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        const double base = LifetimeModel::eval(t[i], out.plain.params);
        if (base > 0.05 * peak) amp0 = std::max(amp0, std::fabs(resid[i]) / base);
    }
    amp0 = std::clamp(amp0, 0.02, 0.45);
    const double w0 = detail::seed_omega(t, resid);

    std::vector<double> p4 = {out.plain.params[0], out.plain.params[1], amp0,
                              w0 > 0 ? w0 : TWO_PI / (t.back() - t.front())};
    out.modulated = lm_fit(t, eta, sigma, p4, LifetimeModel::eval, LifetimeModel::jac);
    if (out.modulated.converged && out.modulated.params[3] < 0) {
        out.modulated.params[3] = -out.modulated.params[3]; // cos is even
    }

    const int d2 = int(t.size()) - 4;
    out.f_critical = detail::f_crit_95_two(d2);
    if (out.modulated.converged && out.modulated.chi2 < out.plain.chi2 && d2 > 0) {
        out.f_statistic =
            ((out.plain.chi2 - out.modulated.chi2) / 2.0) / (out.modulated.chi2 / d2);
        out.has_oscillation = out.f_statistic > out.f_critical;
    }

    const FitResult& pick = out.has_oscillation ? out.modulated : out.plain;
    out.eta0 = pick.params[0];
    out.tau = std::fabs(pick.params[1]);
    out.eta0_err = pick.errors.empty() ? 0 : pick.errors[0];
    out.tau_err = pick.errors.size() > 1 ? pick.errors[1] : 0;
    if (out.has_oscillation) {
        out.amplitude = pick.params[2];
        out.omega = pick.params[3];
        out.amplitude_err = pick.errors.size() > 2 ? pick.errors[2] : 0;
        out.omega_err = pick.errors.size() > 3 ? pick.errors[3] : 0;
    }
    return out;
}

// ---- waveshape ----

struct WaveshapeModel {
    // p = {amp, peak_time, rise_sigma, decay_tau}; intensity units
    static double eval(double t, const std::vector<double>& p) {
        const double dt = t - p[1];
        if (dt < 0) {
            const double u = dt / p[2];
            return p[0] * std::exp(-u * u);
        }
        return p[0] * std::exp(-dt / p[3]);
    }
    static void jac(double t, const std::vector<double>& p, double* row) {
        const double dt = t - p[1];
        if (dt < 0) {
            const double u = dt / p[2];
            const double e = std::exp(-u * u);
            row[0] = e;
            row[1] = p[0] * e * 2.0 * dt / (p[2] * p[2]);
            row[2] = p[0] * e * 2.0 * dt * dt / (p[2] * p[2] * p[2]);
            row[3] = 0;
        } else {
            const double e = std::exp(-dt / p[3]);
            row[0] = e;
            row[1] = p[0] * e / p[3];
            row[2] = 0;
            row[3] = p[0] * e * dt / (p[3] * p[3]);
        }
    }
};

struct WaveshapeFit {
    double amplitude = 0, peak_time = 0, rise_sigma = 0, decay_tau = 0;
    double fwhm = 0, fwhm_err = 0;
    FitResult fit;
};

inline WaveshapeFit fit_waveshape(const std::vector<double>& t, const std::vector<double>& y,
                                  const std::vector<double>& sigma = {}) {
    if (t.size() < 8) throw PreconditionError("fit_waveshape: need at least 8 points");
    const size_t ipk = size_t(std::max_element(y.begin(), y.end()) - y.begin());
    const double ymax = y[ipk];
    if (!(ymax > 0)) throw FitError("fit_waveshape: no positive samples");

    // refuse ambiguous shapes: a second local maximum comparable to the main
    // peak and separated from it
    {
        size_t runner = ipk;
        double runner_y = -1;
        for (size_t i = 1; i + 1 < y.size(); ++i) {
            if (y[i] >= y[i - 1] && y[i] >= y[i + 1] && y[i] > 0.35 * ymax) {
                if (i + 3 < ipk || i > ipk + 3) {
                    double valley = ymax;
                    const size_t a = std::min(i, ipk), b = std::max(i, ipk);
                    for (size_t k = a; k <= b; ++k) valley = std::min(valley, y[k]);
                    if (valley < 0.7 * y[i] && y[i] > runner_y) {
                        runner = i;
                        runner_y = y[i];
                    }
                }
            }
        }
        if (runner != ipk)
            throw FitError("fit_waveshape: multiple peaks, waveform is not a single pulse");
    }

    double t_half_lo = t.front(), t_half_hi = t.back();
    for (size_t i = ipk; i-- > 0;)
        if (y[i] < 0.5 * ymax) {
            t_half_lo = t[i];
            break;
        }
    for (size_t i = ipk; i < y.size(); ++i)
        if (y[i] < 0.5 * ymax) {
            t_half_hi = t[i];
            break;
        }
    const double sqrt_ln2 = std::sqrt(std::log(2.0));
    double sig0 = std::max((t[ipk] - t_half_lo) / sqrt_ln2, 1e-12);
    double tau0 = std::max((t_half_hi - t[ipk]) / std::log(2.0), 1e-12);

    WaveshapeFit out;
    out.fit = lm_fit(t, y, sigma, {ymax, t[ipk], sig0, tau0}, WaveshapeModel::eval,
                     WaveshapeModel::jac);
    if (!out.fit.converged) throw FitError("fit_waveshape: fit did not converge");
    out.amplitude = out.fit.params[0];
    out.peak_time = out.fit.params[1];
    out.rise_sigma = std::fabs(out.fit.params[2]);
    out.decay_tau = std::fabs(out.fit.params[3]);
    out.fwhm = out.rise_sigma * sqrt_ln2 + out.decay_tau * std::log(2.0);
    const double se_s = out.fit.errors.size() > 2 ? out.fit.errors[2] : 0;
    const double se_t = out.fit.errors.size() > 3 ? out.fit.errors[3] : 0;
    out.fwhm_err = std::hypot(sqrt_ln2 * se_s, std::log(2.0) * se_t);
    return out;
}

} // namespace photonlab

#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sclab/constants.hpp"
#include "sclab/identities.hpp"
#include "sclab/quadrature.hpp"

namespace sclab {

/// Emden-Fowler reduction of the radial critical equation: v'' = -V'(v) with
///   V(v) = kappa (n-2)/(2n) v^{2n/(n-2)} - 1/2 ((n-2)/2)^2 v^2.
/// Positive periodic orbits at Hamiltonian H in (H0, 0) lift to radial
/// singular solutions u_H(x) = |x|^{(2-n)/2} v_H(log |x|).
struct FowlerSystem {
    int n;
    double kappa;

    FowlerSystem(int dim, double k) : n(dim), kappa(k) {
        if (n < 3 || !(k > 0.0)) throw std::invalid_argument("FowlerSystem: need n >= 3, kappa > 0");
    }

    double exponent() const { return 2.0 * n / double(n - 2); }

    double V(double v) const {
        double c = 0.5 * (n - 2);
        return kappa * (n - 2) / (2.0 * n) * std::pow(v, exponent()) - 0.5 * c * c * v * v;
    }
    double dV(double v) const {
        double c = 0.5 * (n - 2);
        return kappa * std::pow(v, double(n + 2) / (n - 2)) - c * c * v;
    }
    double hamiltonian(double v, double vp) const { return 0.5 * vp * vp + V(v); }

    double v0() const {
        double c = 0.5 * (n - 2);
        return std::pow(c * c / kappa, 0.25 * (n - 2));
    }
    double H0() const {
        double c = 0.5 * (n - 2);
        return -(1.0 / n) * kappa * std::pow(c * c / kappa, 0.5 * n);
    }
};

inline std::pair<double, double> equilibrium(int n, double kappa) {
    FowlerSystem s(n, kappa);
    return {s.v0(), s.H0()};
}

struct FowlerTrajectory {
    double t0 = 0.0, dt = 0.0;
    std::vector<double> v, vp;
    double H = 0.0;      // initial Hamiltonian
    double drift = 0.0;  // max |H(t) - H| over the run
    bool escaped = false;  // v reached 0 (left the positive branch)

    std::size_t size() const { return v.size(); }
    double time(std::size_t i) const { return t0 + dt * double(i); }

    void write_csv(std::ostream& os, const FowlerSystem& sys) const {
        os << "t,v,vprime,H\n";
        os.precision(17);
        for (std::size_t i = 0; i < size(); ++i)
            os << time(i) << ',' << v[i] << ',' << vp[i] << ',' << sys.hamiltonian(v[i], vp[i])
               << '\n';
    }
};

/// Classical fixed-step RK4 with Hamiltonian-drift control: the step is
/// halved until the measured drift over the whole span is below tol.
inline FowlerTrajectory fowler_integrate(const FowlerSystem& sys, double v_init, double vp_init,
                                         double t_begin, double t_end, double dt0,
                                         double drift_tol = 1e-8, int max_halvings = 14) {
    if (!(t_end > t_begin) || !(dt0 > 0.0))
        throw std::invalid_argument("fowler_integrate: bad time span or step");
    double dt = dt0;
    FowlerTrajectory best;
    for (int attempt = 0; attempt <= max_halvings; ++attempt) {
        std::size_t steps = std::size_t(std::ceil((t_end - t_begin) / dt));
        FowlerTrajectory tr;
        tr.t0 = t_begin;
        tr.dt = (t_end - t_begin) / double(steps);
        tr.v.reserve(steps + 1);
        tr.vp.reserve(steps + 1);
        double v = v_init, w = vp_init;
        tr.v.push_back(v);
        tr.vp.push_back(w);
        tr.H = sys.hamiltonian(v, w);
        double drift = 0.0;
        bool esc = false;
        const double h = tr.dt;
        for (std::size_t s = 0; s < steps; ++s) {
            auto f = [&](double vv, double ww, double& dv, double& dw) {
                dv = ww;
                dw = -sys.dV(vv);
            };
            double k1v, k1w, k2v, k2w, k3v, k3w, k4v, k4w;
            f(v, w, k1v, k1w);
            f(v + 0.5 * h * k1v, w + 0.5 * h * k1w, k2v, k2w);
            f(v + 0.5 * h * k2v, w + 0.5 * h * k2w, k3v, k3w);
            f(v + h * k3v, w + h * k3w, k4v, k4w);
            v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
            w += h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
            if (!(v > 0.0)) {
                esc = true;
                break;
            }
            tr.v.push_back(v);
            tr.vp.push_back(w);
            drift = std::max(drift, std::abs(sys.hamiltonian(v, w) - tr.H));
        }
        tr.drift = drift;
        tr.escaped = esc;
        best = std::move(tr);
        if (esc || drift < drift_tol) break;
        dt *= 0.5;
    }
    return best;
}

/// Turning points of the orbit at energy H: the two positive roots of
/// V(v) = H bracketing v0, by safeguarded bisection.
inline std::pair<double, double> fowler_turning_points(const FowlerSystem& sys, double H) {
    if (!(H > sys.H0() && H < 0.0))
        throw std::domain_error("fowler: H must lie in (H0, 0)");
    auto bisect = [&](double lo, double hi) {
        double flo = sys.V(lo) - H;
        for (int i = 0; i < 200; ++i) {
            double mid = 0.5 * (lo + hi);
            double fm = sys.V(mid) - H;
            if ((fm > 0) == (flo > 0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };
    double v0 = sys.v0();
    // inner root: V(eps) ~ 0- > H near 0? V(0) = 0 > H, V(v0) = H0 < H
    double lo = 1e-12 * v0;
    while (sys.V(lo) < H) lo *= 0.5;  // paranoia; V(0+) -> 0 > H
    double vm = bisect(lo, v0);
    double hi = 2.0 * v0;
    while (sys.V(hi) < H) hi *= 2.0;
    double vp = bisect(v0, hi);
    return {vm, vp};
}

/// Period of the orbit at energy H via dt = dv / sqrt(2(H - V(v))) between
/// turning points. The integral is split at v_mid: the inner piece uses the
/// substitution v = v_- cosh(xi), which removes the square root at v_- and
/// resolves the logarithmic time pileup near the homoclinic uniformly in H;
/// the outer piece uses v = v_+ - (v_+ - v_mid) sin^2(s) against the sqrt at
/// v_+.
inline double fowler_period(const FowlerSystem& sys, double H) {
    auto [vm, vp] = fowler_turning_points(sys, H);
    // split where the saddle's quadratic regime ends, so the cosh substitution
    // covers the whole logarithmic pileup
    double vmid = std::min(0.5 * (vm + vp), std::max(2.0 * vm, 0.5 * sys.v0()));
    if (vmid <= vm || vmid >= vp) vmid = 0.5 * (vm + vp);

    double Xi = std::acosh(std::max(vmid / vm, 1.0));
    // where 2(H - V) sinks below the local cancellation noise, switch to the
    // first-order expansion at the turning point
    auto noise = [&](double v) { return 64.0 * 1e-16 * (std::abs(H) + std::abs(sys.V(v))); };

    // half-angle form: v - vm = 2 vm sinh^2(xi/2), dv = vm sinh(xi)
    auto inner = [&](double xi) {
        double sh = std::sinh(0.5 * xi), ch = std::cosh(0.5 * xi);
        double v = vm + 2.0 * vm * sh * sh;
        double d2 = 2.0 * (H - sys.V(v));
        if (d2 <= noise(v)) {
            double slope = std::max(-sys.dV(vm), 1e-300);
            return 2.0 * vm * sh * ch / std::sqrt(2.0 * slope * 2.0 * vm * sh * sh);
        }
        return 2.0 * vm * sh * ch / std::sqrt(d2);
    };
    double T_inner = composite_integral(inner, 0.0, Xi, 96);

    double span = vp - vmid;
    auto outer = [&](double s) {
        double cs = std::cos(s);
        double v = vp - span * cs * cs;
        double d2 = 2.0 * (H - sys.V(v));
        if (d2 <= noise(v)) {
            double slope = std::max(std::abs(sys.dV(vp)), 1e-300);
            return 2.0 * span * std::sin(s) * cs / std::sqrt(2.0 * slope * span * cs * cs);
        }
        return 2.0 * span * std::sin(s) * cs / std::sqrt(d2);
    };
    double T_outer = composite_integral(outer, 0.0, 0.5 * pi, 96);
    return 2.0 * (T_inner + T_outer);
}

struct RadialLift {
    std::vector<double> r, u, du;  // samples of u_H and u_H'
};

/// Interpolated orbit values (v, v') at arbitrary time inside the window,
/// cubic Hermite between stored steps.
inline std::pair<double, double> fowler_eval(const FowlerTrajectory& tr, double t) {
    if (tr.size() < 2) throw std::runtime_error("fowler_eval: empty trajectory");
    double s = (t - tr.t0) / tr.dt;
    if (s < 0.0 || s > double(tr.size() - 1))
        throw std::domain_error("fowler_eval: time outside trajectory window");
    std::size_t i = std::min(std::size_t(s), tr.size() - 2);
    double x = s - double(i);
    double h = tr.dt;
    double v0 = tr.v[i], v1 = tr.v[i + 1], m0 = tr.vp[i] * h, m1 = tr.vp[i + 1] * h;
    double x2 = x * x, x3 = x2 * x;
    double v = (2 * x3 - 3 * x2 + 1) * v0 + (x3 - 2 * x2 + x) * m0 + (-2 * x3 + 3 * x2) * v1 +
               (x3 - x2) * m1;
    double vp = ((6 * x2 - 6 * x) * v0 + (3 * x2 - 4 * x + 1) * m0 + (-6 * x2 + 6 * x) * v1 +
                 (3 * x2 - 2 * x) * m1) /
                h;
    return {v, vp};
}

/// u_H(x) = |x|^{(2-n)/2} v(log |x|) sampled on a log grid covering the
/// trajectory window.
inline RadialLift lift_to_radial(const FowlerTrajectory& tr, int n, std::size_t samples = 257) {
    RadialLift L;
    double t_lo = tr.t0, t_hi = tr.t0 + tr.dt * double(tr.size() - 1);
    L.r.resize(samples);
    L.u.resize(samples);
    L.du.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        double t = t_lo + (t_hi - t_lo) * double(i) / double(samples - 1);
        auto [v, vp] = fowler_eval(tr, t);
        double r = std::exp(t);
        L.r[i] = r;
        L.u[i] = std::pow(r, 0.5 * (2 - n)) * v;
        L.du[i] = std::pow(r, 0.5 * (2 - n) - 1.0) * (0.5 * (2 - n) * v + vp);
    }
    return L;
}

struct FluxReport {
    double flux;       // (1/2*) oint <x,nu> kappa u^{2*} + oint B
    double omega_n_H;  // |S^{n-1}| * H, the conserved value
    double residual;
};

/// Conservation law of the lifted Fowler solution: the Pohozaev flux through
/// dB_r equals |S^{n-1}| H for every radius in the window. The boundary
/// density B is evaluated by the identities module.
inline FluxReport flux_identity(const FowlerSystem& sys, const FowlerTrajectory& tr, double r) {
    const int n = sys.n;
    double t = std::log(r);
    auto [v, vp] = fowler_eval(tr, t);
    double u = std::pow(r, 0.5 * (2 - n)) * v;
    double du = std::pow(r, 0.5 * (2 - n) - 1.0) * (0.5 * (2 - n) * v + vp);

    // radial function: evaluate B on dB_r through the shared boundary density
    Vec x = Vec::Zero(n);
    x[0] = r;
    Vec gu = Vec::Zero(n);
    gu[0] = du;
    double B = pohozaev_B(x, u, gu, n);
    double two_star = 2.0 * n / double(n - 2);
    double dens = (1.0 / two_star) * r * sys.kappa * std::pow(u, two_star) + B;
    double area = sphere_area(n - 1) * std::pow(r, n - 1);
    double flux = dens * area;
    double target = sphere_area(n - 1) * tr.H;
    return FluxReport{flux, target, flux - target};
}

} // namespace sclab

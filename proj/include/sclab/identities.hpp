#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sclab/constants.hpp"
#include "sclab/quadrature.hpp"
#include "sclab/sphere.hpp"

namespace sclab {

/// Function data on a Euclidean ball B_r in a chart. All scalar inputs are
/// zonally symmetric about `axis` (radial functions qualify with any axis);
/// this keeps every surface/volume integral one- or two-dimensional for any n.
struct BallGridFunction {
    int n = 0;
    std::function<double(const Vec&)> u;
    std::function<Vec(const Vec&)> grad_u;  // optional; finite differences if absent
    std::function<double(const Vec&)> K;
    std::function<Vec(const Vec&)> grad_K;  // optional
    Vec axis;                               // unit vector
    double core_scale = 0.1;                // finest radial feature (e.g. 1/lambda)
    int angular_panels = 32;

    void validate() const {
        if (n < 3) throw std::invalid_argument("BallGridFunction: need n >= 3");
        if (!u || !K) throw std::invalid_argument("BallGridFunction: u and K required");
        if (axis.size() != n || std::abs(axis.norm() - 1.0) > 1e-10)
            throw std::invalid_argument("BallGridFunction: axis must be a unit vector in R^n");
    }

    Vec gradient_u(const Vec& x) const {
        if (grad_u) return grad_u(x);
        const double h = 1e-6 * (1.0 + x.norm());
        Vec g(n);
        Vec xp = x, xm = x;
        for (int i = 0; i < n; ++i) {
            xp[i] += h;
            xm[i] -= h;
            g[i] = (u(xp) - u(xm)) / (2.0 * h);
            xp[i] = x[i];
            xm[i] = x[i];
        }
        return g;
    }

    Vec gradient_K(const Vec& x) const {
        if (grad_K) return grad_K(x);
        const double h = 1e-6 * (1.0 + x.norm());
        Vec g(n);
        Vec xp = x, xm = x;
        for (int i = 0; i < n; ++i) {
            xp[i] += h;
            xm[i] -= h;
            g[i] = (K(xp) - K(xm)) / (2.0 * h);
            xp[i] = x[i];
            xm[i] = x[i];
        }
        return g;
    }
};

namespace detail {

/// Any unit vector orthogonal to a.
inline Vec perp_unit(const Vec& a) {
    int k = 0;
    for (int i = 1; i < a.size(); ++i)
        if (std::abs(a[i]) < std::abs(a[k])) k = i;
    Vec e = Vec::Zero(a.size());
    e[k] = 1.0;
    e -= a.dot(e) * a;
    return e / e.norm();
}

/// Surface integral over the sphere of radius r (centered at 0) of a zonal
/// integrand F(x) sampled at x(psi) = r (cos psi axis + sin psi perp).
template <class F>
double zonal_surface_integral(const BallGridFunction& f, double r, F&& integrand) {
    Vec e = perp_unit(f.axis);
    auto g = [&](double psi) {
        Vec x = r * (std::cos(psi) * f.axis + std::sin(psi) * e);
        return integrand(x) * std::pow(std::sin(psi), f.n - 2);
    };
    return sphere_area(f.n - 2) * std::pow(r, f.n - 1) *
           composite_integral(g, 0.0, pi, f.angular_panels);
}

} // namespace detail

/// Pohozaev boundary density B(r, x, u, grad u)
///   = (n-2)/2 u du/dnu - 1/2 <x,nu> |grad u|^2 + du/dnu <grad u, x>.
inline double pohozaev_B(const Vec& x, double u, const Vec& gu, int n) {
    double r = x.norm();
    Vec nu = x / r;
    double un = gu.dot(nu);
    return 0.5 * (n - 2) * u * un - 0.5 * r * gu.squaredNorm() + un * gu.dot(x);
}

struct PohozaevReport {
    double volume_term = 0.0;       // (1/2*) int_B x.grad K u^{2*}
    double boundary_K_term = 0.0;   // (1/2*) oint <x,nu> K u^{2*}
    double boundary_B_term = 0.0;   // c_n oint B
    double subcritical_term = 0.0;  // extra volume term, zero at the critical exponent
    double residual = 0.0;          // volume - (boundary sum) - subcritical
    double tolerance_estimate = 0.0;
};

/// Pohozaev identity on B_r for -c_n Delta u = K u^p. At the critical
/// exponent p = (n+2)/(n-2) this is the classical identity; for subcritical p
/// the additional volume term (n/(p+1) - (n-2)/2) int K u^{p+1} enters.
inline PohozaevReport pohozaev_residual(const BallGridFunction& f, double r,
                                        double p_exponent = -1.0) {
    f.validate();
    RoundMetricConstants rc(f.n);
    const double p = (p_exponent > 0.0) ? p_exponent : rc.critical_exponent();
    const double pp1 = p + 1.0;

    PohozaevReport rep;
    rep.boundary_K_term = detail::zonal_surface_integral(f, r, [&](const Vec& x) {
        return (1.0 / pp1) * x.norm() * f.K(x) * std::pow(f.u(x), pp1);
    });
    rep.boundary_B_term = detail::zonal_surface_integral(f, r, [&](const Vec& x) {
        return rc.c_n * pohozaev_B(x, f.u(x), f.gradient_u(x), f.n);
    });

    auto shell_volume = [&](double rho) {
        return detail::zonal_surface_integral(f, rho, [&](const Vec& x) {
            return (1.0 / pp1) * x.dot(f.gradient_K(x)) * std::pow(f.u(x), pp1);
        });
    };
    rep.volume_term = graded_integral([&](double rho) { return shell_volume(rho); }, r,
                                      f.core_scale);

    double coef = double(f.n) / pp1 - 0.5 * (f.n - 2);
    if (std::abs(coef) > 1e-15) {
        rep.subcritical_term = coef * graded_integral(
                                          [&](double rho) {
                                              return detail::zonal_surface_integral(
                                                  f, rho, [&](const Vec& x) {
                                                      return f.K(x) * std::pow(f.u(x), pp1);
                                                  });
                                          },
                                          r, f.core_scale);
    }

    // volume + subcritical = boundary_K + boundary_B for solutions
    rep.residual = rep.volume_term + rep.subcritical_term - rep.boundary_K_term -
                   rep.boundary_B_term;
    double scale = std::abs(rep.boundary_K_term) + std::abs(rep.boundary_B_term) +
                   std::abs(rep.volume_term);
    rep.tolerance_estimate = 1e-9 * std::max(1.0, scale);
    return rep;
}

/// Translational Pohozaev identity in direction e (must be parallel to the
/// zonal axis, or u radial): residual of eq. LHS(boundary) - RHS.
inline double pohozaev_translational(const BallGridFunction& f, double r, const Vec& e) {
    f.validate();
    RoundMetricConstants rc(f.n);
    const double ts = rc.two_star();
    Vec dir = e / e.norm();
    if (std::abs(std::abs(dir.dot(f.axis)) - 1.0) > 1e-9)
        throw std::invalid_argument(
            "pohozaev_translational: direction must align with the zonal axis");

    double lhs = detail::zonal_surface_integral(f, r, [&](const Vec& x) {
        Vec gu = f.gradient_u(x);
        Vec nu = x / x.norm();
        return -rc.c_n * gu.dot(nu) * gu.dot(dir) + 0.5 * rc.c_n * gu.squaredNorm() * nu.dot(dir);
    });
    double rhs_b = detail::zonal_surface_integral(f, r, [&](const Vec& x) {
        Vec nu = x / x.norm();
        return (1.0 / ts) * f.K(x) * std::pow(f.u(x), ts) * nu.dot(dir);
    });
    double rhs_v = graded_integral(
        [&](double rho) {
            return detail::zonal_surface_integral(f, rho, [&](const Vec& x) {
                return (1.0 / ts) * std::pow(f.u(x), ts) * f.gradient_K(x).dot(dir);
            });
        },
        r, f.core_scale);
    return lhs - (rhs_b - rhs_v);
}

// ---------------------------------------------------------------------------
// Kazdan-Warner integral on S^n
// ---------------------------------------------------------------------------

/// int <grad K, grad f> u^{2n/(n-2)} dmu for axisymmetric u and K (profiles
/// of the polar angle; dK is dK/dtheta) and f = sum_i c[i] Y_{i+1} running
/// over all n+1 first spherical harmonics. Only the height harmonic couples;
/// the others vanish by azimuthal parity and contribute exactly zero.
inline double kazdan_warner_axisym(const std::function<double(double)>& u,
                                   const std::function<double(double)>& dK,
                                   const std::vector<double>& c, int n) {
    if (int(c.size()) != n + 1)
        throw std::invalid_argument("kazdan_warner_axisym: need n+1 harmonic coefficients");
    RoundMetricConstants rc(n);
    double ch = c.back();  // coefficient of Y_{n+1}
    if (ch == 0.0) return 0.0;
    auto integrand = [&](double th) {
        return -dK(th) * std::sin(th) * std::pow(u(th), rc.two_star()) *
               std::pow(std::sin(th), n - 1);
    };
    return ch * rc.omega * composite_integral(integrand, 0.0, pi, 256);
}

/// General zonal version: u is zonal about the meridian point at polar angle
/// theta_a (u given as a function of the geodesic distance sigma from that
/// point), K is an axisymmetric profile with derivative dK. Handles every
/// first harmonic; components outside the meridian plane vanish by parity.
inline double kazdan_warner_zonal(const std::function<double(double)>& u_of_sigma,
                                  const std::function<double(double)>& dK, double theta_a,
                                  const std::vector<double>& c, int n, double core = 0.05) {
    if (int(c.size()) != n + 1)
        throw std::invalid_argument("kazdan_warner_zonal: need n+1 harmonic coefficients");
    RoundMetricConstants rc(n);
    const double ca = std::cos(theta_a), sa = std::sin(theta_a);
    const double c1 = c[0], ch = c.back();
    auto outer = [&](double sigma) {
        double up = std::pow(u_of_sigma(sigma), rc.two_star());
        auto inner = [&](double psi) {
            double cp = std::cos(psi);
            double Yh = ca * std::cos(sigma) - sa * std::sin(sigma) * cp;  // Y_{n+1}
            double Y1 = sa * std::cos(sigma) + ca * std::sin(sigma) * cp;  // Y_1
            Yh = std::clamp(Yh, -1.0, 1.0);
            double th = std::acos(Yh);
            double st = std::sqrt(std::max(1e-300, 1.0 - Yh * Yh));
            // <grad K, grad f> = -K'(theta)/sin(theta) * [c_h (1 - Yh^2) - Yh (c_1 Y_1)]
            double g = -dK(th) / st * (ch * (1.0 - Yh * Yh) - Yh * c1 * Y1);
            return g * std::pow(std::sin(psi), n - 2);
        };
        double kavg = composite_integral(inner, 0.0, pi, 32);
        return up * kavg * std::pow(std::sin(sigma), n - 1);
    };
    return sphere_area(n - 2) * graded_integral(outer, pi, core);
}

// ---------------------------------------------------------------------------
// Radial averages and blow-up classification
// ---------------------------------------------------------------------------

struct RadialAverageCurve {
    std::vector<double> radii;           // increasing
    std::vector<double> wbar;            // r^{(n-2)/2} * mean of u over dB_r
    std::vector<double> critical_radii;  // local extrema of wbar
};

enum class BlowupClass { IsolatedSimpleCandidate, MultiCritical, Degenerate };

inline const char* to_string(BlowupClass c) {
    switch (c) {
        case BlowupClass::IsolatedSimpleCandidate: return "isolated-simple candidate";
        case BlowupClass::MultiCritical: return "multi-critical";
        default: return "degenerate";
    }
}

/// Weighted radial average w(r) = r^{(n-2)/2} avg_{dB_r} u around the origin
/// of the chart; u zonal about `axis` (or radial). Extrema are located by
/// sign changes of the derivative of a 5-point local parabola fit, which
/// filters grid noise.
inline RadialAverageCurve radial_average(const BallGridFunction& f,
                                         const std::vector<double>& radii) {
    f.validate();
    if (radii.size() < 16) throw std::invalid_argument("radial_average: need >= 16 radii");
    RadialAverageCurve c;
    c.radii = radii;
    c.wbar.resize(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        double r = radii[i];
        if (!(r > 0.0) || (i && !(radii[i] > radii[i - 1])))
            throw std::invalid_argument("radial_average: radii must be positive increasing");
        double area = sphere_area(f.n - 1) * std::pow(r, f.n - 1);
        double mean = detail::zonal_surface_integral(f, r, [&](const Vec& x) { return f.u(x); }) /
                      area;
        c.wbar[i] = std::pow(r, 0.5 * (f.n - 2)) * mean;
    }
    // slope of local parabola fit in log r (scale-invariant extremum detection)
    std::vector<double> slope(radii.size(), 0.0);
    auto lr = [&](std::size_t i) { return std::log(c.radii[i]); };
    for (std::size_t i = 2; i + 2 < radii.size(); ++i) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int k = -2; k <= 2; ++k) {
            double X = lr(i + k) - lr(i), Y = c.wbar[i + k];
            sx += X;
            sy += Y;
            sxx += X * X;
            sxy += X * Y;
        }
        slope[i] = (5.0 * sxy - sx * sy) / (5.0 * sxx - sx * sx);
    }
    for (std::size_t i = 2; i + 3 < radii.size(); ++i) {
        if (slope[i] == 0.0) continue;
        if (slope[i] * slope[i + 1] < 0.0) {
            // refine by linear interpolation of the slope zero
            double t = slope[i] / (slope[i] - slope[i + 1]);
            c.critical_radii.push_back(std::exp(lr(i) + t * (lr(i + 1) - lr(i))));
        }
    }
    return c;
}

/// Classification per the isolated-simple definition: exactly one critical
/// radius of wbar in (0, rho).
inline BlowupClass classify_blowup(const RadialAverageCurve& curve, double rho) {
    int count = 0;
    for (double r : curve.critical_radii)
        if (r > 0.0 && r < rho) ++count;
    if (count == 1) return BlowupClass::IsolatedSimpleCandidate;
    if (count >= 2) return BlowupClass::MultiCritical;
    return BlowupClass::Degenerate;
}

} // namespace sclab

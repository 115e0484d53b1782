#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sclab/constants.hpp"
#include "sclab/quadrature.hpp"
#include "sclab/scalar_field.hpp"
#include "sclab/sphere.hpp"

namespace sclab {

/// Parameters (center, concentration) of a Euclidean bubble U_{a,lambda}.
struct BubbleParams {
    Vec a;          // center in R^n
    double lambda;  // concentration
    int n;

    void validate() const {
        if (!(lambda > 0.0)) throw std::invalid_argument("BubbleParams: lambda must be positive");
        if (a.size() != n) throw std::invalid_argument("BubbleParams: center dimension mismatch");
    }
};

/// U_{a,lambda}(x) = lambda^{(n-2)/2} (1 + lambda^2 |x-a|^2)^{(2-n)/2}.
inline double standard_bubble(const Vec& x, const BubbleParams& b) {
    const double nu = 0.5 * (b.n - 2);
    double q = (x - b.a).squaredNorm();
    return std::pow(b.lambda, nu) * std::pow(1.0 + b.lambda * b.lambda * q, -nu);
}

inline Vec standard_bubble_gradient(const Vec& x, const BubbleParams& b) {
    const double nu = 0.5 * (b.n - 2);
    const double l2 = b.lambda * b.lambda;
    double q = (x - b.a).squaredNorm();
    double g = -nu * l2 * std::pow(b.lambda, nu) * std::pow(1.0 + l2 * q, -nu - 1.0);
    return 2.0 * g * (x - b.a);
}

inline double standard_bubble_laplacian(const Vec& x, const BubbleParams& b) {
    // exact: -Delta U = n(n-2) U^{(n+2)/(n-2)}
    double u = standard_bubble(x, b);
    return -double(b.n) * (b.n - 2) * std::pow(u, double(b.n + 2) / (b.n - 2));
}

// ---------------------------------------------------------------------------
// Sobolev / Yamabe constant
// ---------------------------------------------------------------------------

struct SobolevConstant {
    double value;            // the cross-checked constant \hat c_0
    double talenti_route;    // c_n * sharp Sobolev constant of R^n
    double yamabe_route;     // n(n-1) Vol(S^n)^{2/n}
    double literal_display;  // the printed closed form, kept for diagnostics
};

/// Best constant \hat c_0 = c_n inf |grad u|_2^2 / |u|_{2*}^2, computed two
/// independent ways which must agree to 1e-10 (relative). The literal printed
/// closed form evaluates to something else entirely (it is off by the square
/// of the sharp constant's normalization); it is reported but never used.
inline SobolevConstant sobolev_constant(int n) {
    if (n < 3) throw std::invalid_argument("sobolev_constant: need n >= 3");
    RoundMetricConstants rc(n);
    double S_sharp = double(n) * (n - 2) * pi *
                     std::pow(std::tgamma(0.5 * n) / std::tgamma(double(n)), 2.0 / n);
    double talenti = rc.c_n * S_sharp;
    double yamabe = rc.R0 * std::pow(rc.vol, 2.0 / n);
    double literal = rc.c_n * std::pow(std::tgamma(double(n)) / std::tgamma(0.5 * n), 2.0 / n) /
                     (pi * (n - 2) * n);
    if (std::abs(talenti - yamabe) > 1e-10 * yamabe)
        throw std::runtime_error("sobolev_constant: cross-check failed");
    return SobolevConstant{yamabe, talenti, yamabe, literal};
}

/// Limit energy \hat c_0 (sum K_i^{(2-n)/2})^{2/n} of a multi-bubble
/// configuration over the given critical values.
inline double limit_energy(const std::vector<double>& values, int n) {
    if (values.empty()) throw std::invalid_argument("limit_energy: empty value set");
    double s = 0.0;
    for (double v : values) {
        if (!(v > 0.0)) throw std::invalid_argument("limit_energy: values must be positive");
        s += std::pow(v, 0.5 * (2 - n));
    }
    return sobolev_constant(n).value * std::pow(s, 2.0 / n);
}

// ---------------------------------------------------------------------------
// Bubbles on the round sphere
// ---------------------------------------------------------------------------

/// phi_{a,lambda} on the round S^n. With the conformal Green's function in
/// closed form, gamma_n G_a^{2/(2-n)}(x) equals the squared chordal distance
/// |x-a|^2 of the ambient R^{n+1}, so
///   phi_{a,lambda}(x) = (lambda / (1 + lambda^2 |x-a|^2))^{(n-2)/2}.
inline ScalarField sphere_bubble(const SpherePoint& a, double lambda) {
    if (!(lambda >= 1.0)) throw std::invalid_argument("sphere_bubble: need lambda >= 1");
    const int n = a.dim();
    const double nu = 0.5 * (n - 2);
    const double l2 = lambda * lambda;
    const Vec c = a.coords;
    ScalarField F;
    F.n = n;
    F.f = [nu, lambda, l2, c](const Vec& x) {
        double q = (x - c).squaredNorm();
        return std::pow(lambda / (1.0 + l2 * q), nu);
    };
    F.df = [nu, lambda, l2, c](const Vec& x) {
        double q = (x - c).squaredNorm();
        double w = 1.0 + l2 * q;
        double dphi = -nu * std::pow(lambda, nu) * std::pow(w, -nu - 1.0) * l2;
        return Vec(2.0 * dphi * (x - c));
    };
    F.d2f = [nu, lambda, l2, c](const Vec& x) {
        double q = (x - c).squaredNorm();
        double w = 1.0 + l2 * q;
        double g1 = -nu * std::pow(lambda, nu) * std::pow(w, -nu - 1.0) * l2;
        double g2 = nu * (nu + 1.0) * std::pow(lambda, nu) * std::pow(w, -nu - 2.0) * l2 * l2;
        Vec d = x - c;
        Mat H = 2.0 * g1 * Mat::Identity(x.size(), x.size());
        H += 4.0 * g2 * d * d.transpose();
        return H;
    };
    return F;
}

/// Geodesic profile of phi_{a,lambda}: value and d/dsigma at polar distance
/// sigma from the center (chordal^2 = 2 - 2 cos sigma).
inline std::pair<double, double> sphere_bubble_radial(double sigma, double lambda, int n) {
    const double nu = 0.5 * (n - 2);
    double s2 = 2.0 - 2.0 * std::cos(sigma);
    double w = 1.0 + lambda * lambda * s2;
    double val = std::pow(lambda / w, nu);
    double dval = -nu * val / w * lambda * lambda * 2.0 * std::sin(sigma);
    return {val, dval};
}

/// L2* mass of the Euclidean standard bubble: int U_0^{2n/(n-2)} dx
/// = 2^{-n} Vol(S^n).
inline double euclidean_bubble_mass(int n) {
    return std::pow(2.0, -n) * sphere_area(n);
}

// ---------------------------------------------------------------------------
// Kelvin inversion
// ---------------------------------------------------------------------------

/// Parameter map of the Kelvin inversion x -> mu^2 x / |x|^2 acting on
/// bubbles: the weighted pullback of U_{a,lambda} is again a bubble.
inline BubbleParams kelvin_invert(const BubbleParams& b, double mu) {
    b.validate();
    if (!(mu > 0.0)) throw std::invalid_argument("kelvin_invert: mu must be positive");
    double D = 1.0 + b.lambda * b.lambda * b.a.squaredNorm();
    BubbleParams out;
    out.n = b.n;
    out.a = (b.lambda * b.lambda * mu * mu / D) * b.a;
    out.lambda = D / (b.lambda * mu * mu);
    return out;
}

/// Max mismatch of (mu^{n-2}/|x|^{n-2}) U_{a,lambda}(mu^2 x/|x|^2) against
/// U_{kelvin params}(x) over a sample annulus.
inline double kelvin_pointwise_error(const BubbleParams& b, double mu, int samples = 200,
                                     unsigned seed = 7u) {
    BubbleParams inv = kelvin_invert(b, mu);
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> ur(0.5 * mu, 2.0 * mu);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        Vec x(b.n);
        for (int k = 0; k < b.n; ++k) x[k] = g(rng);
        x *= ur(rng) / x.norm();
        double r = x.norm();
        Vec xi = (mu * mu / (r * r)) * x;
        double lhs = std::pow(mu / r, b.n - 2) * standard_bubble(xi, b);
        double rhs = standard_bubble(x, inv);
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// J_tau of concentrated test functions (axisymmetric K)
// ---------------------------------------------------------------------------

/// J_tau(phi_{a,lambda}) where K is axisymmetric (given as a function of the
/// polar angle) and the bubble sits at polar angle theta_a. The numerator is
/// a 1-D integral in the geodesic distance from the center; the denominator
/// couples the two axes and is evaluated with a product rule over
/// (distance sigma, cross angle psi).
inline double bubble_J_tau(const std::function<double(double)>& K_of_theta, double theta_a,
                           double lambda, double tau, int n) {
    RoundMetricConstants rc(n);
    const double p = rc.critical_exponent() - tau;
    const double core = 1.0 / lambda;

    auto num_integrand = [&](double sigma) {
        auto [val, dval] = sphere_bubble_radial(sigma, lambda, n);
        return (rc.c_n * dval * dval + rc.R0 * val * val) * std::pow(std::sin(sigma), n - 1);
    };
    double r = rc.omega * graded_integral(num_integrand, pi, core);

    const double ca = std::cos(theta_a), sa = std::sin(theta_a);
    const double cross_area = sphere_area(n - 2);
    auto den_integrand = [&](double sigma) {
        auto [val, dval] = sphere_bubble_radial(sigma, lambda, n);
        (void)dval;
        double up = std::pow(val, p + 1.0);
        auto inner = [&](double psi) {
            double ct = ca * std::cos(sigma) + sa * std::sin(sigma) * std::cos(psi);
            ct = std::clamp(ct, -1.0, 1.0);
            return K_of_theta(std::acos(ct)) * std::pow(std::sin(psi), n - 2);
        };
        double kavg = composite_integral(inner, 0.0, pi, 24);
        return up * kavg * std::pow(std::sin(sigma), n - 1);
    };
    double k = cross_area * graded_integral(den_integrand, pi, core);
    if (!(k > 0.0)) throw std::domain_error("bubble_J_tau: nonpositive denominator");
    return r / std::pow(k, 2.0 / (p + 1.0));
}

/// Anchor data for one local maximum of K used by the variational test family
/// (location on the meridian and the concentration scale of the single-bubble
/// solution there). Defaults mimic lambda ~ tau^{-1/2} at the maximum itself.
struct MaxAnchor {
    double theta;
    double lambda;
};

struct TestFamilyResult {
    double sup_J;        // sup over the path of J_tau of the test function
    double bound;        // c_hat0 (min over path of K)^{(2-n)/n}
    double excess;       // sup_J - bound
};

/// Energy of the interpolating family of eq-style test functions along a path
/// of points (axisymmetric K, path given by polar angles). lambda is glued
/// from the anchors' values near each maximum to tau^{-1/2} away from them.
inline TestFamilyResult test_family_energy(const std::function<double(double)>& K_of_theta,
                                           const std::vector<double>& path_thetas, double tau,
                                           double r0, const std::vector<MaxAnchor>& anchors,
                                           int n) {
    if (!(tau > 0.0) || tau > 0.1001)
        throw std::domain_error("test_family_energy: tau must be in (0, 0.1]");
    if (path_thetas.empty()) throw std::domain_error("test_family_energy: empty path");
    const double lam_far = 1.0 / std::sqrt(tau);

    auto smooth_step = [](double s) {
        s = std::clamp(s, 0.0, 1.0);
        return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
    };

    double supJ = -1e300, minK = 1e300;
    for (double th : path_thetas) {
        double lam = lam_far, a = th;
        // nearest anchor controls the interpolation
        double best = 1e300;
        const MaxAnchor* near_anchor = nullptr;
        for (const auto& m : anchors) {
            double d = std::abs(th - m.theta);
            if (d < best) {
                best = d;
                near_anchor = &m;
            }
        }
        if (near_anchor) {
            if (best <= 2.0 * r0) {
                lam = near_anchor->lambda;
                a = near_anchor->theta;
            } else if (best < 4.0 * r0) {
                double s = smooth_step((best - 2.0 * r0) / (2.0 * r0));
                lam = std::exp((1.0 - s) * std::log(near_anchor->lambda) + s * std::log(lam_far));
                a = (1.0 - s) * near_anchor->theta + s * th;
            }
        }
        supJ = std::max(supJ, bubble_J_tau(K_of_theta, a, lam, tau, n));
        minK = std::min(minK, K_of_theta(th));
    }
    double bound = sobolev_constant(n).value * std::pow(minK, (2.0 - n) / double(n));
    return TestFamilyResult{supJ, bound, supJ - bound};
}

} // namespace sclab

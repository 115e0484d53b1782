#pragma once

#include <cmath>
#include <stdexcept>

namespace sclab {

inline constexpr double pi = 3.14159265358979323846264338327950288;

/// Area of the unit m-sphere S^m embedded in R^{m+1}: 2 pi^{(m+1)/2} / Gamma((m+1)/2).
inline double sphere_area(int m) {
    if (m < 0) throw std::invalid_argument("sphere_area: m must be >= 0");
    return 2.0 * std::pow(pi, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

/// Fixed constants of the round sphere (S^n, g_{S^n}).
struct RoundMetricConstants {
    int n;            // sphere dimension
    double c_n;       // 4(n-1)/(n-2), coefficient of the conformal Laplacian
    double R0;        // scalar curvature n(n-1)
    double omega;     // |S^{n-1}|, area of the equatorial sphere
    double vol;       // Vol(S^n) = |S^n|

    explicit RoundMetricConstants(int dim) : n(dim) {
        if (n < 3) throw std::invalid_argument("RoundMetricConstants: need n >= 3");
        c_n   = 4.0 * (n - 1) / double(n - 2);
        R0    = double(n) * (n - 1);
        omega = sphere_area(n - 1);
        vol   = sphere_area(n);
    }

    double critical_exponent() const { return double(n + 2) / double(n - 2); }
    double two_star() const { return 2.0 * n / double(n - 2); }
};

/// Number of degree-l spherical harmonics on S^{n-1} (the angular factor of polar
/// coordinates on S^n).
inline long harmonic_multiplicity(int n, int l) {
    if (l == 0) return 1;
    // (2l+n-2) (l+n-3)! / (l! (n-2)!)
    double v = double(2 * l + n - 2);
    for (int k = 1; k <= l; ++k) v *= double(k + n - 3) / double(k);
    return std::lround(v / double(n - 2));
}

} // namespace sclab

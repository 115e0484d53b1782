#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sclab/sphere.hpp"

namespace sclab {

using Mat = Eigen::MatrixXd;

/// Smooth function on S^n given through an ambient extension with exact
/// derivatives. Intrinsic gradient/Hessian/Laplacian are obtained by
/// projecting the ambient data onto the tangent space.
struct ScalarField {
    int n = 0;
    std::function<double(const Vec&)> f;
    std::function<Vec(const Vec&)> df;
    std::function<Mat(const Vec&)> d2f;

    double value(const SpherePoint& p) const { return f(p.coords); }

    bool has_derivatives() const { return bool(df) && bool(d2f); }
};

/// Orthonormal basis of the tangent space at x (columns), via a Householder
/// reflection sending e_{n+1} to x.
inline Mat tangent_basis(const SpherePoint& p) {
    const int n = p.dim();
    Vec u = p.coords;
    u[n] -= 1.0;
    Mat H = Mat::Identity(n + 1, n + 1);
    double s = u.squaredNorm();
    if (s > 1e-28) H -= (2.0 / s) * (u * u.transpose());
    return H.leftCols(n);
}

inline Vec intrinsic_gradient(const ScalarField& F, const SpherePoint& p) {
    Vec g = F.df(p.coords);
    return g - p.coords.dot(g) * p.coords;
}

/// Hessian of F restricted to S^n, expressed in the orthonormal tangent basis
/// B: Hess = B^T (D^2 F) B - (x . DF) I.
inline Mat intrinsic_hessian(const ScalarField& F, const SpherePoint& p, const Mat& B) {
    const int n = p.dim();
    Mat H = B.transpose() * F.d2f(p.coords) * B;
    H -= p.coords.dot(F.df(p.coords)) * Mat::Identity(n, n);
    return H;
}

inline Mat intrinsic_hessian(const ScalarField& F, const SpherePoint& p) {
    return intrinsic_hessian(F, p, tangent_basis(p));
}

inline double laplace_beltrami(const ScalarField& F, const SpherePoint& p) {
    const Vec x = p.coords;
    Mat A = F.d2f(x);
    Vec g = F.df(x);
    // tr(P A P) - n x.g with P = I - x x^T
    double tr = A.trace() - 2.0 * x.dot(A * x) + x.dot(A * x);
    return tr - p.dim() * x.dot(g);
}

// ---------------------------------------------------------------------------
// Named families
// ---------------------------------------------------------------------------

inline ScalarField constant_field(int n, double c) {
    ScalarField F;
    F.n = n;
    F.f = [c](const Vec&) { return c; };
    F.df = [n](const Vec&) { return Vec(Vec::Zero(n + 1)); };
    F.d2f = [n](const Vec&) { return Mat(Mat::Zero(n + 1, n + 1)); };
    return F;
}

/// Restriction of the i-th ambient coordinate (0-based), a first spherical
/// harmonic.
inline ScalarField coordinate_field(int n, int i) {
    if (i < 0 || i > n) throw std::invalid_argument("coordinate_field: index out of range");
    ScalarField F;
    F.n = n;
    F.f = [i](const Vec& x) { return x[i]; };
    F.df = [n, i](const Vec&) {
        Vec g = Vec::Zero(n + 1);
        g[i] = 1.0;
        return g;
    };
    F.d2f = [n](const Vec&) { return Mat(Mat::Zero(n + 1, n + 1)); };
    return F;
}

/// Polynomial in the height coordinate Y_{n+1}; axisymmetric about the polar
/// axis. coeffs[k] multiplies Y^k.
inline ScalarField height_poly_field(int n, std::vector<double> coeffs) {
    if (coeffs.empty()) throw std::invalid_argument("height_poly_field: empty coefficients");
    ScalarField F;
    F.n = n;
    auto eval = [coeffs](double s, int deriv) {
        double v = 0.0;
        for (std::size_t k = std::size_t(deriv); k < coeffs.size(); ++k) {
            double c = coeffs[k];
            for (int d = 0; d < deriv; ++d) c *= double(k - d);
            v += c * std::pow(s, double(int(k) - deriv));
        }
        return v;
    };
    F.f = [eval, n](const Vec& x) { return eval(x[n], 0); };
    F.df = [eval, n](const Vec& x) {
        Vec g = Vec::Zero(n + 1);
        g[n] = eval(x[n], 1);
        return g;
    };
    F.d2f = [eval, n](const Vec& x) {
        Mat H = Mat::Zero(n + 1, n + 1);
        H(n, n) = eval(x[n], 2);
        return H;
    };
    return F;
}

/// 1 + eps * Y_{n+1}: one max at N, one min at S (the affine "height" curvature).
inline ScalarField height_field(int n, double eps = 1.0, double base = 1.0) {
    return height_poly_field(n, {base, eps});
}

/// Quadratic ambient field 1 + b.x + x.Q x (Q symmetric); generic choices are
/// Morse on S^n.
inline ScalarField quadratic_field(int n, Vec b, Mat Q, double base = 1.0) {
    if (b.size() != n + 1 || Q.rows() != n + 1 || Q.cols() != n + 1)
        throw std::invalid_argument("quadratic_field: dimension mismatch");
    Mat Qs = 0.5 * (Q + Q.transpose());
    ScalarField F;
    F.n = n;
    F.f = [base, b, Qs](const Vec& x) { return base + b.dot(x) + x.dot(Qs * x); };
    F.df = [b, Qs](const Vec& x) { return Vec(b + 2.0 * Qs * x); };
    F.d2f = [Qs](const Vec&) { return Mat(2.0 * Qs); };
    return F;
}

/// Seeded random Morse candidate: 1 + linear + quadratic with small coefficients.
inline ScalarField random_morse_field(int n, unsigned seed, double lin = 0.3, double quad = 0.2) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec b(n + 1);
    for (int i = 0; i <= n; ++i) b[i] = lin * u(rng);
    Mat Q(n + 1, n + 1);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) Q(i, j) = quad * u(rng);
    return quadratic_field(n, b, Q, 2.0);
}

inline ScalarField field_sum(const ScalarField& A, const ScalarField& B) {
    if (A.n != B.n) throw std::invalid_argument("field_sum: dimension mismatch");
    ScalarField F;
    F.n = A.n;
    F.f = [A, B](const Vec& x) { return A.f(x) + B.f(x); };
    F.df = [A, B](const Vec& x) { return Vec(A.df(x) + B.df(x)); };
    F.d2f = [A, B](const Vec& x) { return Mat(A.d2f(x) + B.d2f(x)); };
    return F;
}

inline ScalarField field_scale(const ScalarField& A, double c, double shift = 0.0) {
    ScalarField F;
    F.n = A.n;
    F.f = [A, c, shift](const Vec& x) { return shift + c * A.f(x); };
    F.df = [A, c](const Vec& x) { return Vec(c * A.df(x)); };
    F.d2f = [A, c](const Vec& x) { return Mat(c * A.d2f(x)); };
    return F;
}

/// Sample an axisymmetric field along the meridian into a profile.
inline AxisymProfile axisym_profile_of(const ScalarField& F, std::size_t nodes) {
    AxisymProfile p = AxisymProfile::uniform(F.n, nodes);
    for (std::size_t i = 0; i < p.size(); ++i)
        p.values[i] = F.value(SpherePoint::on_meridian(F.n, p.theta[i]));
    return p;
}

} // namespace sclab

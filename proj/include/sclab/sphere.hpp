#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sclab/constants.hpp"

namespace sclab {

using Vec = Eigen::VectorXd;

enum class Pole { North, South };

/// A point on the unit sphere S^n, stored as a unit vector in R^{n+1}.
struct SpherePoint {
    Vec coords;

    SpherePoint() = default;
    explicit SpherePoint(Vec c) : coords(std::move(c)) { renormalize(); }

    int dim() const { return int(coords.size()) - 1; }

    void renormalize() {
        double r = coords.norm();
        if (r == 0.0 || !std::isfinite(r))
            throw std::invalid_argument("SpherePoint: cannot normalize zero/non-finite vector");
        coords /= r;
    }

    double height() const { return coords[coords.size() - 1]; }

    static SpherePoint north(int n) {
        Vec c = Vec::Zero(n + 1);
        c[n] = 1.0;
        return SpherePoint(std::move(c));
    }
    static SpherePoint south(int n) {
        Vec c = Vec::Zero(n + 1);
        c[n] = -1.0;
        return SpherePoint(std::move(c));
    }
    static SpherePoint axis(int n, int i) {
        Vec c = Vec::Zero(n + 1);
        c[i] = 1.0;
        return SpherePoint(std::move(c));
    }
    /// Polar angle theta from the north pole mapped to the meridian through e_1.
    static SpherePoint on_meridian(int n, double theta) {
        Vec c = Vec::Zero(n + 1);
        c[0] = std::sin(theta);
        c[n] = std::cos(theta);
        return SpherePoint(std::move(c));
    }
};

inline double geodesic_distance(const SpherePoint& a, const SpherePoint& b) {
    // half-chord form: well conditioned near coincident points, where
    // acos(dot) bottoms out at sqrt(machine eps)
    double half = 0.5 * (a.coords - b.coords).norm();
    if (half >= 1.0) return pi;
    return 2.0 * std::asin(half);
}

/// Squared chordal (ambient R^{n+1}) distance.
inline double chordal_sq(const SpherePoint& a, const SpherePoint& b) {
    return (a.coords - b.coords).squaredNorm();
}

/// Image of a sphere point in one of the two stereographic charts.
struct ChartPoint {
    Vec y;       // point in R^n
    Pole pole;   // chart the projection was taken from

    int dim() const { return int(y.size()); }
};

/// Stereographic projection from the given pole. The south pole maps to the
/// origin of the pi_N chart and vice versa.
inline ChartPoint stereo_project(const SpherePoint& p, Pole pole) {
    const int n = p.dim();
    const double s = (pole == Pole::North) ? p.height() : -p.height();
    if (1.0 - s < 1e-14)
        throw std::domain_error("stereo_project: point coincides with the projection pole");
    Vec y = p.coords.head(n) / (1.0 - s);
    return ChartPoint{std::move(y), pole};
}

inline SpherePoint stereo_lift(const ChartPoint& q) {
    const int n = q.dim();
    const double r2 = q.y.squaredNorm();
    Vec c(n + 1);
    c.head(n) = 2.0 * q.y / (1.0 + r2);
    double s = (r2 - 1.0) / (r2 + 1.0);
    c[n] = (q.pole == Pole::North) ? s : -s;
    return SpherePoint(std::move(c));
}

/// Conformal factor of the stereographic chart: g_{S^n} = rho(y)^{4/(n-2)} dy^2
/// with rho(y) = (2/(1+|y|^2))^{(n-2)/2}.
inline double chart_conformal_factor(const Vec& y, int n) {
    return std::pow(2.0 / (1.0 + y.squaredNorm()), 0.5 * (n - 2));
}

/// Conjugate of the Euclidean dilation y -> t*y through the pi_N chart.
/// Fixes both poles; conformal automorphism of S^n.
inline SpherePoint mobius_dilate(const SpherePoint& p, double t) {
    if (!(t > 0.0)) throw std::domain_error("mobius_dilate: dilation factor must be positive");
    // The poles are fixed points; handle them directly since the chart blows up at N.
    if (1.0 - std::abs(p.height()) < 1e-15) return p;
    ChartPoint q = stereo_project(p, Pole::North);
    q.y *= t;
    return stereo_lift(q);
}

/// Rotationally symmetric function on S^n sampled on a polar-angle grid.
struct AxisymProfile {
    std::vector<double> theta;   // strictly increasing nodes covering [0, pi]
    std::vector<double> values;
    int n = 0;                   // sphere dimension

    AxisymProfile() = default;
    AxisymProfile(std::vector<double> th, std::vector<double> v, int dim)
        : theta(std::move(th)), values(std::move(v)), n(dim) {
        validate();
    }

    static AxisymProfile uniform(int dim, std::size_t nodes) {
        if (nodes < 5) throw std::invalid_argument("AxisymProfile: need at least 5 nodes");
        std::vector<double> th(nodes), v(nodes, 0.0);
        for (std::size_t i = 0; i < nodes; ++i)
            th[i] = pi * double(i) / double(nodes - 1);
        th.back() = pi;
        return AxisymProfile(std::move(th), std::move(v), dim);
    }

    std::size_t size() const { return theta.size(); }

    void validate() const {
        if (n < 3) throw std::invalid_argument("AxisymProfile: need n >= 3");
        if (theta.size() != values.size() || theta.size() < 5)
            throw std::invalid_argument("AxisymProfile: bad grid/value sizes");
        if (std::abs(theta.front()) > 1e-12 || std::abs(theta.back() - pi) > 1e-12)
            throw std::invalid_argument("AxisymProfile: grid must cover [0, pi]");
        for (std::size_t i = 1; i < theta.size(); ++i)
            if (!(theta[i] > theta[i - 1]))
                throw std::invalid_argument("AxisymProfile: grid must be strictly increasing");
        for (double v : values)
            if (!std::isfinite(v)) throw std::invalid_argument("AxisymProfile: non-finite value");
    }

    template <class F>
    static AxisymProfile sample(int dim, std::size_t nodes, F&& f) {
        AxisymProfile p = uniform(dim, nodes);
        for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = f(p.theta[i]);
        return p;
    }

    void write_csv(std::ostream& os) const {
        os << "theta,value\n";
        os.precision(17);
        for (std::size_t i = 0; i < size(); ++i)
            os << theta[i] << ',' << values[i] << '\n';
    }
    void write_csv(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot open " + path);
        write_csv(f);
    }
};

/// Discrete Laplace-Beltrami of an axisymmetric profile,
///   (Delta u)(theta) = u'' + (n-1) cot(theta) u',
/// second-order stencils; Neumann pole conditions via ghost nodes
/// (smooth axisymmetric functions have u'(0) = u'(pi) = 0, and
/// Delta u -> n u'' at the poles).
inline AxisymProfile laplace_beltrami_axisym(const AxisymProfile& u) {
    u.validate();
    const std::size_t N = u.size();
    const int n = u.n;
    AxisymProfile out = u;

    auto d1 = [&](std::size_t i) {
        // three-point first derivative on a possibly nonuniform grid
        double hl = u.theta[i] - u.theta[i - 1];
        double hr = u.theta[i + 1] - u.theta[i];
        double wl = -hr / (hl * (hl + hr));
        double wc = (hr - hl) / (hl * hr);
        double wr = hl / (hr * (hl + hr));
        return wl * u.values[i - 1] + wc * u.values[i] + wr * u.values[i + 1];
    };
    auto d2 = [&](std::size_t i) {
        double hl = u.theta[i] - u.theta[i - 1];
        double hr = u.theta[i + 1] - u.theta[i];
        return 2.0 * (hl * u.values[i + 1] + hr * u.values[i - 1] - (hl + hr) * u.values[i]) /
               (hl * hr * (hl + hr));
    };

    for (std::size_t i = 1; i + 1 < N; ++i) {
        double ct = std::cos(u.theta[i]) / std::sin(u.theta[i]);
        out.values[i] = d2(i) + (n - 1) * ct * d1(i);
    }
    // poles: even reflection, Delta u = n u''
    {
        double h = u.theta[1] - u.theta[0];
        out.values[0] = 2.0 * n * (u.values[1] - u.values[0]) / (h * h);
        double hb = u.theta[N - 1] - u.theta[N - 2];
        out.values[N - 1] = 2.0 * n * (u.values[N - 2] - u.values[N - 1]) / (hb * hb);
    }
    return out;
}

namespace detail {
/// Composite Simpson weights on a uniform grid; one 3/8 segment absorbs an odd
/// interval count. Error O(h^4) for smooth integrands.
inline std::vector<double> simpson_weights(std::size_t N, double h) {
    std::vector<double> w(N, 0.0);
    std::size_t intervals = N - 1;
    std::size_t start = 0;
    if (intervals % 2 == 1) {
        if (intervals < 3) { // trapezoid fallback, grids this small are rejected upstream
            w[0] = w[1] = 0.5 * h;
            return w;
        }
        const double c = 3.0 * h / 8.0;
        w[0] += c;
        w[1] += 3.0 * c;
        w[2] += 3.0 * c;
        w[3] += c;
        start = 3;
    }
    for (std::size_t i = start; i + 2 <= N - 1; i += 2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    return w;
}
} // namespace detail

/// Quadrature weights for integration over S^n against an axisymmetric grid:
/// int_{S^n} f dmu = |S^{n-1}| int_0^pi f(theta) sin^{n-1}(theta) dtheta.
inline std::vector<double> axisym_quadrature_weights(const AxisymProfile& u) {
    u.validate();
    const std::size_t N = u.size();
    // verify uniform spacing (Simpson needs it); tolerate tiny jitter
    double h = (u.theta.back() - u.theta.front()) / double(N - 1);
    for (std::size_t i = 1; i < N; ++i)
        if (std::abs(u.theta[i] - u.theta[i - 1] - h) > 1e-10 * (1.0 + h))
            throw std::invalid_argument("axisym quadrature: grid must be uniform");
    std::vector<double> w = detail::simpson_weights(N, h);
    const double area = sphere_area(u.n - 1);
    for (std::size_t i = 0; i < N; ++i)
        w[i] *= area * std::pow(std::sin(u.theta[i]), u.n - 1);
    return w;
}

inline double integrate_axisym(const AxisymProfile& f) {
    auto w = axisym_quadrature_weights(f);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f.values[i];
    return s;
}

/// Random point on S^n from a caller-provided engine (Gaussian direction method).
template <class Rng>
SpherePoint random_sphere_point(int n, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec c(n + 1);
    for (int i = 0; i <= n; ++i) c[i] = g(rng);
    if (c.norm() < 1e-12) c[0] = 1.0;
    return SpherePoint(std::move(c));
}

} // namespace sclab

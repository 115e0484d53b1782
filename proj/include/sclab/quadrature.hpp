#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace sclab {

/// Gauss-Legendre nodes/weights on [-1, 1], computed once via Newton iteration
/// on the Legendre recurrence.
struct GaussRule {
    std::vector<double> x, w;

    explicit GaussRule(int m) : x(m), w(m) {
        for (int i = 0; i < m; ++i) {
            double t = std::cos(3.14159265358979323846 * (i + 0.75) / (m + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = t;
                for (int k = 2; k <= m; ++k) {
                    double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                double dp = m * (t * p1 - p0) / (t * t - 1.0);
                double dt = p1 / dp;
                t -= dt;
                if (std::abs(dt) < 1e-15) break;
            }
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= m; ++k) {
                double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = m * (t * p1 - p0) / (t * t - 1.0);
            x[i] = t;
            w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        }
    }
};

inline const GaussRule& gauss16() {
    static const GaussRule r(16);
    return r;
}

/// Integrate f over [a, b] with one 16-point Gauss panel.
template <class F>
double gauss_panel(F&& f, double a, double b) {
    const GaussRule& g = gauss16();
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * f(mid + half * g.x[i]);
    return s * half;
}

/// Integrate over [0, L] with panels geometrically graded toward 0, resolving
/// features at scale `core` (e.g. a bubble core 1/lambda).
template <class F>
double graded_integral(F&& f, double L, double core, int panels_per_decade = 4) {
    if (!(L > 0.0)) return 0.0;
    double s0 = std::min(0.25 * core, L / 8.0);
    s0 = std::max(s0, L * 1e-9);
    std::vector<double> brk{0.0, s0};
    double growth = std::pow(2.0, 1.0 / panels_per_decade * 3.32193); // ~2 per panel group
    (void)growth;
    double cur = s0;
    while (cur < L) {
        cur = std::min(cur * 2.0, L);
        brk.push_back(cur);
    }
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
        // split each dyadic panel for extra accuracy
        double a = brk[i], b = brk[i + 1], m = 0.5 * (a + b);
        total += gauss_panel(f, a, m) + gauss_panel(f, m, b);
    }
    return total;
}

/// Uniform composite Gauss over [a, b] with `panels` panels.
template <class F>
double composite_integral(F&& f, double a, double b, int panels) {
    double s = 0.0, h = (b - a) / panels;
    for (int i = 0; i < panels; ++i) s += gauss_panel(f, a + i * h, a + (i + 1) * h);
    return s;
}

} // namespace sclab

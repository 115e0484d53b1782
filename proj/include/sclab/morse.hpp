#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sclab/bubbles.hpp"
#include "sclab/scalar_field.hpp"
#include "sclab/sphere.hpp"

namespace sclab {

struct CriticalPointRecord {
    SpherePoint location;
    double value = 0.0;
    int morse_index = 0;
    double laplacian = 0.0;       // Delta_{S^n} K at the point
    double hessian_margin = 0.0;  // smallest |eigenvalue| of the intrinsic Hessian
};

struct MorseReport {
    std::vector<CriticalPointRecord> records;
    std::vector<long> counts;  // M_0 .. M_n
    double nd_margin = 0.0;    // min over records of |laplacian|
    long euler_check = 0;      // sum_j (-1)^j M_j
};

struct MorseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Newton iteration for grad K = 0 on the sphere from one seed. Steps are
/// capped to stay within a chart but otherwise unrestricted (critical points
/// of every index are admissible targets); seeds whose iteration does not
/// settle are discarded.
inline std::optional<SpherePoint> newton_root(const ScalarField& K, SpherePoint x, double gtol,
                                              int max_iter = 120) {
    // Convergence is tested with the projector form P df = df - (x.df) x.
    // The Householder-basis form B^T df goes exactly numb on the thin disk
    // where a coordinate of x saturates to +-1 (the basis loses the
    // transverse components there), which would mint spurious roots at the
    // poles.
    auto proj_grad = [&](const SpherePoint& p) {
        Vec g = K.df(p.coords);
        return Vec(g - p.coords.dot(g) * p.coords);
    };
    for (int it = 0; it < max_iter; ++it) {
        if (proj_grad(x).norm() < gtol) return x;
        Mat B = tangent_basis(x);
        Vec g = B.transpose() * K.df(x.coords);
        Mat H = intrinsic_hessian(K, x, B);
        Eigen::FullPivLU<Mat> lu(H);
        if (!lu.isInvertible()) return std::nullopt;
        Vec step = lu.solve(-g);
        double sn = step.norm();
        if (sn > 0.5) step *= 0.5 / sn;  // trust region: stay within a chart
        x = SpherePoint(Vec(x.coords + B * step));
    }
    if (proj_grad(x).norm() < gtol) return x;
    return std::nullopt;
}

} // namespace detail

/// Multi-start Newton search for all critical points of K, with Morse
/// classification. Throws MorseError on degeneracy (vanishing Hessian margin
/// or vanishing Laplacian at a root) and on an Euler-characteristic mismatch,
/// which indicates missed roots.
inline MorseReport find_critical_points(const ScalarField& K, int seeds, double tol,
                                        const std::vector<SpherePoint>& extra_seeds = {},
                                        unsigned seed_rng = 20240901u) {
    const int n = K.n;
    if (seeds < 100) throw std::invalid_argument("find_critical_points: need seeds >= 100");
    if (!K.has_derivatives())
        throw std::invalid_argument("find_critical_points: field lacks derivative evaluators");

    // gradient scale for the convergence threshold
    std::mt19937 rng(seed_rng);
    double gscale = 0.0;
    for (int i = 0; i < 64; ++i) {
        SpherePoint p = random_sphere_point(n, rng);
        gscale = std::max(gscale, intrinsic_gradient(K, p).norm());
    }
    if (gscale == 0.0)
        throw MorseError("find_critical_points: degenerate critical manifold (constant field)");
    const double gtol = std::max(1e-14 * gscale, 1e-300);

    std::vector<SpherePoint> starts;
    starts.reserve(seeds + extra_seeds.size() + 2 * (n + 1));
    for (int i = 0; i <= n; ++i) {
        starts.push_back(SpherePoint::axis(n, i));
        SpherePoint m = SpherePoint::axis(n, i);
        m.coords = -m.coords;
        starts.push_back(m);
    }
    for (int i = 0; i < seeds; ++i) starts.push_back(random_sphere_point(n, rng));
    for (const auto& p : extra_seeds) starts.push_back(p);

    const double merge_radius = 10.0 * tol;
    std::vector<SpherePoint> roots;
    for (const auto& s : starts) {
        auto r = detail::newton_root(K, s, gtol);
        if (!r) continue;
        bool dup = false;
        for (const auto& q : roots)
            if (geodesic_distance(*r, q) < merge_radius) {
                dup = true;
                break;
            }
        if (!dup) roots.push_back(*r);
    }
    if (roots.empty()) throw MorseError("find_critical_points: no roots found");

    MorseReport rep;
    rep.counts.assign(n + 1, 0);
    rep.nd_margin = 1e300;
    for (const auto& r : roots) {
        Mat B = tangent_basis(r);
        Mat H = intrinsic_hessian(K, r, B);
        Eigen::SelfAdjointEigenSolver<Mat> es(H);
        const Vec& ev = es.eigenvalues();
        double margin = 1e300;
        int idx = 0;
        for (int i = 0; i < n; ++i) {
            margin = std::min(margin, std::abs(ev[i]));
            if (ev[i] < 0.0) ++idx;
        }
        double lap = ev.sum();
        if (margin < tol) {
            std::ostringstream os;
            os << "find_critical_points: degenerate (non-Morse) critical point, margin=" << margin
               << " at height " << r.height();
            throw MorseError(os.str());
        }
        if (std::abs(lap) < tol) {
            std::ostringstream os;
            os << "find_critical_points: critical point with vanishing Laplacian (generic "
                  "condition violated) at height "
               << r.height();
            throw MorseError(os.str());
        }
        CriticalPointRecord rec;
        rec.location = r;
        rec.value = K.value(r);
        rec.morse_index = idx;
        rec.laplacian = lap;
        rec.hessian_margin = margin;
        rep.records.push_back(std::move(rec));
        rep.counts[idx] += 1;
        rep.nd_margin = std::min(rep.nd_margin, std::abs(lap));
    }
    rep.euler_check = 0;
    for (int j = 0; j <= n; ++j) rep.euler_check += ((j % 2 == 0) ? 1L : -1L) * rep.counts[j];
    long expect = 1L + ((n % 2 == 0) ? 1L : -1L);
    if (rep.euler_check != expect) {
        std::ostringstream os;
        os << "find_critical_points: Euler characteristic mismatch (" << rep.euler_check
           << " != " << expect << "); roots may be missing, increase seeds";
        throw MorseError(os.str());
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Existence / non-existence criteria
// ---------------------------------------------------------------------------

struct IndexFormulaResult {
    long sum = 0;          // sum over {Delta K < 0} of (-1)^{m(K,x)}
    bool satisfied = false;  // sum != (-1)^n
    bool empty_negative_set = false;
};

inline IndexFormulaResult index_formula(const MorseReport& rep, int n) {
    IndexFormulaResult r;
    long cnt = 0;
    for (const auto& rec : rep.records)
        if (rec.laplacian < 0.0) {
            r.sum += (rec.morse_index % 2 == 0) ? 1 : -1;
            ++cnt;
        }
    r.empty_negative_set = (cnt == 0);
    long rhs = (n % 2 == 0) ? 1 : -1;
    r.satisfied = (r.sum != rhs);
    return r;
}

/// Strict-inequality verdict with a relative slack of 1e-12; equality within
/// the slack is reported as a boundary failure rather than silently resolved.
struct PinchVerdict {
    bool holds = false;
    bool boundary = false;
};

inline PinchVerdict strict_less(double lhs, double rhs) {
    double slack = 1e-12 * std::max(std::abs(lhs), std::abs(rhs));
    if (lhs < rhs - slack) return {true, false};
    if (lhs <= rhs + slack) return {false, true};
    return {false, false};
}

struct PinchReport {
    double K_max = 0.0, K_min = 0.0;
    std::vector<double> ordered_values;  // K_1 >= ... >= K_l over {grad K = 0, Delta K < 0}
    std::vector<double> E_lower;         // E_lower[m-1], m = 1..l  (minimal limit energies)
    std::vector<double> E_upper;         // maximal limit energies
    std::vector<PinchVerdict> holds_Pm;   // m = 1..l-1
    std::vector<PinchVerdict> holds_tPm;  // m = 1..l-1
};

inline PinchReport pinch_report(const MorseReport& rep, int n) {
    PinchReport out;
    if (rep.records.empty()) throw std::invalid_argument("pinch_report: empty report");
    out.K_max = -1e300;
    out.K_min = 1e300;
    for (const auto& rec : rep.records) {
        out.K_max = std::max(out.K_max, rec.value);
        out.K_min = std::min(out.K_min, rec.value);
        if (rec.laplacian < 0.0) out.ordered_values.push_back(rec.value);
    }
    if (out.ordered_values.empty())
        throw MorseError("pinch_report: no critical points with negative Laplacian");
    if (!(out.K_min > 0.0)) throw std::invalid_argument("pinch_report: K must be positive");
    std::sort(out.ordered_values.begin(), out.ordered_values.end(), std::greater<double>());

    const std::size_t l = out.ordered_values.size();
    for (std::size_t m = 1; m <= l; ++m) {
        std::vector<double> first(out.ordered_values.begin(), out.ordered_values.begin() + m);
        std::vector<double> last(out.ordered_values.end() - m, out.ordered_values.end());
        out.E_lower.push_back(limit_energy(first, n));
        out.E_upper.push_back(limit_energy(last, n));
    }
    double ratio = out.K_max / out.K_min;
    for (std::size_t m = 1; m + 1 <= l; ++m) {
        out.holds_Pm.push_back(
            strict_less(ratio, std::pow(double(m + 1) / double(m), 1.0 / (n - 2))));
        // energy-gap condition: (K_max/K_min)^{2/(p+1)} E_max_m < E_min_{m+1}
        // at the critical exponent, i.e. ratio^{(n-2)/n}; this is the exponent
        // the sublevel-gap argument and the implication chain from (P_m) both
        // require
        out.holds_tPm.push_back(strict_less(std::pow(ratio, double(n - 2) / double(n)),
                                            out.E_lower[m] / out.E_upper[m - 1]));
    }
    return out;
}

/// Degree bookkeeping over q-fold blow-up configurations:
/// sum over q-subsets S of {Delta K < 0} of (-1)^{(q-1) + sum_{i in S} (n - m_i)}.
inline long degree_count(const MorseReport& rep, int n, int q) {
    std::vector<int> idx;
    for (const auto& rec : rep.records)
        if (rec.laplacian < 0.0) idx.push_back(rec.morse_index);
    const int l = int(idx.size());
    if (q < 1 || q > l) throw std::domain_error("degree_count: q out of range");
    long total = 0;
    std::vector<int> comb(q);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
        long e = (q - 1);
        for (int k = 0; k < q; ++k) e += n - idx[comb[k]];
        total += (e % 2 == 0) ? 1 : -1;
        int pos = q - 1;
        while (pos >= 0 && comb[pos] == l - q + pos) --pos;
        if (pos < 0) break;
        ++comb[pos];
        for (int k = pos + 1; k < q; ++k) comb[k] = comb[k - 1] + 1;
    }
    return total;
}

/// Same count from an index multiset alone (used by brute-force identities).
inline long degree_count_indices(const std::vector<int>& indices, int n, int q) {
    const int l = int(indices.size());
    if (q < 1 || q > l) throw std::domain_error("degree_count_indices: q out of range");
    long total = 0;
    std::vector<int> comb(q);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
        long e = (q - 1);
        for (int k = 0; k < q; ++k) e += n - indices[comb[k]];
        total += (e % 2 == 0) ? 1 : -1;
        int pos = q - 1;
        while (pos >= 0 && comb[pos] == l - q + pos) --pos;
        if (pos < 0) break;
        ++comb[pos];
        for (int k = pos + 1; k < q; ++k) comb[k] = comb[k - 1] + 1;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Min-max criterion
// ---------------------------------------------------------------------------

/// One connected component of the region: which report records are its listed
/// local maxima, and the minimum of K over the component.
struct XiComponent {
    std::vector<std::size_t> maxima;  // indices into MorseReport::records
    double K_min_over_component;
};

struct MinmaxResult {
    int p = 0;          // listed maxima
    int components = 0;  // C
    int q = 0;          // competing saddle count in the value range
    bool gap_ok = false;
    bool holds = false;
    std::string reason;
};

/// Mountain-pass counting criterion: the one-bubble levels over the region
/// must stay below every two-bubble level (gap condition), and the number q
/// of index-one competitors (saddle blow-ups at K-index n-1 points with
/// negative Laplacian, in the relevant value range) must satisfy q < p - C.
inline MinmaxResult minmax_criterion(const MorseReport& rep,
                                     const std::vector<XiComponent>& xi, int n) {
    MinmaxResult res;
    res.components = int(xi.size());
    if (xi.empty()) throw std::invalid_argument("minmax_criterion: empty region");

    double min_over_xi = 1e300, max_listed = -1e300;
    std::vector<double> max_values;
    for (const auto& comp : xi) {
        if (comp.maxima.empty())
            throw std::invalid_argument("minmax_criterion: component without listed maxima");
        min_over_xi = std::min(min_over_xi, comp.K_min_over_component);
        for (std::size_t id : comp.maxima) {
            if (id >= rep.records.size())
                throw std::invalid_argument("minmax_criterion: bad record index");
            res.p += 1;
            max_values.push_back(rep.records[id].value);
            max_listed = std::max(max_listed, rep.records[id].value);
        }
    }

    // gap: sup of one-bubble levels over Xi < min two-bubble level over pairs
    double one_bubble_sup = limit_energy({min_over_xi}, n);
    double two_bubble_min = 1e300;
    for (std::size_t i = 0; i < max_values.size(); ++i)
        for (std::size_t j = i + 1; j < max_values.size(); ++j)
            two_bubble_min =
                std::min(two_bubble_min, limit_energy({max_values[i], max_values[j]}, n));
    res.gap_ok = (max_values.size() < 2) || (one_bubble_sup < two_bubble_min);
    if (!res.gap_ok) {
        res.holds = false;
        res.reason = "two-bubble level reachable";
        return res;
    }

    for (const auto& rec : rep.records)
        if (rec.laplacian < 0.0 && rec.morse_index == n - 1 && rec.value >= min_over_xi &&
            rec.value < max_listed)
            res.q += 1;

    res.holds = (res.q < res.p - res.components);
    if (!res.holds) res.reason = "not enough maxima per component";
    return res;
}

} // namespace sclab

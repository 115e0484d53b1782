#include <doctest.h>

#include <cmath>
#include <random>

#include "sclab/morse.hpp"

using namespace sclab;

TEST_CASE("critical points of the height function") {
    for (int n : {3, 5}) {
        ScalarField K = coordinate_field(n, n);  // Y_{n+1}
        MorseReport rep = find_critical_points(K, 200, 1e-9);
        REQUIRE(rep.records.size() == 2);
        CHECK(rep.counts[0] == 1);
        CHECK(rep.counts[n] == 1);
        for (const auto& r : rep.records) {
            if (r.morse_index == n) {
                CHECK(geodesic_distance(r.location, SpherePoint::north(n)) < 1e-9);
                CHECK(r.laplacian == doctest::Approx(-double(n)).epsilon(1e-9));
            } else {
                CHECK(r.morse_index == 0);
                CHECK(geodesic_distance(r.location, SpherePoint::south(n)) < 1e-9);
                CHECK(r.laplacian == doctest::Approx(double(n)).epsilon(1e-9));
            }
        }
        CHECK(rep.euler_check == 1 + ((n % 2 == 0) ? 1 : -1));
    }
}

TEST_CASE("constant field is rejected as degenerate") {
    ScalarField K = constant_field(5, 2.0);
    CHECK_THROWS_AS(find_critical_points(K, 150, 1e-9), MorseError);
}

TEST_CASE("perturbed height function: Euler check via independent scan") {
    const int n = 4;
    // K = 1 + eps Y_{n+1} + delta (Y_1^2 - Y_2^2)
    double eps = 0.5, delta = 0.05;
    Vec b = Vec::Zero(n + 1);
    b[n] = eps;
    Mat Q = Mat::Zero(n + 1, n + 1);
    Q(0, 0) = delta;
    Q(1, 1) = -delta;
    ScalarField K = quadratic_field(n, b, Q);
    MorseReport rep = find_critical_points(K, 600, 1e-9);
    CHECK(rep.euler_check == 1 + ((n % 2 == 0) ? 1 : -1));

    // brute-force gradient scan confirms the root list: every record is a
    // local minimum of |grad K| over a dense sample, and no dense-sample
    // point has small gradient far from all records
    std::mt19937 rng(9);
    for (int i = 0; i < 20000; ++i) {
        SpherePoint p = random_sphere_point(n, rng);
        double g = intrinsic_gradient(K, p).norm();
        if (g < 1e-3) {
            double best = 1e300;
            for (const auto& r : rep.records)
                best = std::min(best, geodesic_distance(p, r.location));
            CHECK(best < 0.2);
        }
    }
}

TEST_CASE("find_critical_points stable under seed refinement") {
    const int n = 5;
    int done = 0;
    for (unsigned seed = 2000; done < 3 && seed < 2040; ++seed) {
        ScalarField K = random_morse_field(n, seed);
        MorseReport r1, r2;
        try {
            r1 = find_critical_points(K, 800, 1e-9);
            r2 = find_critical_points(K, 3200, 1e-9, {}, 777u);
        } catch (const MorseError&) {
            continue;  // draws that need more seeds than either run provides
        }
        REQUIRE(r1.records.size() == r2.records.size());
        for (const auto& a : r1.records) {
            double best = 1e300;
            for (const auto& b2 : r2.records)
                best = std::min(best, geodesic_distance(a.location, b2.location));
            CHECK(best < 1e-8);
        }
        ++done;
    }
    CHECK(done == 3);
}

TEST_CASE("index formula") {
    const int n = 5;
    // height function: the only Delta K < 0 point is the index-n maximum
    ScalarField K = coordinate_field(n, n);
    MorseReport rep = find_critical_points(K, 200, 1e-9);
    IndexFormulaResult r = index_formula(rep, n);
    CHECK(r.sum == -1);  // (-1)^n, n = 5
    CHECK_FALSE(r.satisfied);

    // synthetic reports: two maxima + one index-(n-1) saddle, all Delta<0
    auto synth = [&](std::vector<std::pair<int, double>> pts) {
        MorseReport m;
        for (auto [idx, lap] : pts) {
            CriticalPointRecord rec;
            rec.location = SpherePoint::north(n);
            rec.value = 1.0;
            rec.morse_index = idx;
            rec.laplacian = lap;
            rec.hessian_margin = 1.0;
            m.records.push_back(rec);
        }
        m.counts.assign(n + 1, 0);
        return m;
    };
    IndexFormulaResult a = index_formula(synth({{5, -1}, {5, -1}, {4, -1}}), n);
    CHECK(a.sum == -1);
    CHECK_FALSE(a.satisfied);
    IndexFormulaResult bb = index_formula(synth({{5, -1}, {5, -1}, {4, +1}}), n);
    CHECK(bb.sum == -2);
    CHECK(bb.satisfied);
    IndexFormulaResult cc = index_formula(synth({}), n);
    CHECK(cc.sum == 0);
    CHECK(cc.satisfied);
    CHECK(cc.empty_negative_set);
}

namespace {
MorseReport synth_report(int n, const std::vector<std::pair<int, double>>& idx_and_value,
                         double lap_sign = -1.0) {
    MorseReport m;
    m.counts.assign(n + 1, 0);
    for (auto [idx, val] : idx_and_value) {
        CriticalPointRecord rec;
        rec.location = SpherePoint::north(n);
        rec.value = val;
        rec.morse_index = idx;
        rec.laplacian = lap_sign;
        rec.hessian_margin = 1.0;
        m.records.push_back(rec);
        m.counts[idx] += 1;
    }
    return m;
}
} // namespace

TEST_CASE("pinch report: closed-form threshold and implication chain") {
    const int n = 5;
    // ratio 1: everything holds
    {
        MorseReport m = synth_report(n, {{5, 2.0}, {5, 2.0}, {4, 2.0}});
        PinchReport p = pinch_report(m, n);
        for (const auto& v : p.holds_Pm) CHECK(v.holds);
        for (const auto& v : p.holds_tPm) CHECK(v.holds);
        // strata ordering
        for (std::size_t i = 1; i < p.E_lower.size(); ++i) {
            CHECK(p.E_lower[i] > p.E_lower[i - 1]);
            CHECK(p.E_upper[i] > p.E_upper[i - 1]);
        }
        for (std::size_t i = 0; i < p.E_lower.size(); ++i)
            CHECK(p.E_lower[i] <= p.E_upper[i] + 1e-14);
    }
    // n = 5, K_max = 2, K_min = 1.5: (P_1) needs ratio < 2^{1/3} = 1.2599 -> fails
    {
        MorseReport m = synth_report(n, {{5, 2.0}, {5, 1.5}});
        PinchReport p = pinch_report(m, n);
        REQUIRE(p.holds_Pm.size() == 1);
        CHECK_FALSE(p.holds_Pm[0].holds);
        CHECK(2.0 / 1.5 > std::pow(2.0, 1.0 / 3.0));
    }
    // boundary case reported as boundary, not holds
    {
        double ratio = std::pow(2.0, 1.0 / (n - 2));
        MorseReport m = synth_report(n, {{5, ratio}, {5, 1.0}});
        PinchReport p = pinch_report(m, n);
        CHECK_FALSE(p.holds_Pm[0].holds);
        CHECK(p.holds_Pm[0].boundary);
    }
    // implication chain (P_{m+1}) => (P_m) => (tP_m), (tP_{m1}) => (tP_{m2})
    // for m1 >= m2, over randomized critical values
    {
        std::mt19937 rng(21);
        std::uniform_real_distribution<double> uv(1.0, 1.6);
        for (int trial = 0; trial < 10000; ++trial) {
            int l = 2 + int(rng() % 5);
            std::vector<std::pair<int, double>> pts;
            for (int i = 0; i < l; ++i) pts.push_back({n, uv(rng)});
            PinchReport p = pinch_report(synth_report(n, pts), n);
            for (std::size_t m = 1; m < p.holds_Pm.size(); ++m)
                if (p.holds_Pm[m].holds) CHECK(p.holds_Pm[m - 1].holds);
            for (std::size_t m = 0; m < p.holds_Pm.size(); ++m)
                if (p.holds_Pm[m].holds) CHECK(p.holds_tPm[m].holds);
            for (std::size_t m = 1; m < p.holds_tPm.size(); ++m)
                if (p.holds_tPm[m].holds) CHECK(p.holds_tPm[m - 1].holds);
        }
    }
    // no negative-Laplacian points
    {
        MorseReport m = synth_report(n, {{0, 1.0}}, +1.0);
        CHECK_THROWS_AS(pinch_report(m, n), MorseError);
    }
}

TEST_CASE("degree count") {
    const int n = 5;
    // two maxima: q=1 -> 2, q=2 -> -1
    MorseReport m = synth_report(n, {{n, 2.0}, {n, 1.9}});
    CHECK(degree_count(m, n, 1) == 2);
    CHECK(degree_count(m, n, 2) == -1);
    CHECK_THROWS_AS(degree_count(m, n, 3), std::domain_error);
    CHECK_THROWS_AS(degree_count(m, n, 0), std::domain_error);

    // single max: q=1 -> 1; consistency with the index formula
    MorseReport s = synth_report(n, {{n, 2.0}});
    CHECK(degree_count(s, n, 1) == 1);
    IndexFormulaResult f = index_formula(s, n);
    CHECK(degree_count(s, n, 1) == ((n % 2 == 0) ? 1 : -1) * f.sum);

    // brute force over all index assignments with l <= 6: when the q = 1
    // degree equals 1, the q = 2 degree is (l-1)/2; so double-bubbling
    // contributes zero degree exactly when l = 1 (where pairs are vacuous).
    // A contractible two-bubble stratum therefore forces a single
    // negative-Laplacian point.
    for (int l = 1; l <= 6; ++l) {
        std::vector<int> idx(l, 0);
        long combos = 1;
        for (int i = 0; i < l; ++i) combos *= (n + 1);
        for (long c = 0; c < combos; ++c) {
            long t = c;
            for (int i = 0; i < l; ++i) {
                idx[i] = int(t % (n + 1));
                t /= (n + 1);
            }
            long d1 = degree_count_indices(idx, n, 1);
            if (d1 != 1) continue;
            if (l == 1) continue;  // no pairs to count
            long d2 = degree_count_indices(idx, n, 2);
            CHECK(d2 == (l - 1) / 2);
            CHECK(d2 != 0);
        }
    }
}

TEST_CASE("degree consistency on generated Morse fields") {
    // degree_count(q=1) = (-1)^n * index_formula.sum on arbitrary reports
    std::mt19937 rng(33);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 3 + int(rng() % 4);
        int l = 1 + int(rng() % 5);
        std::vector<std::pair<int, double>> pts;
        for (int i = 0; i < l; ++i) pts.push_back({int(rng() % (n + 1)), 1.0});
        MorseReport m;
        m.counts.assign(n + 1, 0);
        for (auto [idx, val] : pts) {
            CriticalPointRecord rec;
            rec.location = SpherePoint::north(n);
            rec.value = val;
            rec.morse_index = idx;
            rec.laplacian = -1.0;
            rec.hessian_margin = 1.0;
            m.records.push_back(rec);
        }
        long d1 = degree_count(m, n, 1);
        long sum = index_formula(m, n).sum;
        CHECK(d1 == ((n % 2 == 0) ? 1 : -1) * sum);
    }
}

TEST_CASE("minmax criterion") {
    const int n = 5;
    // p = 2 maxima in one component, q = 0: holds (0 < 1)
    {
        MorseReport m = synth_report(n, {{n, 2.0}, {n, 1.99}});
        XiComponent comp{{0, 1}, 1.95};
        MinmaxResult r = minmax_criterion(m, {comp}, n);
        CHECK(r.p == 2);
        CHECK(r.components == 1);
        CHECK(r.q == 0);
        CHECK(r.gap_ok);
        CHECK(r.holds);
    }
    // p = 2 in two components: q < 0 impossible
    {
        MorseReport m = synth_report(n, {{n, 2.0}, {n, 1.99}});
        MinmaxResult r = minmax_criterion(m, {XiComponent{{0}, 1.98}, XiComponent{{1}, 1.95}}, n);
        CHECK_FALSE(r.holds);
    }
    // p = 3, C = 1, q = 1: holds (1 < 2)
    {
        MorseReport m = synth_report(
            n, {{n, 2.0}, {n, 1.99}, {n, 1.98}, {n - 1, 1.97}});
        XiComponent comp{{0, 1, 2}, 1.9};
        MinmaxResult r = minmax_criterion(m, {comp}, n);
        CHECK(r.p == 3);
        CHECK(r.q == 1);
        CHECK(r.holds);
    }
    // gap violated when the component dips too low: two-bubble level reachable
    {
        MorseReport m = synth_report(n, {{n, 2.0}, {n, 1.99}});
        XiComponent comp{{0, 1}, 0.05};  // min K tiny -> one-bubble level huge
        MinmaxResult r = minmax_criterion(m, {comp}, n);
        CHECK_FALSE(r.gap_ok);
        CHECK_FALSE(r.holds);
        CHECK(r.reason == "two-bubble level reachable");
    }
}

TEST_CASE("euler property on generated Morse fields") {
    int done = 0;
    for (unsigned s = 0; done < 25; ++s) {
        int n = 3 + int(s % 3);
        ScalarField K = random_morse_field(n, 1000u + s);
        MorseReport rep;
        try {
            rep = find_critical_points(K, 500, 1e-9);
        } catch (const MorseError&) {
            continue;  // skip near-degenerate draws
        }
        CHECK(rep.euler_check == 1 + ((n % 2 == 0) ? 1 : -1));
        ++done;
    }
}

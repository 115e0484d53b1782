#include <doctest.h>

#include <cmath>
#include <random>

#include "sclab/kmfactory.hpp"
#include "sclab/morse.hpp"

using namespace sclab;

TEST_CASE("base monotone field: values, monotonicity, Laplacian floor") {
    const int n = 5;
    const double eps0 = 0.004, delta0 = 0.05;
    km::BaseMonotoneField B = km::base_monotone_field(n, eps0, delta0, 20000);
    ScalarField F = B.field();

    // value at the north pole: 2 eps0
    CHECK(F.value(SpherePoint::north(n)) == doctest::Approx(2.0 * eps0).epsilon(1e-12));
    // vanishes on {y_n = 0} near the south pole
    for (double r : {0.01, 0.05, 0.1}) {
        Vec y = Vec::Zero(n);
        y[0] = r;  // y_n = y[n-1] = 0
        SpherePoint p = stereo_lift(ChartPoint{y, Pole::North});
        CHECK(std::abs(F.value(p)) < 1e-15);
    }
    // quadratic value in the cap
    {
        Vec y = Vec::Zero(n);
        y[n - 1] = 0.05;
        SpherePoint p = stereo_lift(ChartPoint{y, Pole::North});
        CHECK(F.value(p) ==
              doctest::Approx(eps0 * 0.0025 / (8.0 * std::pow(double(n), 4))).epsilon(1e-10));
    }
    // certified region and constant
    CHECK(B.c_certified > 0.0);
    CHECK(B.u_certified >= -1.0 + delta0 - 1e-12);

    // monotonicity sample (again, independent of the builder's own scan)
    std::mt19937 rng(77);
    for (int i = 0; i < 20000; ++i) {
        SpherePoint p = random_sphere_point(n, rng);
        if (std::abs(p.height()) > 1.0 - 1e-8) continue;
        Vec e = Vec::Zero(n + 1);
        e[n] = 1.0;
        Vec gY = e - p.height() * p.coords;
        CHECK(intrinsic_gradient(F, p).dot(gY) >= -1e-12 * eps0);
    }

    // ambient/chart derivative consistency by finite differences
    {
        std::mt19937 r2(5);
        for (int i = 0; i < 40; ++i) {
            SpherePoint p = random_sphere_point(n, r2);
            if (p.height() > 0.9) continue;
            Vec g = F.df(p.coords);
            double h = 1e-6;
            for (int k = 0; k <= n; ++k) {
                Vec xp = p.coords, xm = p.coords;
                xp[k] += h;
                xm[k] -= h;
                double fd = (F.f(xp) - F.f(xm)) / (2 * h);
                CHECK(std::abs(fd - g[k]) < 1e-6 * std::max(1.0, std::abs(g[k])) + 1e-9);
            }
        }
    }
}

TEST_CASE("normal form patch: exact quadratic core, clean annulus") {
    const int n = 5;
    Vec p = Vec::Zero(n);
    p[0] = 0.3;
    Vec A(n);
    A << 1.0, -2.0, 3.0, 1.5, 2.0;  // (A)_nn > 0
    double d1 = 0.1, d2 = 0.01;
    km::NormalFormPatch patch = km::normal_form_patch(p, A, 0, 2, 0.7, d1, d2);

    // gradient at the center is exactly zero
    km::CE at_p = patch.eval(p);
    CHECK(at_p.g.norm() == 0.0);

    // exact unrotated quadratic inside |v| <= delta2
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    for (int i = 0; i < 200; ++i) {
        Vec v(n);
        for (int k = 0; k < n; ++k) v[k] = g(rng);
        v *= d2 * 0.9 / v.norm();
        km::CE e = patch.eval(Vec(p + v));
        double quad = 0.0;
        for (int k = 0; k < n; ++k) quad += A[k] * v[k] * v[k];
        CHECK(e.v == doctest::Approx(quad).epsilon(1e-14));
    }

    // derivative consistency (gradient and Hessian) against finite differences
    for (int i = 0; i < 50; ++i) {
        Vec v(n);
        for (int k = 0; k < n; ++k) v[k] = g(rng);
        v *= std::uniform_real_distribution<double>(d2, d1)(rng) / v.norm();
        Vec y = p + v;
        km::CE e = patch.eval(y);
        double h = 1e-6;
        for (int k = 0; k < n; ++k) {
            Vec yp = y, ym = y;
            yp[k] += h;
            ym[k] -= h;
            double fd = (patch.eval(yp).v - patch.eval(ym).v) / (2 * h);
            CHECK(std::abs(fd - e.g[k]) < 1e-6 * std::max(1.0, std::abs(e.g[k])));
            Vec gp = patch.eval(yp).g, gm = patch.eval(ym).g;
            for (int l = 0; l < n; ++l) {
                double fdh = (gp[l] - gm[l]) / (2 * h);
                CHECK(std::abs(fdh - e.H(k, l)) < 1e-5 * std::max(1.0, std::abs(e.H(k, l))));
            }
        }
    }

    // spurious-critical-point scan over the annulus (the builder already
    // scanned; repeat at higher density)
    double floor = 1e300;
    for (int i = 0; i < 1000000; ++i) {
        Vec v(n);
        for (int k = 0; k < n; ++k) v[k] = g(rng);
        v *= std::uniform_real_distribution<double>(d2, d1)(rng) / v.norm();
        floor = std::min(floor, patch.eval(Vec(p + v)).g.norm());
    }
    CHECK(floor > 0.0);

    CHECK_THROWS(km::normal_form_patch(p, Vec(Vec::Zero(n)), -1, -1, 0.0, d1, d2));
    {
        Vec bad = A;
        bad[n - 1] = -1.0;
        CHECK_THROWS(km::normal_form_patch(p, bad, -1, -1, 0.0, d1, d2));
    }
}

TEST_CASE("shear: exact critical relocation and zero-shear identity") {
    const int n = 5;
    // base: an exact quadratic saddle at (0', h0) expressed as a chart field
    double h0 = 0.002;
    Vec A(n);
    A << -2.0, 2.0, 2.0, 2.0, 2.0;
    auto base = [&](const Vec& y) {
        km::CE r = km::CE::zero(n);
        Vec c = Vec::Zero(n);
        c[n - 1] = h0;
        Vec v = y - c;
        for (int k = 0; k < n; ++k) {
            r.v += A[k] * v[k] * v[k];
            r.g[k] = 2.0 * A[k] * v[k];
            r.H(k, k) = 2.0 * A[k];
        }
        return r;
    };

    km::ShearSpec spec;
    spec.p_prime = {Vec::Zero(n - 1)};
    spec.h = {h0};
    spec.delta3 = 0.001;
    spec.validate();

    // after the shear the critical point sits at (0', 0) exactly
    km::CE at0 = km::shear_eval(base, spec, Vec::Zero(n));
    CHECK(at0.g.norm() < 1e-15);

    // zero shear is the identity
    km::ShearSpec none;
    none.p_prime = {Vec::Zero(n - 1)};
    none.h = {0.0};
    none.delta3 = 0.001;
    std::mt19937 rng(4);
    std::normal_distribution<double> g;
    for (int i = 0; i < 100; ++i) {
        Vec y(n);
        for (int k = 0; k < n; ++k) y[k] = 0.01 * g(rng);
        km::CE a = km::shear_eval(base, none, y);
        km::CE b = base(y);
        CHECK(a.v == b.v);
        CHECK((a.g - b.g).norm() == 0.0);
    }

    // derivative consistency across the shear transition annulus
    for (int i = 0; i < 60; ++i) {
        Vec y(n);
        for (int k = 0; k < n; ++k) y[k] = g(rng);
        y *= std::uniform_real_distribution<double>(0.0005, 0.0025)(rng) / y.norm();
        km::CE e = km::shear_eval(base, spec, y);
        double h = 1e-7;
        for (int k = 0; k < n; ++k) {
            Vec yp = y, ym = y;
            yp[k] += h;
            ym[k] -= h;
            double fd =
                (km::shear_eval(base, spec, yp).v - km::shear_eval(base, spec, ym).v) / (2 * h);
            CHECK(std::abs(fd - e.g[k]) < 1e-5 * std::max(1.0, std::abs(e.g[k])));
            Vec gp = km::shear_eval(base, spec, yp).g, gm = km::shear_eval(base, spec, ym).g;
            for (int l = 0; l < n; ++l) {
                double fdh = (gp[l] - gm[l]) / (2 * h);
                CHECK(std::abs(fdh - e.H(k, l)) < 2e-4 * std::max(1.0, std::abs(e.H(k, l))));
            }
        }
    }

    // gradient scan: no extra roots in the shear region
    double floor = 1e300;
    for (int i = 0; i < 1000000; ++i) {
        Vec y(n);
        for (int k = 0; k < n; ++k) y[k] = g(rng);
        double r = std::uniform_real_distribution<double>(1e-4, 4e-3)(rng);
        y *= r / y.norm();
        double gn = km::shear_eval(base, spec, y).g.norm();
        if (y.norm() > 1e-4) floor = std::min(floor, gn / y.norm());
    }
    CHECK(floor > 1e-2);  // gradient vanishes only linearly at the origin

    // separation precondition
    km::ShearSpec badsep;
    badsep.p_prime = {Vec::Zero(n - 1), Vec::Constant(n - 1, 1e-4)};
    badsep.h = {h0, h0};
    badsep.delta3 = 0.001;
    CHECK_THROWS_AS(badsep.validate(), ConstructionError);
}

TEST_CASE("assembled K_m: analytic critical points are exact, pinch is small") {
    KmParams P;
    P.n = 5;
    P.template_name = "three-point";
    KmField k2 = assemble_km(P, 2);

    // analytic critical points have vanishing intrinsic gradient
    for (const auto& rec : k2.analytic_crits) {
        double gn = intrinsic_gradient(k2.field, rec.location).norm();
        CHECK(gn < 1e-14);
        CHECK(rec.hessian_margin > 0.0);
    }
    // counts: M_0 = 2, M_1 = 1, M_5 = 1
    CHECK(k2.params.target_counts[0] == 2);
    CHECK(k2.params.target_counts[1] == 1);
    CHECK(k2.params.target_counts[5] == 1);

    // positivity and pinch
    std::mt19937 rng(6);
    double mx = -1e300, mn = 1e300;
    for (int i = 0; i < 40000; ++i) {
        SpherePoint p = random_sphere_point(5, rng);
        double v = k2.field.value(p);
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    CHECK(mn > 0.0);
    CHECK(mx / mn < 1.01);

    // Laplacian at every non-maximum critical point is positive
    for (const auto& rec : k2.analytic_crits)
        if (rec.morse_index != 5) CHECK(rec.laplacian > 0.0);
}

TEST_CASE("km verification across a short sequence; sabotage breaks clause c") {
    KmParams P;
    P.n = 5;
    P.template_name = "two-point";
    std::vector<KmField> seq;
    km::Factory fac(P);
    for (int m = 0; m <= 4; ++m) seq.push_back(fac.assemble(m));
    KmVerification V = verify_km(seq, 260);
    if (!V.all_pass())
        for (const auto& fmsg : V.failures) MESSAGE(fmsg);
    CHECK(V.counts_match);
    CHECK(V.single_max_at_north);
    CHECK(V.cluster_shrinks);
    CHECK(V.laplacian_uniform);
    CHECK(V.c3_decay);

    // sabotaged schedule: eps_m constant -> no C^3 convergence
    KmParams Pc = P;
    Pc.eps_ratio = 1.0;  // eps_m = const
    Pc.t_ratio = 1.4;
    km::Factory fc(Pc);
    std::vector<KmField> bad;
    for (int m = 0; m <= 3; ++m) bad.push_back(fc.assemble(m));
    KmVerification Vb = verify_km(bad, 260);
    CHECK_FALSE(Vb.c3_decay);
}

TEST_CASE("pinch ratio shrinks to 1 as eps0 decreases") {
    std::mt19937 rng(12);
    double prev_ratio = 1e300;
    for (double eps0 : {0.008, 0.004, 0.002}) {
        KmParams P;
        P.n = 5;
        P.template_name = "two-point";
        P.eps0 = eps0;
        KmField k = assemble_km(P, 1);
        double mx = -1e300, mn = 1e300;
        std::mt19937 r2(99);
        for (int i = 0; i < 20000; ++i) {
            SpherePoint p = random_sphere_point(5, r2);
            double v = k.field.value(p);
            mx = std::max(mx, v);
            mn = std::min(mn, v);
        }
        double ratio = mx / mn;
        CHECK(ratio < prev_ratio);
        CHECK(ratio > 1.0);
        prev_ratio = ratio;
    }
    CHECK(prev_ratio < 1.005);
}

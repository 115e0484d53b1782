#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sclab/bubbles.hpp"
#include "sclab/constants.hpp"
#include "sclab/scalar_field.hpp"
#include "sclab/sphere.hpp"

namespace sclab {

/// Uniform polar-angle discretization of the axisymmetric variational
/// problem. The conformal-Laplacian energy is assembled as an exact quadratic
/// form (staggered first differences), so the discrete functional has exact
/// discrete derivatives and the gradient flow is monotone by construction.
class AxisymDiscretization {
public:
    int n;
    std::size_t N;
    double h;
    RoundMetricConstants rc;
    std::vector<double> theta;
    Vec w;      // nodal quadrature weights  (|S^{n-1}| sin^{n-1} * simpson)
    Vec wsin2;  // |S^{n-1}| sin^{n-3} * simpson   (angular-potential weights)
    Vec Ad;     // tridiagonal stiffness: diagonal
    Vec Al;     // sub/super diagonal

    AxisymDiscretization(int dim, std::size_t nodes) : n(dim), N(nodes), rc(dim) {
        if (N < 16) throw std::invalid_argument("AxisymDiscretization: need >= 16 nodes");
        h = pi / double(N - 1);
        theta.resize(N);
        for (std::size_t i = 0; i < N; ++i) theta[i] = h * double(i);
        theta.back() = pi;

        auto simpson = detail::simpson_weights(N, h);
        w = Vec::Zero(N);
        wsin2 = Vec::Zero(N);
        for (std::size_t i = 0; i < N; ++i) {
            double s = std::sin(theta[i]);
            w[i] = rc.omega * simpson[i] * std::pow(s, n - 1);
            wsin2[i] = rc.omega * simpson[i] * std::pow(s, n - 3);
        }

        Ad = Vec::Zero(N);
        Al = Vec::Zero(N - 1);
        for (std::size_t k = 0; k + 1 < N; ++k) {
            double smid = std::sin(0.5 * (theta[k] + theta[k + 1]));
            double e = rc.c_n * rc.omega * std::pow(smid, n - 1) / h;
            Ad[k] += e;
            Ad[k + 1] += e;
            Al[k] -= e;
        }
        for (std::size_t i = 0; i < N; ++i) Ad[i] += rc.R0 * w[i];
    }

    Vec applyA(const Vec& u) const {
        Vec out(N);
        for (std::size_t i = 0; i < N; ++i) {
            double v = Ad[i] * u[i];
            if (i > 0) v += Al[i - 1] * u[i - 1];
            if (i + 1 < N) v += Al[i] * u[i + 1];
            out[i] = v;
        }
        return out;
    }

    double inner(const Vec& u, const Vec& v) const { return u.dot(applyA(v)); }
    double norm(const Vec& u) const { return std::sqrt(std::max(0.0, inner(u, u))); }

    /// Thomas solve of A x = b (A is SPD tridiagonal).
    Vec solveA(const Vec& b) const {
        Vec c(N), d(N);
        c[0] = Al[0] / Ad[0];
        d[0] = b[0] / Ad[0];
        for (std::size_t i = 1; i < N; ++i) {
            double m = Ad[i] - Al[i - 1] * c[i - 1];
            c[i] = (i + 1 < N) ? Al[i] / m : 0.0;
            d[i] = (b[i] - Al[i - 1] * d[i - 1]) / m;
        }
        Vec x(N);
        x[N - 1] = d[N - 1];
        for (std::size_t i = N - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
        return x;
    }

    double integrate(const Vec& f) const { return w.dot(f); }
    double total_weight() const { return w.sum(); }

    Vec sample_axisym(const ScalarField& K) const {
        Vec out(N);
        for (std::size_t i = 0; i < N; ++i)
            out[i] = K.value(SpherePoint::on_meridian(n, theta[i]));
        return out;
    }

    AxisymProfile to_profile(const Vec& u) const {
        return AxisymProfile(theta, std::vector<double>(u.data(), u.data() + N), n);
    }
};

/// A point of the constraint manifold { u >= 0, ||u||_{L_{g0}} = 1 } together
/// with tau and the (nodal) curvature.
struct VariationalState {
    const AxisymDiscretization* disc = nullptr;
    Vec u;
    Vec K;
    double tau = 0.0;
    double r = 0.0;  // cached ||u||^2
    double k = 0.0;  // cached int K u^{p+1}

    double p() const { return disc->rc.critical_exponent() - tau; }

    void refresh() {
        r = disc->inner(u, u);
        double pp1 = p() + 1.0;
        k = 0.0;
        for (std::size_t i = 0; i < disc->N; ++i)
            k += disc->w[i] * K[i] * std::pow(std::max(u[i], 0.0), pp1);
        if (!(k > 0.0)) throw std::domain_error("VariationalState: nonpositive denominator");
    }

    void normalize() {
        double nr = disc->norm(u);
        if (!(nr > 0.0)) throw std::domain_error("VariationalState: zero norm");
        u /= nr;
        refresh();
    }

    double functional() const { return r / std::pow(k, 2.0 / (p() + 1.0)); }
};

inline VariationalState make_state(const AxisymDiscretization& disc, const Vec& u0, const Vec& K,
                                   double tau) {
    VariationalState s;
    s.disc = &disc;
    s.u = u0;
    s.K = K;
    s.tau = tau;
    for (std::size_t i = 0; i < disc.N; ++i)
        if (!(s.u[i] > 0.0)) throw std::invalid_argument("make_state: u must be positive");
    s.normalize();
    return s;
}

inline VariationalState constant_state(const AxisymDiscretization& disc, double tau,
                                       std::optional<Vec> K = std::nullopt) {
    Vec Kv = K ? *K : Vec(Vec::Ones(disc.N));
    return make_state(disc, Vec::Ones(disc.N), Kv, tau);
}

/// Reference subcritical Yamabe energy: the functional of the same state with
/// K replaced by 1.
inline double functional_reference(const VariationalState& s) {
    VariationalState t = s;
    t.K = Vec::Ones(s.disc->N);
    t.refresh();
    return t.functional();
}

/// Euclidean-coordinate gradient of the discrete J_tau.
inline Vec functional_gradient(const VariationalState& s) {
    const auto& d = *s.disc;
    double pp = s.p();
    double scale = 2.0 * std::pow(s.k, -2.0 / (pp + 1.0));
    Vec Au = d.applyA(s.u);
    Vec g(d.N);
    for (std::size_t i = 0; i < d.N; ++i)
        g[i] = scale * (Au[i] - (s.r / s.k) * d.w[i] * s.K[i] * std::pow(s.u[i], pp));
    return g;
}

struct FlowDirection {
    Vec dir;          // tangential L_{g0}-gradient direction
    double dir_norm;  // ||dir||_{L_{g0}}
    double scale;     // 2 k^{-2/(p+1)}, the positive factor of dJ
    double grad_norm; // = dir_norm; the state is on the unit sphere of the
                      // same metric, so this is already a relative measure
};

/// Tangential L_{g0}-gradient (the direction the constrained flow follows).
inline FlowDirection flow_direction(const VariationalState& s) {
    const auto& d = *s.disc;
    double pp = s.p();
    Vec rhs(d.N);
    for (std::size_t i = 0; i < d.N; ++i)
        rhs[i] = d.w[i] * s.K[i] * std::pow(s.u[i], pp);
    Vec gL = s.u - (s.r / s.k) * d.solveA(rhs);
    // project onto the tangent space of the norm sphere
    double c = d.inner(s.u, gL) / s.r;
    gL -= c * s.u;
    FlowDirection f;
    f.dir_norm = d.norm(gL);
    f.scale = 2.0 * std::pow(s.k, -2.0 / (pp + 1.0));
    f.grad_norm = f.dir_norm;
    f.dir = std::move(gL);
    return f;
}

struct FlowOptions {
    double grad_tol = 1e-9;
    int max_iters = 20000;
    double step0 = 1.0;
    double armijo = 1e-4;
    double peak_threshold = 1e6;  // blow-up classification (tau = 0 runs)
    bool record_trace = false;
};

struct FlowResult {
    VariationalState state;
    bool converged = false;
    bool at_resolution = false;  // converged because the predicted decrease
                                 // fell below the floating-point resolution
                                 // of J, the discrete optimality limit
    bool diverged = false;   // peak passed the blow-up threshold
    bool stalled = false;    // step-size underflow
    int iterations = 0;
    double grad_norm = 0.0;
    std::vector<double> J_trace;
};

/// Projected gradient descent on the constraint manifold with backtracking;
/// every accepted step decreases J_tau, keeps the norm at 1 and keeps u > 0
/// nodewise (steps violating positivity are rejected and halved).
inline FlowResult flow(VariationalState s, const FlowOptions& opt = {}) {
    FlowResult res;
    double step = opt.step0;
    double J = s.functional();
    if (opt.record_trace) res.J_trace.push_back(J);
    for (int it = 0; it < opt.max_iters; ++it) {
        FlowDirection fd = flow_direction(s);
        res.grad_norm = fd.grad_norm;
        if (fd.grad_norm < opt.grad_tol) {
            res.converged = true;
            res.iterations = it;
            break;
        }
        // true directional derivative of J along -dir
        double slope = fd.scale * fd.dir_norm * fd.dir_norm;
        bool accepted = false;
        double st = step;
        for (int bt = 0; bt < 60; ++bt) {
            Vec cand = s.u - st * fd.dir;
            double mn = cand.minCoeff();
            if (mn <= 0.0) {
                st *= 0.5;
                continue;
            }
            VariationalState trial = s;
            trial.u = std::move(cand);
            trial.normalize();
            double Jt = trial.functional();
            if (Jt <= J - opt.armijo * st * slope) {
                s = std::move(trial);
                J = Jt;
                accepted = true;
                step = std::min(st * 2.0, 1e6);
                break;
            }
            st *= 0.5;
        }
        if (!accepted) {
            // when the certifiable Armijo decrease is below the rounding
            // noise of J the line search coin-flips; that is the discrete
            // optimality limit, not a failure
            if (slope < (64.0 / opt.armijo) * 2.2e-16 * std::abs(J)) {
                res.converged = true;
                res.at_resolution = true;
            } else {
                res.stalled = true;
            }
            res.iterations = it;
            break;
        }
        if (opt.record_trace) res.J_trace.push_back(J);
        if (s.u.maxCoeff() > opt.peak_threshold) {
            res.diverged = true;
            res.iterations = it;
            break;
        }
        res.iterations = it + 1;
    }
    res.state = std::move(s);
    return res;
}

struct SolveReport {
    bool converged = false;
    double grad_norm = 0.0;
    double J_value = 0.0;
    double multiplier = 0.0;  // mu with A u = mu w K u^p at the solution
    std::vector<int> hessian_sector_indices;  // per-l negative counts (unweighted)
    long morse_index_total = 0;
};

/// Newton refinement of the constrained critical-point system
///   A u - mu (w K u^p) = 0,   ||u||^2 = 1.
inline SolveReport newton_refine(VariationalState& s, double tol = 1e-11, int max_iter = 40) {
    const auto& d = *s.disc;
    const std::size_t N = d.N;
    double pp = s.p();
    double mu = s.r / s.k;
    SolveReport rep;

    using Trip = Eigen::Triplet<double>;
    for (int it = 0; it < max_iter; ++it) {
        Vec Au = d.applyA(s.u);
        Vec b(N), F(N);
        for (std::size_t i = 0; i < N; ++i) {
            b[i] = d.w[i] * s.K[i] * std::pow(s.u[i], pp);
            F[i] = Au[i] - mu * b[i];
        }
        double Fc = 0.5 * (s.r - 1.0);
        double fn = F.norm() + std::abs(Fc);
        rep.grad_norm = flow_direction(s).grad_norm;
        if (rep.grad_norm < tol && fn < tol * 10.0) break;

        std::vector<Trip> trips;
        trips.reserve(4 * N);
        for (std::size_t i = 0; i < N; ++i) {
            double diag = d.Ad[i] - mu * pp * d.w[i] * s.K[i] * std::pow(s.u[i], pp - 1.0);
            trips.emplace_back(int(i), int(i), diag);
            if (i + 1 < N) {
                trips.emplace_back(int(i), int(i + 1), d.Al[i]);
                trips.emplace_back(int(i + 1), int(i), d.Al[i]);
            }
            trips.emplace_back(int(i), int(N), -b[i]);
            trips.emplace_back(int(N), int(i), Au[i]);
        }
        Eigen::SparseMatrix<double> Jm(N + 1, N + 1);
        Jm.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(Jm);
        if (lu.info() != Eigen::Success)
            throw std::runtime_error("newton_refine: singular Jacobian (degenerate state)");
        Vec rhs(N + 1);
        rhs.head(N) = -F;
        rhs[N] = -Fc;
        Vec delta = lu.solve(rhs);
        double damp = 1.0;
        while (damp > 1e-6) {
            Vec un = s.u + damp * delta.head(N);
            if (un.minCoeff() > 0.0) {
                s.u = std::move(un);
                break;
            }
            damp *= 0.5;
        }
        mu += damp * delta[N];
        s.refresh();
    }
    s.refresh();
    rep.converged = rep.grad_norm < tol;
    rep.J_value = s.functional();
    rep.multiplier = mu;
    return rep;
}

// ---------------------------------------------------------------------------
// Sector Hessian spectra
// ---------------------------------------------------------------------------

/// Negative-eigenvalue counts of the second variation restricted to the
/// spherical-harmonic sectors l = 0..l_max. The angular factor contributes
/// the potential l(l+n-2)/sin^2(theta); the l = 0 sector carries the rank-one
/// terms of the second variation and the norm constraint. The total Morse
/// index weights each sector count with the dimension of the harmonic space.
struct SectorSpectrum {
    std::vector<int> negatives;       // per sector
    std::vector<long> multiplicity;   // dim of degree-l harmonics on S^{n-1}
    long morse_index = 0;
    std::vector<double> smallest;     // most negative (or smallest) eigenvalue per sector
};

inline SectorSpectrum hessian_sector_spectrum(const VariationalState& s, int l_max) {
    const auto& d = *s.disc;
    const int n = d.n;
    const std::size_t N = d.N;
    const double pp = s.p();
    if (l_max < n + 1) throw std::invalid_argument("hessian_sector_spectrum: need l_max >= n+1");

    Mat A = Mat::Zero(N, N);
    for (std::size_t i = 0; i < N; ++i) {
        A(i, i) = d.Ad[i];
        if (i + 1 < N) {
            A(i, i + 1) = d.Al[i];
            A(i + 1, i) = d.Al[i];
        }
    }
    Vec pot(N), b(N), Au = d.applyA(s.u);
    for (std::size_t i = 0; i < N; ++i) {
        pot[i] = d.w[i] * s.K[i] * std::pow(s.u[i], pp - 1.0);
        b[i] = d.w[i] * s.K[i] * std::pow(s.u[i], pp);
    }
    const double mu = s.r / s.k;

    SectorSpectrum out;
    for (int l = 0; l <= l_max; ++l) {
        Mat Bl = A;
        if (l > 0) {
            double cl = d.rc.c_n * double(l) * (l + n - 2);
            for (std::size_t i = 0; i < N; ++i) Bl(i, i) += cl * d.wsin2[i];
        }
        Mat H = Bl;
        for (std::size_t i = 0; i < N; ++i) H(i, i) -= pp * mu * pot[i];

        if (l == 0) {
            // rank-one terms of the second variation (they vanish on l >= 1
            // sectors by angular orthogonality)
            H -= (2.0 / s.k) * (Au * b.transpose() + b * Au.transpose());
            H += ((pp + 3.0) * s.r / (s.k * s.k)) * (b * b.transpose());
            // restrict to the tangent space {v : <u,v>_A = 0}; then push the
            // normal direction (killed by P, eigenvalue 0 +- roundoff) to
            // solidly positive curvature so it cannot pollute the count
            Mat P = Mat::Identity(N, N) - (s.u * Au.transpose()) / s.r;
            H = P.transpose() * H * P;
            H += (Bl.diagonal().mean() / Au.squaredNorm()) * (Au * Au.transpose());
        }

        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(H, Bl);
        int neg = 0;
        for (int i = 0; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()[i] < 0.0) ++neg;
        out.negatives.push_back(neg);
        out.multiplicity.push_back(harmonic_multiplicity(n, l));
        out.smallest.push_back(es.eigenvalues().size() ? es.eigenvalues()[0] : 0.0);
        out.morse_index += long(neg) * out.multiplicity.back();
    }
    return out;
}

// ---------------------------------------------------------------------------
// tau-continuation with blow-up tracking
// ---------------------------------------------------------------------------

struct ContinuationRow {
    double tau = 0.0;
    double J = 0.0;
    double theta_peak = 0.0;
    double peak = 0.0;
    double lambda_est = 0.0;
    bool converged = false;
};

struct ContinuationReport {
    std::vector<ContinuationRow> rows;
    double slope = 0.0;             // fitted d log(lambda) / d log(tau)
    double J_extrapolated = 0.0;    // linear-in-tau extrapolation to tau = 0
    double limit_energy_q1 = 0.0;   // c_hat0 K(x1)^{(2-n)/n}
    double laplacian_at_peak = 0.0; // Delta K at the concentration point
    double c2_mean = 0.0;           // lambda^2 tau K / |Delta K|
    double c2_cv = 0.0;             // coefficient of variation of the estimate
    bool completed = false;
};

/// Warm-started decreasing-tau continuation. K is an axisymmetric field (its
/// exact Laplacian locates the concentration structure).
inline ContinuationReport continuation(const ScalarField& Kfield,
                                       const std::vector<double>& tau_schedule,
                                       const AxisymDiscretization& disc,
                                       const Vec& seed_profile, const FlowOptions& fopt = {}) {
    if (tau_schedule.size() < 5)
        throw std::invalid_argument("continuation: schedule needs >= 5 entries");
    for (std::size_t i = 1; i < tau_schedule.size(); ++i)
        if (!(tau_schedule[i] < tau_schedule[i - 1]))
            throw std::invalid_argument("continuation: schedule must decrease");

    Vec K = disc.sample_axisym(Kfield);
    ContinuationReport rep;
    Vec u = seed_profile;
    for (double tau : tau_schedule) {
        VariationalState st = make_state(disc, u, K, tau);
        FlowResult fr = flow(st, fopt);
        SolveReport nr;
        bool good = fr.converged || fr.grad_norm < 1e-4;
        if (good) {
            try {
                nr = newton_refine(fr.state, 1e-11);
            } catch (const std::exception&) {
                nr.converged = false;
            }
        }
        ContinuationRow row;
        row.tau = tau;
        row.converged = good && nr.converged;
        if (!row.converged) {
            rep.rows.push_back(row);
            rep.completed = false;
            return rep;  // partial report
        }
        const VariationalState& sol = fr.state;
        Eigen::Index imax;
        row.peak = sol.u.maxCoeff(&imax);
        row.theta_peak = disc.theta[imax];
        row.J = sol.functional();
        double Kpk = K[imax];
        row.lambda_est = std::pow(row.peak, 2.0 / (disc.n - 2)) * std::sqrt(std::max(Kpk, 1e-300));
        rep.rows.push_back(row);
        u = sol.u;
    }
    rep.completed = true;

    // slope of log lambda against log tau
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const auto& r : rep.rows) {
        double X = std::log(r.tau), Y = std::log(r.lambda_est);
        sx += X;
        sy += Y;
        sxx += X * X;
        sxy += X * Y;
        ++m;
    }
    rep.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);

    const auto& last = rep.rows.back();
    const auto& prev = rep.rows[rep.rows.size() - 2];
    rep.J_extrapolated =
        last.J + (prev.J - last.J) / (prev.tau - last.tau) * (0.0 - last.tau);

    SpherePoint xpk = SpherePoint::on_meridian(disc.n, last.theta_peak);
    rep.laplacian_at_peak = laplace_beltrami(Kfield, xpk);
    rep.limit_energy_q1 = sobolev_constant(disc.n).value *
                          std::pow(Kfield.value(xpk), (2.0 - disc.n) / double(disc.n));

    // c2 estimate from lambda^2 ~ c2 |Delta K| / (K tau)
    std::vector<double> c2;
    for (const auto& r : rep.rows) {
        SpherePoint xp = SpherePoint::on_meridian(disc.n, r.theta_peak);
        double lap = laplace_beltrami(Kfield, xp);
        double Kv = Kfield.value(xp);
        if (lap < 0.0)
            c2.push_back(r.lambda_est * r.lambda_est * r.tau * Kv / std::abs(lap));
    }
    if (!c2.empty()) {
        double mean = 0.0;
        for (double v : c2) mean += v;
        mean /= double(c2.size());
        double var = 0.0;
        for (double v : c2) var += (v - mean) * (v - mean);
        var /= double(c2.size());
        rep.c2_mean = mean;
        rep.c2_cv = std::sqrt(var) / mean;
    }
    return rep;
}

} // namespace sclab

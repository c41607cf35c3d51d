#include "acdisk/rhsolver.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

namespace acdisk {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

// Complex-linear / conjugate-linear split of the lifted structure in the
// phase chart at one point: JJ realify(v) = realify(P v + Q conj(v)).
void chart_split(const Mat& JJ, CMat& P, CMat& Q) {
    const int m = static_cast<int>(JJ.rows()) / 2;
    P.resize(m, m);
    Q.resize(m, m);
    CVec e = CVec::Zero(m);
    for (int a = 0; a < m; ++a) {
        e(a) = 1.0;
        const CVec le = phase_complex(JJ * phase_real(e));
        e(a) = cplx(0.0, 1.0);
        const CVec li = phase_complex(JJ * phase_real(e));
        e(a) = 0.0;
        P.col(a) = 0.5 * (le - cplx(0, 1) * li);
        Q.col(a) = 0.5 * (le + cplx(0, 1) * li);
    }
}

// Solve (iI + P) w + Q conj(w) = rhs as a real system of doubled size.
CVec solve_conj_linear(const CMat& P, const CMat& Q, const CVec& rhs) {
    const int m = static_cast<int>(rhs.size());
    CMat A = P;
    A.diagonal().array() += cplx(0.0, 1.0);
    Mat S(2 * m, 2 * m);
    S.topLeftCorner(m, m) = A.real() + Q.real();
    S.topRightCorner(m, m) = -A.imag() + Q.imag();
    S.bottomLeftCorner(m, m) = A.imag() + Q.imag();
    S.bottomRightCorner(m, m) = A.real() - Q.real();
    Vec b(2 * m);
    b.head(m) = rhs.real();
    b.tail(m) = rhs.imag();
    const Vec w = Eigen::PartialPivLU<Mat>(S).solve(b);
    require(w.allFinite(), "FactorizationFailed", "pointwise source solve failed");
    CVec out(m);
    for (int j = 0; j < m; ++j) out(j) = cplx(w(j), w(j + m));
    return out;
}

// Orthonormal basis of w-perp (columns), via the Householder reflector that
// sends e0 to the direction of w.
Mat perp_basis(const Vec& w) {
    const int d = static_cast<int>(w.size());
    Vec u = w / w.norm();
    u(0) += (u(0) >= 0.0 ? 1.0 : -1.0);
    const Mat H = Mat::Identity(d, d) - (2.0 / u.squaredNorm()) * (u * u.transpose());
    return H.rightCols(d - 1);
}

// Smallest s > 0 with rho(base + s dir) = 0, assuming base is inside (or on)
// the boundary and the ray eventually exits.
double ray_root(const Domain& domain, const Vec& base, const Vec& dir) {
    double lo = 0.0, hi = 1e-3;
    int guard = 0;
    while (domain.rho(base + hi * dir) < 0.0) {
        lo = hi;
        hi *= 2.0;
        require(++guard < 80, "LeftDomain", "chord ray misses the boundary");
    }
    for (int it = 0; it < 120; ++it) {
        const double mid = 0.5 * (lo + hi);
        (domain.rho(base + mid * dir) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct RHProblem {
    const Domain& domain;
    const AlmostComplexStructure& J;
    SolverOptions opt;
    bool boundary_mode;
    Vec x0, v0;
    double nu_target = 0.0;
    double cone_a = -1.0;

    int n, nc, N, M, K;
    CauchyGreen cg;
    std::vector<cplx> zeta;
    Mat Jx0;

    // Source cache for deformed structures: q is the conjugate-derivative part
    // of the disk map, found by pointwise Picard iteration, and the t_* fields
    // hold the Cauchy-Green integral of q (frozen while a Newton step is
    // assembled, refreshed after every accepted step).
    bool deformed;
    std::vector<CMat> q;
    bool have_source = false;

    RHProblem(const Domain& dom, const AlmostComplexStructure& Jin, bool bmode, Vec x0_, Vec v0_,
              double nu, const SolverOptions& o)
        : domain(dom),
          J(Jin),
          opt(o),
          boundary_mode(bmode),
          x0(std::move(x0_)),
          v0(std::move(v0_)),
          nu_target(nu),
          cg(o.N, o.M) {
        n = J.n;
        nc = 2 * n;
        N = opt.N;
        M = opt.M;
        require(N >= 32 && (N & (N - 1)) == 0, "InvalidConfig", "N must be a power of two >= 32");
        require(M >= 8, "ResolutionTooLow", "need at least 8 rings");
        K = opt.band > 0 ? opt.band : N / 4;
        require(K >= 2 && 2 * K < N, "InvalidConfig", "band must satisfy 2 <= K < N/2");
        require(static_cast<int>(x0.size()) == nc && static_cast<int>(v0.size()) == nc,
                "DimensionMismatch", "x0 and v0 must be 2n-dimensional chart vectors");
        zeta.resize(N);
        for (int k = 0; k < N; ++k) {
            const double th = 2.0 * M_PI * k / N;
            zeta[k] = cplx(std::cos(th), std::sin(th));
        }
        deformed = !J.standard;
        Jx0 = J.eval(x0);
    }

    int unknowns() const { return 2 * nc * (2 * K + 1) + 1; }
    int rows() const {
        return 2 * nc * K + (nc + 1) * N + (boundary_mode ? 2 * nc + 3 : 2 * nc + 1);
    }

    Vec pack(const CMat& coeffs, double mu) const {
        Vec U(unknowns());
        int at = 0;
        for (int k = -K; k <= K; ++k) {
            const int idx = index_of_freq(k, N);
            for (int c = 0; c < nc; ++c) {
                U(at++) = coeffs(c, idx).real();
                U(at++) = coeffs(c, idx).imag();
            }
        }
        U(at) = mu;
        return U;
    }

    CMat unpack(const Vec& U) const {
        CMat coeffs = CMat::Zero(nc, N);
        int at = 0;
        for (int k = -K; k <= K; ++k) {
            const int idx = index_of_freq(k, N);
            for (int c = 0; c < nc; ++c) {
                coeffs(c, idx) = cplx(U(at), U(at + 1));
                at += 2;
            }
        }
        return coeffs;
    }

    Vec from_solution(const StationarySolution& sol) const {
        require(sol.lift.comps == nc, "DimensionMismatch",
                "warm start has the wrong number of components");
        const int Ns = sol.lift.N;
        CMat coeffs = CMat::Zero(nc, N);
        for (int k = -K; k <= K; ++k)
            if (std::abs(k) <= Ns / 2 - 1)
                coeffs.col(index_of_freq(k, N)) = sol.lift.coeffs.col(index_of_freq(k, Ns));
        return pack(coeffs, sol.mu);
    }

    std::vector<CMat> source_or_empty() const {
        return (deformed && have_source) ? q : std::vector<CMat>{};
    }

    // Nodewise fiber initialization: the conormal direction at the base point,
    // rotated so the circle action brings it back onto the gradient ray. The
    // overall fiber scale is wrong by a constant; the normalization row fixes
    // it within one Newton step.
    void seed_fiber(CMat& coeffs, const CVec& c0, const CVec& c1) const {
        CMat fibv(n, N);
        for (int j = 0; j < N; ++j) {
            const Vec xj = base_real(CVec(c0 + zeta[j] * c1));
            fibv.col(j) = zeta[j] * fiber_complex(domain.grad(xj));
        }
        for (int c = 0; c < n; ++c) {
            CVec fc = fourier_coeffs(fibv.row(c).transpose());
            for (int j = 0; j < N; ++j)
                if (std::abs(freq_of_index(j, N)) > K) fc(j) = 0.0;
            coeffs.row(n + c) = fc.transpose();
        }
    }

    Vec init_center() const {
        require(domain.rho(x0) < 0.0, "InvalidConfig", "center point must be interior");
        require(v0.norm() > 0.0, "InvalidConfig", "direction must be nonzero");
        const double c = ray_root(domain, x0, v0);
        CMat coeffs = CMat::Zero(nc, N);
        const CVec z0 = base_complex(x0);
        const CVec vz = c * base_complex(v0);
        coeffs.col(index_of_freq(0, N)).head(n) = z0;
        coeffs.col(index_of_freq(1, N)).head(n) = vz;
        seed_fiber(coeffs, z0, vz);
        return pack(coeffs, c);
    }

    Vec init_boundary() const {
        require(std::abs(domain.rho(x0)) < 1e-8, "NotOnBoundary",
                "boundary normalization needs x0 on the boundary");
        require(v0.norm() > 0.0, "InvalidConfig", "direction must be nonzero");
        const Vec g = domain.grad(x0);
        // The disk enters the domain at x0, so the admissible cone sits
        // around the inward normal; the anchored velocity F_x(1) points the
        // other way and mu comes out negative for such directions.
        const double cosang = -v0.dot(g) / (v0.norm() * g.norm());
        require(cosang > cone_a, "ConeViolation",
                "direction leaves the admissible cone around the inward normal");
        const double c = ray_root(domain, x0, v0);
        CMat coeffs = CMat::Zero(nc, N);
        const CVec vz = -0.5 * c * base_complex(v0);
        const CVec z0 = base_complex(x0) - vz;
        coeffs.col(index_of_freq(0, N)).head(n) = z0;
        coeffs.col(index_of_freq(1, N)).head(n) = vz;
        seed_fiber(coeffs, z0, vz);
        return pack(coeffs, -1.0);
    }

    std::vector<CMat> sweep_source(const CMat& coeffs, const std::vector<CMat>& q_in,
                                   double* delta_out) const {
        std::vector<CMat> qn = q_in;
        const auto ext = cg.extend(coeffs, q_in, false, true);
        const auto uz = cg.z_derivative(coeffs, q_in);
        double delta = 0.0;
        CMat P, Qc;
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < N; ++k) {
                const Vec xp = phase_real(ext.rings[m].col(k));
                const Mat JJ = lift_structure(J, xp.head(nc), xp.tail(nc));
                chart_split(JJ, P, Qc);
                const CVec uzk = uz[m].col(k);
                const CVec rhs = cplx(0, 1) * uzk - P * uzk - Qc * uzk.conjugate();
                const CVec w = solve_conj_linear(P, Qc, rhs);
                delta = std::max(delta, (w - q_in[m].col(k)).cwiseAbs().maxCoeff());
                qn[m].col(k) = w;
            }
        if (delta_out) *delta_out = delta;
        return qn;
    }

    void refresh_source(const Vec& U) {
        if (!deformed) return;
        const CMat coeffs = unpack(U);
        if (q.empty()) q.assign(M, CMat::Zero(nc, N));
        for (int pic = 0; pic < 40; ++pic) {
            double delta = 0.0;
            q = sweep_source(coeffs, q, &delta);
            if (delta < 1e-13) break;
        }
        have_source = true;
    }

    struct Assembled {
        Vec R;
        Vec lambdas;
        bool interior_ok = true;
        bool rows_ok = true;
    };

    Assembled assemble(const Vec& U, bool check_interior, bool exact_source = false) const {
        Assembled out;
        const CMat coeffs = unpack(U);
        const double mu = U(U.size() - 1);

        // The dbar source is swept once from its stored value, so the
        // residual carries the first-order response of the source to the
        // unknowns; a fully frozen source walks in circles because the
        // anchored second-derivative row amplifies source shifts by k^2.
        // Finite-difference columns use this one-sweep model. Residuals
        // that decide step acceptance iterate the sweep to its fixed
        // point instead: judging trial points with the one-sweep model
        // rejects genuine descent once the true residual is small.
        std::vector<CMat> qs;
        if (have_source) {
            qs = sweep_source(coeffs, q, nullptr);
            if (exact_source) {
                double delta = 1.0;
                for (int pic = 0; pic < 40 && delta > 1e-13; ++pic)
                    qs = sweep_source(coeffs, qs, &delta);
            }
        }

        const auto ext = cg.extend(coeffs, qs, true, false);
        const CVec &at0 = ext.at_zero, &dx0 = ext.dx_at_zero;
        const CVec &dx1 = ext.dx_at_one, &dxx1 = ext.dxx_at_one;

        // Boundary values of the trace and of the base velocity sum k c_k e^{ik theta}.
        CMat bnd(nc, N);
        for (int c = 0; c < nc; ++c)
            bnd.row(c) = fourier_values(coeffs.row(c).transpose()).transpose();
        CMat kc = CMat::Zero(n, N);
        for (int j = 0; j < N; ++j) {
            const int k = freq_of_index(j, N);
            if (std::abs(k) <= K) kc.col(j) = double(k) * coeffs.col(j).head(n);
        }
        CMat wv(n, N);
        for (int c = 0; c < n; ++c)
            wv.row(c) = fourier_values(kc.row(c).transpose()).transpose();

        Vec R(rows());
        out.lambdas = Vec::Zero(N);
        int at = 0;
        for (int k = -K; k <= -1; ++k) {
            const int idx = index_of_freq(k, N);
            for (int c = 0; c < nc; ++c) {
                const cplx d = coeffs(c, idx) - ext.boundary_T_coeffs(c, idx);
                R(at++) = d.real();
                R(at++) = d.imag();
            }
        }
        for (int j = 0; j < N; ++j) {
            const Vec xj = base_real(bnd.col(j).head(n));
            const Vec pj = fiber_real(bnd.col(j).tail(n));
            const Vec gj = domain.grad(xj);
            const Vec beta = c_action_matrix(J.eval(xj), zeta[j]) * pj;
            const Vec Wj = base_real(wv.col(j));
            const double gW = gj.dot(Wj);
            double lam = 0.0;
            if (std::abs(gW) > 1e-12 * (gj.norm() * Wj.norm() + 1e-300))
                lam = beta.dot(Wj) / gW;
            else
                out.rows_ok = false;
            out.lambdas(j) = lam;
            R(at++) = domain.rho(xj);
            R.segment(at, nc) = beta - lam * gj;
            at += nc;
        }
        if (!boundary_mode) {
            R.segment(at, nc) = base_real(at0.head(n)) - x0;
            at += nc;
            R.segment(at, nc) = base_real(dx0.head(n)) - mu * v0;
            at += nc;
            R(at++) = pair_covector(bnd.col(0).tail(n), dx1.head(n)) - 1.0;
        } else {
            R.segment(at, nc) = base_real(bnd.col(0).head(n)) - x0;
            at += nc;
            const Vec fx1 = base_real(dx1.head(n));
            R.segment(at, nc) = fx1 - mu * v0;
            at += nc;
            R(at++) = base_real(dxx1.head(n)).dot(Jx0 * fx1) - nu_target;
            R(at++) = pair_covector(bnd.col(0).tail(n), dx1.head(n)) - 1.0;
            R(at++) = mu + 1.0;
        }
        out.R = std::move(R);

        if (check_interior) {
            const auto full = cg.extend(coeffs, qs, false, true);
            double worst = -1e300;
            for (const CMat& ring : full.rings)
                for (int k = 0; k < N; ++k)
                    worst = std::max(worst, domain.rho(base_real(ring.col(k).head(n))));
            out.interior_ok = worst <= opt.interior_slack;
        }
        return out;
    }

    StationarySolution run(Vec U) {
        refresh_source(U);
        Assembled cur = assemble(U, false, true);
        require(cur.R.allFinite(), "NewtonDiverged", "initial residual is not finite");
        double sup = cur.R.lpNorm<Eigen::Infinity>();
        double lm = 0.0;  // adaptive damping; plain Gauss-Newton while zero
        std::vector<double> history{sup};
        bool floored = false;
        int iter = 0;
        for (; iter < opt.max_iter && !(sup < opt.tol && cur.rows_ok); ++iter) {
            const int cols = unknowns();
            Mat Jac(cur.R.size(), cols);
            for (int i = 0; i < cols; ++i) {
                Vec Up = U;
                Up(i) += opt.fd_step;
                Jac.col(i) = (assemble(Up, false, true).R - cur.R) / opt.fd_step;
            }
            Vec colscale(cols);
            for (int i = 0; i < cols; ++i) colscale(i) = std::max(1e-8, Jac.col(i).norm());

            // The undamped Gauss-Newton step goes first every iteration so the
            // quadratic endgame is never throttled; damping engages only when
            // it fails, walking flat curved valleys with short safe steps.
            const double base_norm = cur.R.norm();
            double lm_try = 0.0;
            bool accepted = false;
            for (int attempt = 0; attempt <= opt.max_backtrack; ++attempt) {
                Vec step;
                if (lm_try == 0.0) {
                    step = Eigen::ColPivHouseholderQR<Mat>(Jac).solve(cur.R);
                } else {
                    Mat aug(cur.R.size() + cols, cols);
                    aug.topRows(cur.R.size()) = Jac;
                    aug.bottomRows(cols) = Mat((std::sqrt(lm_try) * colscale).asDiagonal());
                    Vec rhs = Vec::Zero(aug.rows());
                    rhs.head(cur.R.size()) = cur.R;
                    step = Eigen::HouseholderQR<Mat>(aug).solve(rhs);
                }
                if (step.allFinite()) {
                    Assembled trial = assemble(U - step, false, true);
                    const bool usable = trial.R.allFinite() && trial.rows_ok;
                    if (usable && trial.R.norm() < base_norm) {
                        const double pred = base_norm - (Jac * step - cur.R).norm();
                        const double act = base_norm - trial.R.norm();
                        const double gain = pred > 0.0 ? act / pred : 0.0;
                        U -= step;
                        if (lm_try == 0.0)
                            lm = 0.0;
                        else if (gain > 0.75)
                            lm = lm_try * 0.3;
                        else if (gain < 0.25)
                            lm = lm_try * 4.0;
                        else
                            lm = lm_try;
                        accepted = true;
                        break;
                    }
                }
                lm_try = lm_try == 0.0 ? std::max(lm, 1e-4) : lm_try * 8.0;
            }
            if (!accepted) fail("NewtonDiverged", "no usable step at residual sup " + fmt(sup));
            refresh_source(U);
            cur = assemble(U, false, true);
            sup = cur.R.lpNorm<Eigen::Infinity>();
            history.push_back(sup);
            if (opt.verbose) {
                std::cerr << "[stationary] iter " << iter + 1 << " residual sup " << sup
                          << " damping " << lm << " blocks";
                int bat = 0;
                for (const auto& [name, len] : block_layout()) {
                    std::cerr << " " << name << "="
                              << cur.R.segment(bat, len).lpNorm<Eigen::Infinity>();
                    bat += len;
                }
                std::cerr << "\n";
            }
            // A stall just above the tolerance is the floor of this
            // resolution, not a failure; take the disk as converged.
            if (sup < 100.0 * opt.tol && sup > 0.9 * history[history.size() - 2]) {
                floored = true;
                ++iter;
                break;
            }
            // Creeping along a curved valley would eat the whole iteration
            // budget; give up early so callers can re-seed closer instead.
            if (history.size() > 12 && sup > 0.25 * history[history.size() - 9])
                fail("NewtonDiverged", "progress stalled at residual sup " + fmt(sup));
        }
        if (!floored && !(sup < opt.tol))
            fail("NewtonDiverged", "no convergence in " + std::to_string(opt.max_iter) +
                                       " iterations; residual sup " + fmt(sup));
        // Containment is a property of the converged disk, not of the Newton
        // path: iterates may overshoot the boundary and still pull back.
        const Assembled fin = assemble(U, true, true);
        require(fin.interior_ok, "LeftDomain", "converged disk leaves the domain");
        return snapshot(U, fin, iter);
    }

    std::vector<std::pair<std::string, int>> block_layout() const {
        std::vector<std::pair<std::string, int>> blocks = {{"dbar", 2 * nc * K},
                                                           {"conormal", (nc + 1) * N}};
        if (!boundary_mode) {
            blocks.push_back({"center", nc});
            blocks.push_back({"direction", nc});
            blocks.push_back({"lift_norm", 1});
        } else {
            blocks.push_back({"touch", nc});
            blocks.push_back({"direction", nc});
            blocks.push_back({"tangency", 1});
            blocks.push_back({"lift_norm", 1});
            blocks.push_back({"mu", 1});
        }
        return blocks;
    }

    StationarySolution snapshot(const Vec& U, const Assembled& fin, int iters) const {
        const CMat coeffs = unpack(U);
        const auto full = cg.extend(coeffs, source_or_empty(), false, true);

        StationarySolution sol;
        sol.lift = DiskTrace::from_coeffs(coeffs);
        sol.lift.rings = full.rings;
        sol.lift.radii = cg.radial().r();
        sol.lambda.values = fin.lambdas;
        sol.mu = U(U.size() - 1);

        const auto blocks = block_layout();
        int at = 0;
        for (const auto& [name, len] : blocks) {
            sol.residual_names.push_back(name);
            sol.residual_sups.push_back(fin.R.segment(at, len).lpNorm<Eigen::Infinity>());
            at += len;
        }
        sol.newton_iterations = iters;
        sol.structure_description = J.description;
        sol.domain_kind = domain.kind;
        sol.x0 = x0;
        sol.v0 = v0;
        sol.normalization = boundary_mode ? "boundary" : "center";
        sol.nu_target = nu_target;
        return sol;
    }
};

}  // namespace

std::array<double, 5> CenterOperatorValue::sups() const {
    return {sup_norm(r1), r2.cwiseAbs().maxCoeff(), r3.lpNorm<Eigen::Infinity>(),
            r4.lpNorm<Eigen::Infinity>(), std::abs(r5)};
}

CenterOperatorValue evaluate_center_operator(const Domain& domain, const AlmostComplexStructure& J,
                                             const Vec& x0, const Vec& v0,
                                             const DiskTrace& candidate,
                                             const BoundaryMultiplier& lambda, double mu) {
    const int n = J.n;
    const int nc = 2 * n;
    require(candidate.comps == nc, "DimensionMismatch", "candidate must be a lifted trace");
    const int N = candidate.N;
    const int M = candidate.M();
    require(M >= 8, "ResolutionTooLow", "independent evaluation needs interior rings");
    require(static_cast<int>(lambda.values.size()) == N, "DimensionMismatch",
            "one multiplier value per boundary node");

    CenterOperatorValue out;
    out.r1 = dbar_residual(candidate, J);

    CMat wv(n, N);
    for (int c = 0; c < n; ++c)
        wv.row(c) = theta_derivative(candidate.boundary.row(c).transpose()).transpose();

    out.r2.resize(nc + 1, N);
    for (int j = 0; j < N; ++j) {
        const double th = 2.0 * M_PI * j / N;
        const cplx zj(std::cos(th), std::sin(th));
        const Vec xj = base_real(candidate.boundary.col(j).head(n));
        const Vec pj = fiber_real(candidate.boundary.col(j).tail(n));
        const Vec gj = domain.grad(xj);
        const Vec beta = c_action_matrix(J.eval(xj), zj) * pj;
        const Vec Wj = base_real(CVec(cplx(0, -1) * wv.col(j)));
        const double gW = gj.dot(Wj);
        require(std::abs(gW) > 1e-12 * (gj.norm() * Wj.norm() + 1e-300), "RankDeficient",
                "boundary velocity is tangent to the level set");
        const double lstar = beta.dot(Wj) / gW;
        const Vec gamma = beta - lambda.values(j) * gj;
        out.r2(0, j) = domain.rho(xj);
        out.r2(1, j) = lambda.values(j) - lstar;
        out.r2.col(j).tail(nc - 1) = perp_basis(Wj).transpose() * gamma;
    }

    // Center anchors from the doubled real-axis line; this route never touches
    // the modal extension machinery.
    const Vec& r = candidate.radii;
    const int L = 2 * M + 2;
    Vec line(L);
    CMat vals(nc, L);
    line(0) = -1.0;
    vals.col(0) = candidate.boundary.col(N / 2);
    for (int t = 0; t < M; ++t) {
        line(1 + t) = -r(t);
        vals.col(1 + t) = candidate.rings[t].col(N / 2);
    }
    for (int u = 0; u < M; ++u) {
        line(M + 1 + u) = r(M - 1 - u);
        vals.col(M + 1 + u) = candidate.rings[M - 1 - u].col(0);
    }
    line(L - 1) = 1.0;
    vals.col(L - 1) = candidate.boundary.col(0);

    const int W0 = std::min(11, L);
    const int s0 = std::clamp(L / 2 - W0 / 2, 0, L - W0);
    const Mat w0 = fornberg_weights(0.0, line.segment(s0, W0), 1);
    const CVec u0 = vals.middleCols(s0, W0) * w0.col(0).cast<cplx>();
    const CVec du0 = vals.middleCols(s0, W0) * w0.col(1).cast<cplx>();
    out.r3 = base_real(u0.head(n)) - x0;
    out.r4 = base_real(du0.head(n)) - mu * v0;

    const int W1 = std::min(9, L);
    const Mat w1 = fornberg_weights(1.0, line.segment(L - W1, W1), 1);
    const CVec du1 = vals.middleCols(L - W1, W1) * w1.col(1).cast<cplx>();
    out.r5 = pair_covector(candidate.boundary.col(0).tail(n), du1.head(n)) - 1.0;
    return out;
}

StationarySolution solve_stationary_center(const Domain& domain, const AlmostComplexStructure& J,
                                           const Vec& x0, const Vec& v0, const SolverOptions& opt,
                                           const StationarySolution* initial) {
    RHProblem prob(domain, J, false, x0, v0, 0.0, opt);
    return prob.run(initial ? prob.from_solution(*initial) : prob.init_center());
}

StationarySolution solve_stationary_boundary(const Domain& domain, const AlmostComplexStructure& J,
                                             const Vec& x0, const Vec& v0, double nu_target,
                                             double cone_a, const SolverOptions& opt,
                                             const StationarySolution* initial) {
    {
        RHProblem prob(domain, J, true, x0, v0, nu_target, opt);
        prob.cone_a = cone_a;
        try {
            return prob.run(initial ? prob.from_solution(*initial) : prob.init_boundary());
        } catch (const Error& e) {
            const bool retryable = e.code() == "NewtonDiverged" || e.code() == "LeftDomain";
            if (initial != nullptr || nu_target == 0.0 || !retryable) throw;
        }
    }
    // March the tangency pin up from the flat problem. The pinned system has
    // soft reparametrization modes with strong curvature, so the attraction
    // funnel is narrow; the step in nu adapts to what actually converges and
    // a secant extrapolation through the last two stages seeds each solve.
    auto pinned = [&](double nu, const StationarySolution* guess) {
        RHProblem prob(domain, J, true, x0, v0, nu, opt);
        prob.cone_a = cone_a;
        return prob.run(guess ? prob.from_solution(*guess) : prob.init_boundary());
    };
    StationarySolution cur = pinned(0.0, nullptr);
    StationarySolution prev;
    double nu = 0.0;
    double last_step = 0.0;
    double step = nu_target / 4.0;
    while (nu != nu_target) {
        const double want = nu_target - nu;
        const bool final_leg = std::abs(step) >= std::abs(want);
        const double d = final_leg ? want : step;
        StationarySolution guess = cur;
        if (last_step != 0.0 && prev.lift.coeffs.size() == cur.lift.coeffs.size()) {
            const double r = d / last_step;
            guess.lift.coeffs = (1.0 + r) * cur.lift.coeffs - r * prev.lift.coeffs;
            guess.mu = (1.0 + r) * cur.mu - r * prev.mu;
        }
        try {
            StationarySolution next = pinned(nu + d, &guess);
            prev = std::move(cur);
            cur = std::move(next);
            nu = final_leg ? nu_target : nu + d;
            last_step = d;
            step = d * 1.6;
        } catch (const Error& e) {
            if (e.code() != "NewtonDiverged" && e.code() != "LeftDomain") throw;
            step = d * 0.5;
            if (std::abs(step) < 1e-3 * std::abs(nu_target))
                fail("NewtonDiverged",
                     "tangency continuation stalled at nu " + fmt(nu) + " of " + fmt(nu_target));
        }
    }
    return cur;
}

double tangency_parameter(const DiskTrace& trace, const AlmostComplexStructure& J) {
    const int n = J.n;
    int bc = 0;
    if (trace.comps == 2 * n || trace.comps == n)
        bc = n;
    else
        fail("DimensionMismatch", "trace has neither n nor 2n components");

    CVec fx(bc), fxx(bc);
    if (trace.M() >= 8) {
        const int M = trace.M();
        require(static_cast<int>(trace.radii.size()) == M, "DimensionMismatch",
                "ring radii missing");
        const int L = M + 1;
        Vec line(L);
        CMat vals(bc, L);
        for (int u = 0; u < M; ++u) {
            line(u) = trace.radii(M - 1 - u);
            vals.col(u) = trace.rings[M - 1 - u].col(0).head(bc);
        }
        line(L - 1) = 1.0;
        vals.col(L - 1) = trace.boundary.col(0).head(bc);
        const int W = std::min(9, L);
        const Mat wts = fornberg_weights(1.0, line.segment(L - W, W), 2);
        fx = vals.middleCols(L - W, W) * wts.col(1).cast<cplx>();
        fxx = vals.middleCols(L - W, W) * wts.col(2).cast<cplx>();
    } else if (trace.holomorphic) {
        fx = CVec::Zero(bc);
        fxx = CVec::Zero(bc);
        for (int j = 0; j < trace.N; ++j) {
            const int k = freq_of_index(j, trace.N);
            if (k <= 0) continue;
            fx += double(k) * trace.coeffs.col(j).head(bc);
            fxx += double(k) * double(k - 1) * trace.coeffs.col(j).head(bc);
        }
    } else {
        fail("DerivativeUnavailable", "need interior rings or a holomorphic trace");
    }

    const Vec fxr = base_real(fx);
    require(fxr.norm() > 1e-10, "DegenerateVelocity", "velocity vanishes at the contact point");
    const Vec x1 = base_real(trace.boundary.col(0).head(bc));
    return base_real(fxx).dot(J.eval(x1) * fxr);
}

LinearizedData linearize(const StationarySolution& sol, const Domain& domain,
                         const AlmostComplexStructure& J) {
    const int n = J.n;
    const int nc = 2 * n;
    const DiskTrace& tr = sol.lift;
    require(tr.comps == nc, "DimensionMismatch", "solution lift has the wrong dimension");
    const int N = tr.N;
    const int M = tr.M();
    require(M >= 8, "ResolutionTooLow", "interior rings required");

    LinearizedData out;
    out.n = n;
    out.N = N;
    out.M = M;
    out.radii = tr.radii;
    out.G.resize(N);
    out.lambda_row.resize(N);

    CMat wv(n, N);
    for (int c = 0; c < n; ++c)
        wv.row(c) = theta_derivative(tr.boundary.row(c).transpose()).transpose();

    double mind = 1e300;
    CVec E = CVec::Zero(nc);
    for (int j = 0; j < N; ++j) {
        const double th = 2.0 * M_PI * j / N;
        const cplx zj(std::cos(th), std::sin(th));
        const Vec xj = base_real(tr.boundary.col(j).head(n));
        const Vec pj = fiber_real(tr.boundary.col(j).tail(n));
        const Vec gj = domain.grad(xj);
        const Mat Hj = domain.hess(xj);
        const Mat R = c_action_matrix(J.eval(xj), zj);
        const auto dJ = J.deriv(xj);
        const Vec beta = R * pj;
        const Vec Wj = base_real(CVec(cplx(0, -1) * wv.col(j)));
        const double gW = gj.dot(Wj);
        require(std::abs(gW) > 1e-12 * (gj.norm() * Wj.norm() + 1e-300), "RankDeficient",
                "boundary velocity is tangent to the level set");
        const double lstar = beta.dot(Wj) / gW;

        // Variation of gamma = R(x) p - lambda*(x, p) g(x) with the tangential
        // elimination direction W frozen; its own variation moves gamma along
        // the orbit of reparametrizations, which the projection removes.
        const Vec RtW = R.transpose() * Wj;
        const Mat Dp = R - gj * (RtW / gW).transpose();
        Mat Dx(nc, nc);
        Vec dlam_x(nc);
        for (int l = 0; l < nc; ++l) {
            const Vec dbeta = -zj.imag() * (dJ[l].transpose() * pj);
            dlam_x(l) =
                dbeta.dot(Wj) / gW - beta.dot(Wj) * (Hj.col(l).dot(Wj)) / (gW * gW);
            Dx.col(l) = dbeta - dlam_x(l) * gj - lstar * Hj.col(l);
        }

        Mat Phi = Mat::Zero(nc, 2 * nc);
        Phi.block(0, 0, 1, nc) = gj.transpose();
        const Mat Bp = perp_basis(Wj);
        Phi.block(1, 0, nc - 1, nc) = Bp.transpose() * Dx;
        Phi.block(1, nc, nc - 1, nc) = Bp.transpose() * Dp;

        // Real rows to complex rows: row r with 2 Re(r . h) = phi(realify(h)).
        CMat G(nc, nc);
        Vec lrow(2 * nc);
        lrow.head(nc) = dlam_x;
        lrow.tail(nc) = RtW / gW;
        CVec lr(nc);
        for (int a = 0; a < nc; ++a) {
            E(a) = 1.0;
            const Vec re = Phi * phase_real(E);
            const double lre = lrow.dot(phase_real(E));
            E(a) = cplx(0, 1);
            const Vec im = Phi * phase_real(E);
            const double lim = lrow.dot(phase_real(E));
            E(a) = 0.0;
            for (int row = 0; row < nc; ++row) G(row, a) = 0.5 * cplx(re(row), -im(row));
            lr(a) = 0.5 * cplx(lre, -lim);
        }
        out.G[j] = G;
        out.lambda_row[j] = lr;
        mind = std::min(mind, std::abs(G.determinant()));
    }
    out.min_abs_det_G = mind;

    out.A.assign(M, std::vector<CMat>(N));
    out.B.assign(M, std::vector<CMat>(N));
    if (J.standard) {
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < N; ++k) {
                out.A[m][k] = CMat::Zero(nc, nc);
                out.B[m][k] = CMat::Zero(nc, nc);
            }
        return out;
    }

    // Interior zero-order coefficients: Lambda(h) = D JJ[h] F_x in the chart,
    // split into its linear and conjugate-linear parts; the normal form is
    // h_zetabar + A h + B conj(h) = 0 with A = Lambda_lin / 2i, B = Lambda_conj / 2i.
    const GridDerivatives gd = disk_xy_derivatives(tr);
    const double s = 1e-5;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const Vec xp = phase_real(tr.rings[m].col(k));
            const Vec fx = gd.Fx[m].col(k);
            CMat Acm(nc, nc), Bcm(nc, nc);
            auto probe = [&](const CVec& dir) {
                const Vec h = phase_real(dir);
                const Vec xpp = xp + s * h;
                const Vec xpm = xp - s * h;
                const Mat Jp = lift_structure(J, xpp.head(nc), xpp.tail(nc));
                const Mat Jm = lift_structure(J, xpm.head(nc), xpm.tail(nc));
                return phase_complex(((Jp - Jm) / (2.0 * s)) * fx);
            };
            for (int a = 0; a < nc; ++a) {
                E(a) = 1.0;
                const CVec le = probe(E);
                E(a) = cplx(0, 1);
                const CVec li = probe(E);
                E(a) = 0.0;
                Acm.col(a) = 0.5 * (le - cplx(0, 1) * li) / cplx(0, 2);
                Bcm.col(a) = 0.5 * (le + cplx(0, 1) * li) / cplx(0, 2);
            }
            out.A[m][k] = Acm;
            out.B[m][k] = Bcm;
        }
    return out;
}

Mat solver_jacobian(const Domain& domain, const AlmostComplexStructure& J,
                    const StationarySolution& sol) {
    SolverOptions opt;
    opt.N = sol.lift.N;
    opt.M = std::max(8, sol.lift.M());
    RHProblem prob(domain, J, sol.normalization == "boundary", sol.x0, sol.v0, sol.nu_target,
                   opt);
    const Vec U = prob.from_solution(sol);
    prob.refresh_source(U);
    const auto base = prob.assemble(U, false);
    Mat Jac(base.R.size(), prob.unknowns());
    for (int i = 0; i < prob.unknowns(); ++i) {
        Vec Up = U;
        Up(i) += opt.fd_step;
        Jac.col(i) = (prob.assemble(Up, false).R - base.R) / opt.fd_step;
    }
    return Jac;
}

Vec stationary_residual(const Domain& domain, const AlmostComplexStructure& J,
                        const StationarySolution& sol) {
    SolverOptions opt;
    opt.N = sol.lift.N;
    opt.M = std::max(8, sol.lift.M());
    RHProblem prob(domain, J, sol.normalization == "boundary", sol.x0, sol.v0, sol.nu_target,
                   opt);
    const Vec U = prob.from_solution(sol);
    prob.refresh_source(U);
    return prob.assemble(U, false, true).R;
}

std::vector<std::pair<std::string, int>> stationary_residual_layout(
    const Domain& domain, const AlmostComplexStructure& J, const StationarySolution& sol) {
    SolverOptions opt;
    opt.N = sol.lift.N;
    opt.M = std::max(8, sol.lift.M());
    RHProblem prob(domain, J, sol.normalization == "boundary", sol.x0, sol.v0, sol.nu_target,
                   opt);
    return prob.block_layout();
}

ContinuationResult continuation_path(const Domain& domain, const DeformationPath& path,
                                     const StationarySolution& base, double t_target,
                                     const SolverOptions& opt) {
    ContinuationResult res;
    res.family.push_back(base);
    res.ts.push_back(base.t);
    res.t_reached = base.t;
    if (t_target == base.t) return res;

    const double dir = t_target > base.t ? 1.0 : -1.0;
    double step = std::min(0.05, std::abs(t_target - base.t));
    double t = base.t;
    int guard = 0;
    while (dir * (t_target - t) > 1e-14) {
        require(++guard < 100000, "NewtonDiverged", "continuation failed to make progress");
        const double tn =
            dir * (t_target - t) <= step * (1.0 + 1e-9) ? t_target : t + dir * step;

        StationarySolution guess = res.family.back();
        if (res.family.size() >= 2) {
            const StationarySolution& a = res.family[res.family.size() - 2];
            const StationarySolution& b = res.family.back();
            const double dt = res.ts[res.ts.size() - 1] - res.ts[res.ts.size() - 2];
            if (std::abs(dt) > 1e-14 && a.lift.coeffs.rows() == b.lift.coeffs.rows() &&
                a.lift.coeffs.cols() == b.lift.coeffs.cols()) {
                const double w = (tn - res.ts.back()) / dt;
                guess.lift.coeffs = b.lift.coeffs + w * (b.lift.coeffs - a.lift.coeffs);
                guess.mu = b.mu + w * (b.mu - a.mu);
            }
        }
        try {
            const AlmostComplexStructure Jt = path.structure(tn);
            StationarySolution next =
                base.normalization == "boundary"
                    ? solve_stationary_boundary(domain, Jt, base.x0, base.v0, base.nu_target,
                                                -1.0, opt, &guess)
                    : solve_stationary_center(domain, Jt, base.x0, base.v0, opt, &guess);
            next.t = tn;
            res.family.push_back(std::move(next));
            res.ts.push_back(tn);
            res.t_reached = tn;
            t = tn;
            step = std::min(step * 1.5, 0.05);
        } catch (const Error& e) {
            if (e.code() != "NewtonDiverged" && e.code() != "LeftDomain") throw;
            step *= 0.5;
            if (step < 1e-6)
                throw StepUnderflowError(res.t_reached, res.family,
                                         "continuation step underflow at t = " + fmt(t));
        }
    }
    return res;
}

}  // namespace acdisk

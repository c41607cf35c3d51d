#include "acdisk/rhsolver.hpp"

#include <doctest.h>

#include <cmath>

using namespace acdisk;

namespace {

Vec chart_vec(int dim, int slot, double val = 1.0) {
    Vec v = Vec::Zero(dim);
    v(slot) = val;
    return v;
}

double worst_residual(const StationarySolution& sol) {
    double w = 0.0;
    for (double r : sol.residual_sups) w = std::max(w, r);
    return w;
}

// Diameter of the ball reparametrized by the parabolic automorphism fixing 1:
// phi = C^-1(C + s) with C(z) = i(1+z)/(1-z), so phi(1) = 1, phi'(1) = 1,
// phi''(1) = -i s. The fiber follows the conormal lift of the slice.
StationarySolution parabolic_diameter(int n, int N, double nu) {
    const cplx I(0.0, 1.0);
    const double s = -nu;
    const cplx abar = s / (s + 2.0 * I);
    const double kappa = 1.0 / std::pow(cplx(1.0) - abar, 2).real();
    CMat bnd = CMat::Zero(2 * n, N);
    for (int j = 0; j < N; ++j) {
        const cplx z = std::polar(1.0, 2.0 * M_PI * j / N);
        bnd(0, j) = ((2.0 * I - s) * z + s) / (-s * z + 2.0 * I + s);
        bnd(n, j) = 0.5 * kappa * std::pow(cplx(1.0) - abar * z, 2);
    }
    StationarySolution sol;
    sol.lift = DiskTrace::from_boundary(bnd);
    sol.mu = -1.0;
    return sol;
}

}  // namespace

TEST_CASE("center disk of the round ball is a straight diameter") {
    const int n = 2;
    const auto dom = Domain::ball(n);
    const auto J = AlmostComplexStructure::standard_structure(n);
    const auto sol = solve_stationary_center(dom, J, Vec::Zero(2 * n), chart_vec(2 * n, 0));

    CHECK(sol.newton_iterations <= 3);
    CHECK(worst_residual(sol) < 1e-12);
    CHECK(std::abs(sol.mu - 1.0) < 1e-10);
    // p = lambda grad rho with <p, f_x(1)> = 1 forces lambda = 1/2 on the ball
    for (int j = 0; j < sol.lambda.values.size(); ++j)
        CHECK(std::abs(sol.lambda.values(j) - 0.5) < 1e-8);

    const int N = sol.lift.boundary.cols();
    for (int j = 0; j < N; ++j) {
        const cplx zeta = std::polar(1.0, 2.0 * M_PI * j / N);
        CHECK(std::abs(sol.lift.boundary(0, j) - zeta) < 1e-10);
        CHECK(std::abs(sol.lift.boundary(1, j)) < 1e-10);
        // rotated conormal is constant along the diameter
        CHECK(std::abs(sol.lift.boundary(n, j) - 0.5) < 1e-8);
        CHECK(std::abs(sol.lift.boundary(n + 1, j)) < 1e-8);
    }
    CHECK(sol.lift.negative_mass() < 1e-10);
    CHECK(sup_norm(dbar_residual(sol.lift, J)) < 1e-10);
}

TEST_CASE("doubling the domain radius doubles the speed but not the multiplier") {
    const int n = 2;
    const auto dom = Domain::ellipsoid({0.25, 0.25});
    const auto J = AlmostComplexStructure::standard_structure(n);
    const auto sol = solve_stationary_center(dom, J, Vec::Zero(2 * n), chart_vec(2 * n, 0));
    CHECK(worst_residual(sol) < 1e-11);
    CHECK(std::abs(sol.mu - 2.0) < 1e-9);
    for (int j = 0; j < sol.lambda.values.size(); ++j)
        CHECK(std::abs(sol.lambda.values(j) - 0.5) < 1e-8);
    const int N = sol.lift.boundary.cols();
    for (int j = 0; j < N; ++j) {
        const cplx zeta = std::polar(1.0, 2.0 * M_PI * j / N);
        CHECK(std::abs(sol.lift.boundary(0, j) - 2.0 * zeta) < 1e-9);
    }
}

TEST_CASE("independent operator evaluation flags planted offsets") {
    const int n = 2;
    const auto dom = Domain::ball(n);
    const auto J = AlmostComplexStructure::standard_structure(n);
    const Vec x0 = Vec::Zero(2 * n), v0 = chart_vec(2 * n, 0);
    const auto sol = solve_stationary_center(dom, J, x0, v0);

    const auto clean = evaluate_center_operator(dom, J, x0, v0, sol.lift, sol.lambda, sol.mu);
    for (double s : clean.sups()) CHECK(s < 1e-9);

    BoundaryMultiplier zeroed;
    zeroed.values = Vec::Zero(sol.lambda.values.size());
    const auto off_lambda = evaluate_center_operator(dom, J, x0, v0, sol.lift, zeroed, sol.mu);
    CHECK(std::abs(off_lambda.sups()[1] - 0.5) < 1e-6);

    const auto off_mu =
        evaluate_center_operator(dom, J, x0, v0, sol.lift, sol.lambda, 2.0 * sol.mu);
    CHECK(std::abs(off_mu.sups()[3] - 1.0) < 1e-6);
}

TEST_CASE("off center disk of the plane is the disk automorphism") {
    const int n = 1;
    const auto dom = Domain::ball(n);
    const auto J = AlmostComplexStructure::standard_structure(n);
    SolverOptions opt;
    opt.N = 128;
    opt.M = 20;
    const double a = 0.3;
    const auto sol = solve_stationary_center(dom, J, chart_vec(2, 0, a), chart_vec(2, 0));

    CHECK(sol.newton_iterations <= 10);
    CHECK(worst_residual(sol) < 1e-8);
    CHECK(std::abs(sol.mu - (1.0 - a * a)) < 1e-8);
    const int N = sol.lift.boundary.cols();
    for (int j = 0; j < N; ++j) {
        const cplx zeta = std::polar(1.0, 2.0 * M_PI * j / N);
        CHECK(std::abs(sol.lift.boundary(0, j) - (zeta + a) / (1.0 + a * zeta)) < 5e-8);
    }
    // the residual floor sits in the low coefficients; the spectral
    // derivative inside the probe amplifies it by a few hundred
    CHECK(sup_norm(dbar_residual(sol.lift, J)) < 2e-5);
}

TEST_CASE("rescaling the direction rescales only the speed") {
    const int n = 2;
    const auto dom = Domain::ball(n);
    const auto J = AlmostComplexStructure::standard_structure(n);
    const Vec x0 = Vec::Zero(2 * n);

    const auto unit = solve_stationary_center(dom, J, x0, chart_vec(2 * n, 0));
    const auto twice = solve_stationary_center(dom, J, x0, chart_vec(2 * n, 0, 2.0));
    CHECK(std::abs(twice.mu - 0.5 * unit.mu) < 1e-10);
    CHECK((twice.lift.boundary - unit.lift.boundary).cwiseAbs().maxCoeff() < 1e-9);

    // complex direction (1, 1)/sqrt(2): the diameter follows it componentwise
    Vec vd = Vec::Zero(2 * n);
    vd(0) = vd(2) = 1.0 / std::sqrt(2.0);
    const auto diag = solve_stationary_center(dom, J, x0, vd);
    CHECK(worst_residual(diag) < 1e-11);
    const int N = diag.lift.boundary.cols();
    for (int j = 0; j < N; ++j) {
        const cplx zeta = std::polar(1.0, 2.0 * M_PI * j / N);
        CHECK(std::abs(diag.lift.boundary(0, j) - zeta / std::sqrt(2.0)) < 1e-9);
        CHECK(std::abs(diag.lift.boundary(1, j) - zeta / std::sqrt(2.0)) < 1e-9);
    }
}

TEST_CASE("interior rings stay strictly inside the domain") {
    const int n = 1;
    const auto dom = Domain::ball(n);
    const auto J = AlmostComplexStructure::standard_structure(n);
    const auto sol = solve_stationary_center(dom, J, chart_vec(2, 0, 0.3), chart_vec(2, 0));
    REQUIRE(!sol.lift.rings.empty());
    for (const auto& ring : sol.lift.rings)
        for (int j = 0; j < ring.cols(); ++j) {
            Vec x(2);
            x << ring(0, j).real(), ring(0, j).imag();
            CHECK(dom.rho(x) < 0.0);
        }
}

TEST_CASE("second order contact parameter on planted traces") {
    const int n = 1, N = 128;
    const auto J = AlmostComplexStructure::standard_structure(n);
    const cplx I(0.0, 1.0);

    auto planted = [&](auto f) {
        CMat bnd = CMat::Zero(2, N);
        for (int j = 0; j < N; ++j) {
            const cplx z = std::polar(1.0, 2.0 * M_PI * j / N);
            bnd(0, j) = f(z);
            bnd(1, j) = 0.5;
        }
        return DiskTrace::from_boundary(bnd);
    };

    // straight diameter: no curvature defect at the contact point
    CHECK(std::abs(tangency_parameter(planted([](cplx z) { return z; }), J)) < 1e-10);

    // f'' (1) = 0.6 i against J f'(1) = i reads off the planted coefficient
    auto quad = [&](cplx z) { return z + 0.3 * I * (z - 1.0) * (z - 1.0); };
    CHECK(std::abs(tangency_parameter(planted(quad), J) - 0.6) < 1e-9);

    // composing with the parabolic automorphism shifts the parameter by -s
    const double s = 0.35;
    const cplx abar = s / (s + 2.0 * I);
    auto moeb = [&](cplx z) { return ((2.0 * I - s) * z + s) / (-s * z + 2.0 * I + s); };
    CHECK(std::abs(tangency_parameter(planted([&](cplx z) { return moeb(z); }), J) + s) < 1e-8);
    CHECK(std::abs(tangency_parameter(planted([&](cplx z) { return quad(moeb(z)); }), J) -
                   (0.6 - s)) < 1e-8);
}

TEST_CASE("boundary normalization recovers the diameter through the contact point") {
    const int n = 2;
    const auto dom = Domain::ball(n);
    const auto J = AlmostComplexStructure::standard_structure(n);
    const Vec x0 = chart_vec(2 * n, 0);
    const Vec v0 = chart_vec(2 * n, 0, -1.0);
    const auto sol = solve_stationary_boundary(dom, J, x0, v0, 0.0, 0.1);

    CHECK(sol.newton_iterations <= 4);
    CHECK(worst_residual(sol) < 1e-12);
    CHECK(std::abs(sol.mu + 1.0) < 1e-10);
    const int N = sol.lift.boundary.cols();
    for (int j = 0; j < N; ++j) {
        const cplx zeta = std::polar(1.0, 2.0 * M_PI * j / N);
        CHECK(std::abs(sol.lift.boundary(0, j) - zeta) < 1e-10);
        CHECK(std::abs(sol.lift.boundary(1, j)) < 1e-10);
    }
}

TEST_CASE("tilted contact solves in one or two corrections from the exact disk") {
    const int n = 2, N = 64;
    const auto dom = Domain::ball(n);
    const auto J = AlmostComplexStructure::standard_structure(n);
    const double nu = 0.4;

    const auto exact = parabolic_diameter(n, N, nu);
    CHECK(exact.lift.negative_mass() < 1e-12);
    CHECK(std::abs(tangency_parameter(exact.lift, J) - nu) < 1e-8);

    const auto sol = solve_stationary_boundary(dom, J, chart_vec(2 * n, 0),
                                               chart_vec(2 * n, 0, -1.0), nu, 0.1, {}, &exact);
    CHECK(sol.newton_iterations <= 3);
    CHECK(worst_residual(sol) < 1e-10);
    CHECK(std::abs(sol.mu + 1.0) < 1e-8);
    // the tilt reparametrizes the slice but never leaves it
    for (int j = 0; j < N; ++j) {
        CHECK(std::abs(std::abs(sol.lift.boundary(0, j)) - 1.0) < 1e-8);
        CHECK(std::abs(sol.lift.boundary(1, j)) < 1e-8);
    }
}

TEST_CASE("small tilt solves cold and reports its own contact parameter") {
    const int n = 1;
    const auto dom = Domain::ball(n);
    const auto J = AlmostComplexStructure::standard_structure(n);
    const double nu = 0.1;
    const auto sol =
        solve_stationary_boundary(dom, J, chart_vec(2, 0), chart_vec(2, 0, -1.0), nu, 0.1);
    CHECK(worst_residual(sol) < 1e-10);
    CHECK(std::abs(tangency_parameter(sol.lift, J) - nu) < 1e-5);
    const int N = sol.lift.boundary.cols();
    for (int j = 0; j < N; ++j)
        CHECK(std::abs(std::abs(sol.lift.boundary(0, j)) - 1.0) < 1e-8);
}

TEST_CASE("deformed structure keeps the center disk and the linearized data") {
    const int n = 2;
    const auto dom = Domain::ball(n);
    const auto J0 = AlmostComplexStructure::standard_structure(n);
    const auto path = DeformationPath::builtin("g1", n);
    const double t = 0.02;
    const auto Jt = path.structure(t);
    const Vec x0 = Vec::Zero(2 * n), v0 = chart_vec(2 * n, 0);

    const auto base = solve_stationary_center(dom, J0, x0, v0);
    const auto lin0 = linearize(base, dom, J0);
    double a0 = 0.0, b0 = 0.0;
    for (const auto& ring : lin0.A)
        for (const auto& m : ring) a0 = std::max(a0, m.cwiseAbs().maxCoeff());
    for (const auto& ring : lin0.B)
        for (const auto& m : ring) b0 = std::max(b0, m.cwiseAbs().maxCoeff());
    CHECK(a0 < 1e-12);
    CHECK(b0 < 1e-12);
    CHECK(lin0.min_abs_det_G > 0.95);

    const auto sol = solve_stationary_center(dom, Jt, x0, v0, {}, &base);
    CHECK(sol.newton_iterations <= 8);
    CHECK(worst_residual(sol) < 1e-9);
    CHECK(std::abs(sol.mu - 1.0) < 2e-3);
    CHECK((base.lift.boundary - sol.lift.boundary).cwiseAbs().maxCoeff() < 0.05);
    CHECK(sup_norm(dbar_residual(sol.lift, Jt)) < 1e-6);

    const auto clean = evaluate_center_operator(dom, Jt, x0, v0, sol.lift, sol.lambda, sol.mu);
    for (double s : clean.sups()) CHECK(s < 1e-6);

    const auto lin = linearize(sol, dom, Jt);
    double at = 0.0;
    for (const auto& ring : lin.A)
        for (const auto& m : ring) at = std::max(at, m.cwiseAbs().maxCoeff());
    CHECK(at > 0.002);
    CHECK(at < 0.012);
    CHECK(lin.min_abs_det_G > 0.97);
    CHECK(lin.min_abs_det_G < 1.01);
}

TEST_CASE("linearized zero order coefficients scale with the tilt") {
    const int n = 2;
    const auto dom = Domain::ball(n);
    const auto J0 = AlmostComplexStructure::standard_structure(n);
    const auto path = DeformationPath::builtin("g1", n);
    const Vec x0 = Vec::Zero(2 * n), v0 = chart_vec(2 * n, 0);
    SolverOptions opt;
    opt.tol = 3e-9;  // representation floor of the band, not a solver limit

    const auto base = solve_stationary_center(dom, J0, x0, v0, opt);
    auto sup_A = [&](const StationarySolution& s, const AlmostComplexStructure& J) {
        const auto lin = linearize(s, dom, J);
        double a = 0.0;
        for (const auto& ring : lin.A)
            for (const auto& m : ring) a = std::max(a, m.cwiseAbs().maxCoeff());
        return a;
    };
    const auto J1 = path.structure(0.01), J2 = path.structure(0.02);
    const auto s1 = solve_stationary_center(dom, J1, x0, v0, opt, &base);
    const auto s2 = solve_stationary_center(dom, J2, x0, v0, opt, &s1);
    const double a1 = sup_A(s1, J1), a2 = sup_A(s2, J2);
    CHECK(a1 > 0.0);
    CHECK(a2 / a1 > 1.6);
    CHECK(a2 / a1 < 2.4);
}

TEST_CASE("continuation along the trivial path is constant") {
    const int n = 1;
    const auto dom = Domain::ball(n);
    const auto path = DeformationPath::builtin("zero", n);
    SolverOptions opt;
    opt.N = 32;
    opt.M = 8;
    const auto base = solve_stationary_center(dom, path.structure(0.0), chart_vec(2, 0, 0.2),
                                              chart_vec(2, 0), opt);
    const auto res = continuation_path(dom, path, base, 0.7, opt);
    CHECK(res.t_reached == doctest::Approx(0.7));
    CHECK(res.family.size() >= 2);
    for (const auto& sol : res.family)
        CHECK((sol.lift.boundary - base.lift.boundary).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("continuation reaches a finite tilt") {
    const int n = 2;
    const auto dom = Domain::ball(n);
    const auto path = DeformationPath::builtin("g1", n);
    const auto base = solve_stationary_center(dom, path.structure(0.0), Vec::Zero(2 * n),
                                              chart_vec(2 * n, 0));
    const auto res = continuation_path(dom, path, base, 0.05);
    CHECK(res.t_reached == doctest::Approx(0.05));
    CHECK(res.family.back().t == doctest::Approx(0.05));
    CHECK(worst_residual(res.family.back()) < 1e-8);
}

TEST_CASE("continuation surrenders with partial progress when the path degenerates") {
    const int n = 1;
    DeformationPath path;
    path.n = n;
    path.generator = "shear";
    // I + tS loses rank at t = 1/2, so the conjugated structure blows up there
    Mat S(2, 2);
    S << -2.0, 0.0, 0.0, -1.0;
    path.S = [S](const Vec&) { return S; };
    path.dS = [](const Vec&) { return std::vector<Mat>(2, Mat::Zero(2, 2)); };

    const auto dom = Domain::ball(n);
    SolverOptions opt;
    opt.N = 32;
    opt.M = 8;
    opt.max_iter = 10;
    const auto base =
        solve_stationary_center(dom, path.structure(0.0), Vec::Zero(2), chart_vec(2, 0), opt);
    try {
        continuation_path(dom, path, base, 1.0, opt);
        FAIL("expected the continuation to underflow");
    } catch (const StepUnderflowError& e) {
        CHECK(e.t_reached > 0.0);
        CHECK(e.t_reached < 0.5);
        CHECK(!e.partial.empty());
        CHECK(e.partial.back().t == doctest::Approx(e.t_reached));
    }
}

TEST_CASE("malformed inputs are rejected with specific codes") {
    const int n = 2;
    const auto dom = Domain::ball(n);
    const auto J = AlmostComplexStructure::standard_structure(n);

    auto code_of = [](auto&& fn) -> std::string {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return "";
    };

    CHECK(code_of([&] {
              solve_stationary_boundary(dom, J, chart_vec(2 * n, 0, 0.5),
                                        chart_vec(2 * n, 0, -1.0), 0.0, 0.1);
          }) == "NotOnBoundary");
    CHECK(code_of([&] {
              solve_stationary_boundary(dom, J, chart_vec(2 * n, 0), chart_vec(2 * n, 1), 0.0,
                                        0.5);
          }) == "ConeViolation");
    SolverOptions bad;
    bad.N = 63;
    CHECK(code_of([&] {
              solve_stationary_center(dom, J, Vec::Zero(2 * n), chart_vec(2 * n, 0), bad);
          }) == "InvalidConfig");
    CHECK(code_of([&] {
              solve_stationary_center(dom, J, Vec::Zero(3), chart_vec(3, 0));
          }) == "DimensionMismatch");
    CHECK(code_of([&] {
              solve_stationary_center(dom, J, chart_vec(2 * n, 0, 1.0), chart_vec(2 * n, 0));
          }) == "InvalidConfig");
}

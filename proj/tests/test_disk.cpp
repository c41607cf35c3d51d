#include "acdisk/disk.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>

using namespace acdisk;

namespace {

CVec mode_vector(int N, int k, cplx amp) {
    CVec c = CVec::Zero(N);
    c(index_of_freq(k, N)) = amp;
    return c;
}

// Lifted round disk in C^n: base zeta*v0, fiber conj(v0)/2.
DiskTrace round_lift(const CVec& v0, int N, int M) {
    const int n = static_cast<int>(v0.size());
    RadialGrid grid(M);
    CMat boundary(2 * n, N);
    for (int k = 0; k < N; ++k) {
        const cplx zeta = std::polar(1.0, 2 * M_PI * k / N);
        for (int j = 0; j < n; ++j) {
            boundary(j, k) = zeta * v0(j);
            boundary(n + j, k) = 0.5 * std::conj(v0(j));
        }
    }
    DiskTrace t = DiskTrace::from_boundary(boundary);
    t.radii = grid.r();
    t.rings.assign(M, CMat(2 * n, N));
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const cplx z = std::polar(grid.r()(m), 2 * M_PI * k / N);
            for (int j = 0; j < n; ++j) {
                t.rings[m](j, k) = z * v0(j);
                t.rings[m](n + j, k) = 0.5 * std::conj(v0(j));
            }
        }
    return t;
}

}  // namespace

TEST_CASE("fourier round trip and frequency bookkeeping") {
    const int N = 64;
    CHECK(freq_of_index(index_of_freq(-17, N), N) == -17);
    CHECK(freq_of_index(index_of_freq(32, N), N) == 32);
    CVec v(N);
    for (int j = 0; j < N; ++j) v(j) = cplx(std::sin(0.3 * j), std::cos(1.7 * j));
    CHECK((fourier_values(fourier_coeffs(v)) - v).norm() < 1e-13);
}

TEST_CASE("spectral theta derivative") {
    const int N = 32;
    CVec v(N);
    for (int j = 0; j < N; ++j) {
        const double th = 2 * M_PI * j / N;
        v(j) = std::exp(cplx(0, 2 * th)) + 3.0 * std::exp(cplx(0, -5 * th));
    }
    CVec d = theta_derivative(v);
    for (int j = 0; j < N; ++j) {
        const double th = 2 * M_PI * j / N;
        const cplx expect =
            cplx(0, 2) * std::exp(cplx(0, 2 * th)) - cplx(0, 15) * std::exp(cplx(0, -5 * th));
        CHECK(std::abs(d(j) - expect) < 1e-12);
    }
}

TEST_CASE("radial interpolation and boundary derivatives") {
    RadialGrid grid(16);
    const Vec& r = grid.r();
    CHECK(r(0) > r(15));
    CHECK(r(0) == doctest::Approx(std::cos(M_PI / 64.0)));

    CVec even(16), odd(16);
    for (int m = 0; m < 16; ++m) {
        const double x = r(m);
        even(m) = std::pow(x, 4) - 2 * x * x + 0.5;
        odd(m) = std::pow(x, 5) - x;
    }
    CVec ce = grid.cheb_coeffs(even, +1);
    CVec co = grid.cheb_coeffs(odd, -1);
    CHECK(std::abs(RadialGrid::cheb_eval(ce, 0.3) - cplx(std::pow(0.3, 4) - 0.18 + 0.5)) < 1e-13);
    CHECK(std::abs(RadialGrid::cheb_eval(co, 0.7) - cplx(std::pow(0.7, 5) - 0.7)) < 1e-13);
    CHECK(std::abs(RadialGrid::cheb_sum_at_1(co) - cplx(0.0)) < 1e-13);
    CHECK(std::abs(RadialGrid::cheb_deriv_at_1(co) - cplx(4.0)) < 1e-12);
    // second differences amplify coefficient roundoff by l^4
    CHECK(std::abs(RadialGrid::cheb_second_deriv_at_1(co) - cplx(20.0)) < 1e-9);
}

TEST_CASE("power weighted integrals against closed forms") {
    RadialGrid grid(12);
    CVec sq(12);
    for (int m = 0; m < 12; ++m) sq(m) = grid.r()(m) * grid.r()(m);
    CVec c = grid.cheb_coeffs(sq, +1);

    // integral of rho^2 (rho/0.2)^{-3} over [0.2, 0.9] = 0.008 log(4.5)
    cplx a = RadialGrid::power_weighted_integral(c, 0.2, 0.9, -3.0, 0.2);
    CHECK(std::abs(a - cplx(0.008 * std::log(4.5))) < 1e-13);

    // integral of rho^2 (rho/0.8)^5 over [0.1, 0.8]
    cplx b = RadialGrid::power_weighted_integral(c, 0.1, 0.8, 5.0, 0.8);
    const double expect = (std::pow(0.8, 8) - std::pow(0.1, 8)) / (8 * std::pow(0.8, 5));
    CHECK(std::abs(b - cplx(expect)) < 1e-13);

    // plain integral, lower endpoint at the origin
    cplx d = RadialGrid::power_weighted_integral(c, 0.0, 1.0, 0.0, 1.0);
    CHECK(std::abs(d - cplx(1.0 / 3.0)) < 1e-13);
}

TEST_CASE("holomorphic data is reproduced exactly") {
    const int N = 64, M = 16;
    CauchyGreen cg(N, M);
    CMat coeffs = CMat::Zero(1, N);
    coeffs(0, index_of_freq(0, N)) = cplx(0.3, 0.0);
    coeffs(0, index_of_freq(1, N)) = cplx(0.0, -0.2);
    coeffs(0, index_of_freq(3, N)) = 1.0;
    auto res = cg.extend(coeffs, {}, true);
    const Vec& r = cg.radial().r();
    for (int m = 0; m < M; m += 5)
        for (int k = 0; k < N; k += 7) {
            const cplx z = std::polar(r(m), 2 * M_PI * k / N);
            const cplx expect = cplx(0.3, 0.0) + cplx(0.0, -0.2) * z + z * z * z;
            CHECK(std::abs(res.rings[m](0, k) - expect) < 1e-13);
        }
    CHECK(std::abs(res.at_zero(0) - cplx(0.3, 0.0)) < 1e-14);
    CHECK(std::abs(res.dx_at_zero(0) - cplx(0.0, -0.2)) < 1e-14);
    CHECK(std::abs(res.dx_at_one(0) - (cplx(0.0, -0.2) + 3.0)) < 1e-12);
    CHECK(std::abs(res.dxx_at_one(0) - cplx(6.0)) < 1e-11);
}

TEST_CASE("source inversion solves dbar u = q") {
    const int N = 64, M = 16;
    CauchyGreen cg(N, M);
    const Vec& r = cg.radial().r();

    // q = 1  =>  u = conj(z)
    std::vector<CMat> q1(M, CMat::Ones(1, N));
    auto res = cg.extend(CMat::Zero(1, N), q1, true);
    double err = 0.0;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const cplx z = std::polar(r(m), 2 * M_PI * k / N);
            err = std::max(err, std::abs(res.rings[m](0, k) - std::conj(z)));
        }
    CHECK(err < 1e-12);
    for (int k = 0; k < N; ++k) {
        const cplx zb = std::conj(std::polar(1.0, 2 * M_PI * k / N));
        CHECK(std::abs(res.boundary_T(0, k) - zb) < 1e-12);
    }
    CHECK(std::abs(res.at_zero(0)) < 1e-13);
    CHECK(std::abs(res.dx_at_zero(0) - cplx(1.0)) < 1e-12);
    CHECK(std::abs(res.dx_at_one(0) - cplx(1.0)) < 1e-11);
    CHECK(std::abs(res.dxx_at_one(0)) < 1e-10);

    // q = conj(z)^2  =>  u = conj(z)^3 / 3
    std::vector<CMat> q2(M, CMat(1, N));
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const cplx z = std::polar(r(m), 2 * M_PI * k / N);
            q2[m](0, k) = std::conj(z) * std::conj(z);
        }
    auto res2 = cg.extend(CMat::Zero(1, N), q2, true);
    err = 0.0;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const cplx z = std::polar(r(m), 2 * M_PI * k / N);
            err = std::max(err, std::abs(res2.rings[m](0, k) - std::pow(std::conj(z), 3) / 3.0));
        }
    CHECK(err < 1e-12);
    // on the real axis u(x) = x^3/3
    CHECK(std::abs(res2.dx_at_one(0) - cplx(1.0)) < 1e-11);
    CHECK(std::abs(res2.dxx_at_one(0) - cplx(2.0)) < 1e-10);
    CHECK(std::abs(res2.dx_at_zero(0)) < 1e-12);

    // superposition with a holomorphic part
    CMat mix = CMat::Zero(1, N);
    mix(0, index_of_freq(2, N)) = 1.0;
    mix(0, index_of_freq(-3, N)) = 1.0 / 3.0;  // ignored by the extension
    auto res3 = cg.extend(mix, q2, false);
    err = 0.0;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const cplx z = std::polar(r(m), 2 * M_PI * k / N);
            const cplx expect = z * z + std::pow(std::conj(z), 3) / 3.0;
            err = std::max(err, std::abs(res3.rings[m](0, k) - expect));
        }
    CHECK(err < 1e-12);
    for (int k = 0; k < N; ++k) {
        const cplx zb = std::polar(1.0, 2 * M_PI * k / N);
        CHECK(std::abs(res3.boundary_T(0, k) - std::pow(std::conj(zb), 3) / 3.0) < 1e-12);
    }
}

TEST_CASE("high frequency source stays accurate") {
    const int N = 128, M = 24;
    CauchyGreen cg(N, M);
    const Vec& r = cg.radial().r();
    std::vector<CMat> q(M, CMat(1, N));
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k)
            q[m](0, k) = std::pow(std::conj(std::polar(r(m), 2 * M_PI * k / N)), 40);
    auto res = cg.extend(CMat::Zero(1, N), q, false);
    double err = 0.0;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const cplx z = std::polar(r(m), 2 * M_PI * k / N);
            err = std::max(err, std::abs(res.rings[m](0, k) - std::pow(std::conj(z), 41) / 41.0));
        }
    CHECK(err < 1e-10);
}

TEST_CASE("z derivative of the extension") {
    const int N = 64, M = 16;
    CauchyGreen cg(N, M);
    const Vec& r = cg.radial().r();

    CMat coeffs = CMat::Zero(1, N);
    coeffs(0, index_of_freq(3, N)) = 1.0;
    auto dz = cg.z_derivative(coeffs, {});
    double err = 0.0;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const cplx z = std::polar(r(m), 2 * M_PI * k / N);
            err = std::max(err, std::abs(dz[m](0, k) - 3.0 * z * z));
        }
    CHECK(err < 1e-13);

    // u = conj(z): holomorphic derivative vanishes
    std::vector<CMat> q1(M, CMat::Ones(1, N));
    auto dzq = cg.z_derivative(CMat::Zero(1, N), q1);
    CHECK(sup_norm({}) == 0.0);
    err = 0.0;
    for (int m = 0; m < M; ++m) err = std::max(err, dzq[m].cwiseAbs().maxCoeff());
    CHECK(err < 1e-12);

    // q = z conj(z): u = z conj(z)^2 / 2, u_z = conj(z)^2 / 2
    std::vector<CMat> q2(M, CMat(1, N));
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const cplx z = std::polar(r(m), 2 * M_PI * k / N);
            q2[m](0, k) = z * std::conj(z);
        }
    auto dz2 = cg.z_derivative(CMat::Zero(1, N), q2);
    err = 0.0;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const cplx z = std::polar(r(m), 2 * M_PI * k / N);
            err = std::max(err, std::abs(dz2[m](0, k) - 0.5 * std::conj(z) * std::conj(z)));
        }
    CHECK(err < 1e-12);
}

TEST_CASE("cauchy riemann residual detects the wrong orientation") {
    AlmostComplexStructure Jst = AlmostComplexStructure::standard_structure(1);
    CVec v0(1);
    v0 << cplx(1.0, 0.0);
    DiskTrace good = round_lift(v0, 32, 8);
    CHECK(sup_norm(dbar_residual(good, Jst)) < 1e-11);

    // conjugate base: residual of size 2
    DiskTrace bad = good;
    for (int m = 0; m < bad.M(); ++m) bad.rings[m].row(0) = bad.rings[m].row(0).conjugate();
    bad.boundary.row(0) = bad.boundary.row(0).conjugate();
    const double s = sup_norm(dbar_residual(bad, Jst));
    CHECK(s == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("residual scales linearly in the deformation") {
    DeformationPath path = DeformationPath::builtin("g1", 2);
    CVec v0(2);
    v0 << cplx(0.6, 0.0), cplx(0.0, 0.8);
    DiskTrace lift = round_lift(v0, 32, 8);
    const double r1 = sup_norm(dbar_residual(lift, path.structure(1e-3)));
    const double r2 = sup_norm(dbar_residual(lift, path.structure(2e-3)));
    CHECK(r1 > 0.0);
    CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("residual rejects thin grids") {
    AlmostComplexStructure Jst = AlmostComplexStructure::standard_structure(1);
    CVec v0(1);
    v0 << cplx(1.0, 0.0);
    DiskTrace no_rings = round_lift(v0, 32, 8);
    no_rings.rings.clear();
    CHECK_THROWS_WITH_AS(dbar_residual(no_rings, Jst), doctest::Contains("ResolutionTooLow"),
                         Error);
    DiskTrace thin = round_lift(v0, 32, 4);
    CHECK_THROWS_WITH_AS(dbar_residual(thin, Jst), doctest::Contains("ResolutionTooLow"), Error);
}

TEST_CASE("hilbert conjugate") {
    const int N = 64;
    Vec v(N), expect(N);
    for (int j = 0; j < N; ++j) {
        const double th = 2 * M_PI * j / N;
        v(j) = std::cos(3 * th) - 2 * std::sin(5 * th);
        expect(j) = std::sin(3 * th) + 2 * std::cos(5 * th);
    }
    CHECK((hilbert_conjugate(v) - expect).norm() < 1e-12);

    Vec w(N);
    for (int j = 0; j < N; ++j) w(j) = std::sin(0.9 * j) + 0.3 * std::cos(2.1 * j + 0.4);
    // Nyquist-free input: H(H(w)) = -(w - mean)
    CVec wc = fourier_coeffs(w.cast<cplx>());
    wc(N / 2) = 0.0;
    Vec wf = fourier_values(wc).real();
    Vec hh = hilbert_conjugate(hilbert_conjugate(wf));
    Vec centered = wf - Vec::Constant(N, wf.mean());
    CHECK((hh + centered).norm() < 1e-11);
}

TEST_CASE("trace serialization round trips") {
    CVec v0(2);
    v0 << cplx(0.6, 0.1), cplx(-0.3, 0.8);
    DiskTrace t = round_lift(v0, 32, 8);

    const std::string csv = "trace_roundtrip_test.csv";
    t.to_csv(csv);
    DiskTrace back = DiskTrace::from_csv(csv);
    std::remove(csv.c_str());
    REQUIRE(back.comps == t.comps);
    REQUIRE(back.N == t.N);
    CHECK((back.boundary - t.boundary).norm() == 0.0);

    nlohmann::json j = t.interior_to_json();
    DiskTrace fresh = DiskTrace::from_boundary(t.boundary);
    fresh.interior_from_json(j);
    REQUIRE(fresh.M() == t.M());
    for (int m = 0; m < t.M(); ++m) CHECK((fresh.rings[m] - t.rings[m]).norm() == 0.0);
    CHECK((fresh.radii - t.radii).norm() == 0.0);

    // the round lift has only nonnegative modes
    CHECK(t.holomorphic);
    CMat anti = CMat::Zero(1, 32);
    anti(0, index_of_freq(-2, 32)) = 1.0;
    CHECK_FALSE(DiskTrace::from_coeffs(anti).holomorphic);
}

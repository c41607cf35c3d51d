#include "acdisk/fourier.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <cstdio>

namespace acdisk {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CVec fourier_coeffs(const CVec& values) {
    const int N = static_cast<int>(values.size());
    Eigen::FFT<double> fft;
    std::vector<cplx> in(values.data(), values.data() + N), out(N);
    fft.fwd(out, in);
    CVec c(N);
    for (int j = 0; j < N; ++j) c(j) = out[j] / static_cast<double>(N);
    return c;
}

CVec fourier_values(const CVec& coeffs) {
    const int N = static_cast<int>(coeffs.size());
    Eigen::FFT<double> fft;
    std::vector<cplx> in(N), out(N);
    for (int j = 0; j < N; ++j) in[j] = coeffs(j) * static_cast<double>(N);
    fft.inv(out, in);
    return Eigen::Map<CVec>(out.data(), N);
}

CVec theta_derivative(const CVec& values) {
    const int N = static_cast<int>(values.size());
    CVec c = fourier_coeffs(values);
    for (int j = 0; j < N; ++j) {
        const int k = freq_of_index(j, N);
        c(j) *= (2 * k == N) ? cplx(0.0) : cplx(0.0, static_cast<double>(k));
    }
    return fourier_values(c);
}

RadialGrid::RadialGrid(int M) : M_(M) {
    require(M >= 2, "InvalidConfig", "radial grid needs at least 2 rings");
    r_.resize(M);
    s_.resize(M);
    for (int m = 1; m <= M; ++m) {
        s_(m - 1) = M_PI * (2 * m - 1) / (4.0 * M);
        r_(m - 1) = std::cos(s_(m - 1));
    }
    cosmat_.resize(2 * M, M);
    for (int j = 0; j < 2 * M; ++j)
        for (int k = 0; k < M; ++k) cosmat_(j, k) = std::cos(j * s_(k));
}

CVec RadialGrid::cheb_coeffs(const CVec& samples, int parity) const {
    // Parity-extended transform: only matching-parity coefficients survive.
    CVec c = CVec::Zero(2 * M_);
    for (int j = 0; j < 2 * M_; ++j) {
        if ((j % 2 == 0) != (parity > 0)) continue;
        cplx acc = 0.0;
        for (int k = 0; k < M_; ++k) acc += samples(k) * cosmat_(j, k);
        c(j) = acc * ((j == 0 ? 1.0 : 2.0) / M_);
    }
    return c;
}

cplx RadialGrid::cheb_eval(const CVec& coeffs, double x) {
    cplx b1 = 0.0, b2 = 0.0;
    for (int j = static_cast<int>(coeffs.size()) - 1; j >= 1; --j) {
        const cplx t = 2.0 * x * b1 - b2 + coeffs(j);
        b2 = b1;
        b1 = t;
    }
    return x * b1 - b2 + coeffs(0);
}

cplx RadialGrid::cheb_sum_at_1(const CVec& coeffs) { return coeffs.sum(); }

cplx RadialGrid::cheb_deriv_at_1(const CVec& coeffs) {
    cplx acc = 0.0;
    for (int l = 1; l < coeffs.size(); ++l)
        acc += coeffs(l) * static_cast<double>(l) * static_cast<double>(l);
    return acc;
}

cplx RadialGrid::cheb_second_deriv_at_1(const CVec& coeffs) {
    cplx acc = 0.0;
    for (int l = 2; l < coeffs.size(); ++l) {
        const double ld = l;
        acc += coeffs(l) * ld * ld * (ld * ld - 1.0) / 3.0;
    }
    return acc;
}

namespace {
// 12-point Gauss-Legendre rule on [-1, 1].
constexpr double kGLx[12] = {
    -0.98156063424671924, -0.90411725637047491, -0.76990267419430469,
    -0.58731795428661748, -0.36783149899818013, -0.12523340851146897,
    0.12523340851146897,  0.36783149899818013,  0.58731795428661748,
    0.76990267419430469,  0.90411725637047491,  0.98156063424671924};
constexpr double kGLw[12] = {
    0.047175336386513188, 0.10693932599531782, 0.16007832854334608,
    0.20316742672306573,  0.23349253653835469, 0.24914704581340261,
    0.24914704581340261,  0.23349253653835469, 0.20316742672306573,
    0.16007832854334608,  0.10693932599531782, 0.047175336386513188};
}  // namespace

cplx RadialGrid::power_weighted_integral(const CVec& coeffs, double ra, double rb,
                                         double s, double rref) {
    if (rb <= ra) return 0.0;
    // Work in tau = log rho. The kernel (rho/rref)^s peaks at rho = rref (an
    // endpoint, by the caller's convention) and is <= 1 on the interval; the
    // far side is truncated once the kernel drops below ~1e-20.
    const double lref = std::log(rref);
    double tb = std::log(rb);
    double ta = ra > 0.0 ? std::log(ra) : tb - 46.0;
    if (s > 0.0)
        ta = std::max(ta, lref - 46.0 / s);
    else if (s < 0.0)
        tb = std::min(tb, lref + 46.0 / (-s));
    else
        ta = std::max(ta, tb - 46.0);
    if (tb <= ta) return 0.0;
    // Exponent in tau including the drho Jacobian; even when it vanishes the
    // integrand still varies on unit tau scale through rho = e^tau, so the
    // panel density never drops below that rate. A 12-point panel resolves
    // e^{tau} over 4.5 log units to ~1e-15.
    const double stau = s + 1.0;
    const double rate = std::max(std::abs(stau), 1.0);
    const int panels = std::max(1, static_cast<int>(std::ceil(rate * (tb - ta) / 4.5)));
    cplx total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double t0 = ta + (tb - ta) * p / panels;
        const double t1 = ta + (tb - ta) * (p + 1) / panels;
        const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
        for (int g = 0; g < 12; ++g) {
            const double t = mid + half * kGLx[g];
            const double rho = std::exp(t);
            total += half * kGLw[g] * cheb_eval(coeffs, rho) * std::exp(s * (t - lref)) * rho;
        }
    }
    return total;
}

Mat fornberg_weights(double x0, const Vec& nodes, int order) {
    const int n = static_cast<int>(nodes.size());
    Mat C = Mat::Zero(n, order + 1);
    double c1 = 1.0;
    double c4 = nodes(0) - x0;
    C(0, 0) = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes(i) - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = nodes(i) - nodes(j);
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    C(i, k) = c1 * (k * C(i - 1, k - 1) - c5 * C(i - 1, k)) / c2;
                C(i, 0) = -c1 * c5 * C(i - 1, 0) / c2;
            }
            for (int k = mn; k >= 1; --k)
                C(j, k) = (c4 * C(j, k) - k * C(j, k - 1)) / c3;
            C(j, 0) = c4 * C(j, 0) / c3;
        }
        c1 = c2;
    }
    return C;
}

}  // namespace acdisk

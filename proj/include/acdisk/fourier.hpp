#pragma once

#include "acdisk/common.hpp"

namespace acdisk {

// Boundary nodes are theta_j = 2 pi j / N; coefficients are stored in FFT
// order (index j holds frequency j for j <= N/2, else j - N).
inline int freq_of_index(int j, int N) { return j <= N / 2 ? j : j - N; }
inline int index_of_freq(int k, int N) { return k >= 0 ? k : k + N; }

// c_k = (1/N) sum_j v_j e^{-i k theta_j}
CVec fourier_coeffs(const CVec& values);
// v_j = sum_k c_k e^{i k theta_j}
CVec fourier_values(const CVec& coeffs);

// Multiplier i*k per mode; the Nyquist mode is zeroed (its derivative is not
// representable on the grid).
CVec theta_derivative(const CVec& values);

// Radial grid r_m = cos(pi(2m-1)/(4M)), m = 1..M, descending from ~1 to ~0.
// These are the positive half of the degree-2M Chebyshev-Gauss points, so
// samples extend by parity to a full spectral interpolant on [-1, 1].
class RadialGrid {
public:
    explicit RadialGrid(int M);

    int M() const { return M_; }
    const Vec& r() const { return r_; }

    // Coefficients (length 2M, plain Chebyshev basis) of the interpolant
    // through the parity-extended samples. parity = +1 even, -1 odd.
    CVec cheb_coeffs(const CVec& samples, int parity) const;

    static cplx cheb_eval(const CVec& coeffs, double x);
    static cplx cheb_sum_at_1(const CVec& coeffs);        // value at x = 1
    static cplx cheb_deriv_at_1(const CVec& coeffs);      // sum l^2 c_l
    static cplx cheb_second_deriv_at_1(const CVec& coeffs);  // sum l^2(l^2-1)/3 c_l

    // integral over [ra, rb] of interp(rho) * (rho/rref)^s drho, computed in
    // log-radius panels with a 12-point Gauss rule; the caller arranges
    // rref so the power kernel stays <= 1 on the interval (no overflow, no
    // noise amplification). ra = 0 is allowed: the kernel or the 45-log-unit
    // cutoff truncates the tail.
    static cplx power_weighted_integral(const CVec& coeffs, double ra, double rb,
                                        double s, double rref);

private:
    int M_;
    Vec r_;
    Vec s_;       // angles of the positive nodes
    Mat cosmat_;  // cos(j * s_k), 2M x M, for the coefficient transform
};

// Finite-difference weights on arbitrary nodes (Fornberg's algorithm):
// returns an (nodes x (order+1)) matrix; column d holds the weights of the
// d-th derivative at x0.
Mat fornberg_weights(double x0, const Vec& nodes, int order);

}  // namespace acdisk

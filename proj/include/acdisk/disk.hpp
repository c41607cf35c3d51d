#pragma once

#include "acdisk/common.hpp"
#include "acdisk/fourier.hpp"
#include "acdisk/geometry.hpp"

#include <json.hpp>

#include <vector>

namespace acdisk {

// Discrete map of the closed disk: Fourier boundary trace at theta_k = 2 pi k/N
// plus optional interior values on the clustered polar grid.
struct DiskTrace {
    int comps = 0;  // complex components (2n for lifted disks, n for base maps)
    int N = 0;      // boundary nodes, power of two
    CMat boundary;  // comps x N
    CMat coeffs;    // comps x N Fourier coefficients, FFT order
    std::vector<CMat> rings;  // M entries, comps x N; ring 0 is the outermost
    Vec radii;                // matching RadialGrid radii (descending)
    bool holomorphic = false;

    static DiskTrace from_boundary(const CMat& values);
    static DiskTrace from_coeffs(const CMat& coeffs);

    int M() const { return static_cast<int>(rings.size()); }
    double negative_mass() const;  // relative Fourier mass at negative modes
    // Trace of the first `count` components only (base part of a lifted disk).
    DiskTrace head(int count) const;

    void to_csv(const std::string& path) const;
    static DiskTrace from_csv(const std::string& path);
    nlohmann::json interior_to_json() const;
    void interior_from_json(const nlohmann::json& j);
};

// Solution machinery for dbar u = q on the disk, mode by mode: the boundary
// trace contributes its positive-frequency holomorphic extension, the source
// contributes the Cauchy-Green integral. T[q] restricted to the boundary has
// only negative frequencies, which is what couples the source into the
// boundary unknowns downstream.
class CauchyGreen {
public:
    CauchyGreen(int N, int M);

    struct Result {
        std::vector<CMat> rings;  // interior values of the extension (optional)
        CMat boundary_T;          // boundary values of T[q] (negative modes only)
        CMat boundary_T_coeffs;   // same data in coefficient form
        CVec at_zero;             // u(0)
        CVec dx_at_zero;          // d/dx u at 0 (x = Re zeta direction)
        CVec dx_at_one;           // d/dx u at zeta = 1 along the real axis
        CVec dxx_at_one;          // d^2/dx^2 u at zeta = 1
    };

    // trace_coeffs: comps x N Fourier coefficients; modes k >= 0 are extended.
    // q_rings: source values on the polar grid (empty means q = 0).
    // want_rings = false skips the interior synthesis (boundary rows and the
    // zeta = 0, 1 functionals only), which is what the Newton columns need.
    Result extend(const CMat& trace_coeffs, const std::vector<CMat>& q_rings,
                  bool want_derivatives, bool want_rings = true) const;

    // d/dzeta of the extension on the polar grid (modal formulas, no
    // differencing): needed by the nonlinear solver.
    std::vector<CMat> z_derivative(const CMat& trace_coeffs,
                                   const std::vector<CMat>& q_rings) const;

    int N() const { return N_; }
    int M() const { return M_; }
    const RadialGrid& radial() const { return grid_; }

private:
    struct ModeData {
        CVec psi;           // at the M radii
        cplx at_boundary;   // psi(1)
        cplx dpsi_at_one;   // psi'(1)
        cplx ddpsi_at_one;  // psi''(1)
        CVec cheb;          // Chebyshev coefficients of the mode profile
    };
    ModeData mode_transform(const CVec& q_profile, int m, bool want_derivatives) const;

    int N_;
    int M_;
    RadialGrid grid_;
};

// Holomorphic extension of the nonnegative-frequency part of the trace plus
// the Cauchy-Green integral of the source: returns a copy of the trace with
// rings and radii filled on an M-ring grid.
DiskTrace cauchy_green_extend(const DiskTrace& trace, const std::vector<CMat>& q_rings, int M);

// Chart-real first derivatives of a lifted field on the polar grid: spectral
// in theta, high-order finite differences in r on the through-origin doubled
// lines (boundary values anchor the stencils).
struct GridDerivatives {
    std::vector<Mat> Fx;  // per ring, 2*comps x N
    std::vector<Mat> Fy;
};
GridDerivatives disk_xy_derivatives(const DiskTrace& trace);

// Residual of the nonlinear Cauchy-Riemann equation F_y - JJ(F) F_x on the
// polar grid, for a lifted trace (comps = 2n).
std::vector<Mat> dbar_residual(const DiskTrace& trace, const AlmostComplexStructure& J);

double sup_norm(const std::vector<Mat>& field);

// Discrete Hilbert transform: Fourier multiplier -i sgn(k), zero mean, Nyquist
// dropped.
Vec hilbert_conjugate(const Vec& boundary_values);

// Real values lambda(theta_k) at the boundary nodes.
struct BoundaryMultiplier {
    Vec values;
};

}  // namespace acdisk

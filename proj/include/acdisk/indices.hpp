#pragma once

#include "acdisk/rhsolver.hpp"

#include <functional>
#include <vector>

namespace acdisk {

// Invertible matrix-valued loop on the unit circle, sampled at the N
// equispaced nodes zeta_j = e^{2 pi i j / N}.
struct MatrixLoop {
    std::vector<CMat> values;

    int nodes() const { return static_cast<int>(values.size()); }
    int dim() const { return values.empty() ? 0 : static_cast<int>(values[0].rows()); }

    static MatrixLoop from_function(int N, int d, const std::function<CMat(cplx)>& fn);
    // Boundary coupling matrices G of a linearized solution.
    static MatrixLoop from_linearized_boundary(const LinearizedData& lin);

    double min_abs_det() const;
    // Entrywise Fourier mass beyond the band, relative to the total mass.
    double fourier_tail(int band) const;
};

// Winding of det(loop) around the origin. Throws WindingAmbiguous when the
// nodes under-resolve the phase or the rounding defect exceeds 1e-6.
int winding_number(const MatrixLoop& loop);

// Loop reorganized as Theta(zeta) Lambda(zeta) conj(Theta(zeta))^{-1} with
// Theta holomorphic and invertible on the closed disk and Lambda(zeta) =
// diag(zeta^{k_i}). The exponents are sorted descending and their multiset
// does not depend on the choices made along the way. Conjugate-symmetric
// factors exist only when the loop satisfies A conj(A) = I, which holds for
// every loop of the form L conj(L)^{-1}; otherwise only the indices are
// meaningful, theta stays empty and defect is negative.
struct FactorizationResult {
    std::vector<int> indices;
    int total = 0;
    std::vector<CMat> theta;   // per node
    std::vector<CMat> lambda;  // per node
    double defect = -1.0;      // sup over nodes of |A - Theta Lambda conj(Theta)^{-1}|
};

FactorizationResult birkhoff_factorize(const MatrixLoop& loop);

// Indices of the boundary coupling G: factorizes A = G^{-1} conj(G), the
// loop that reduces the linearized boundary condition 2 Re(G h) = 0 to the
// scalar problems h_i = zeta^{k_i} conj(h_i).
FactorizationResult partial_indices_of_boundary(const MatrixLoop& G);

// Analytic index of the linearized boundary value problem with coupling G:
// dim minus twice the winding of det G.
int fredholm_index(const MatrixLoop& G);

struct KernelReport {
    int numeric = 0;          // real dimension counted below the null threshold
    int closed_form = -1;     // sum of (k_i + 1) over k_i >= 0 (source-free count)
    bool surjective = false;  // every k_i >= -1
    bool agree = false;       // numeric == closed_form
    Mat basis;                // columns: real coefficient vectors of the kernel
};

// Kernel of (h, tau) -> (dbar h + A h + B conj(h), 2 Re(G h) on the boundary,
// tau) over in-band holomorphic data; the dbar rows are eliminated exactly by
// slaving the source to the trace, so only boundary rows reach the matrix.
// The loop overload is the source-free model (A = B = 0).
KernelReport kernel_dimension(const MatrixLoop& G);
KernelReport kernel_dimension(const LinearizedData& lin);

struct GoodBoundaryReport {
    double min_singular = 0.0;  // smallest singular value over the largest
    bool invertible = false;
};

// Invertibility proxy for the discrete linearized system at a converged
// solution: smallest relative singular value of the Newton matrix.
GoodBoundaryReport good_boundary_test(const StationarySolution& sol, const Domain& domain,
                                      const AlmostComplexStructure& J);

}  // namespace acdisk

#pragma once

#include "acdisk/cotangent.hpp"
#include "acdisk/disk.hpp"
#include "acdisk/geometry.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace acdisk {

struct SolverOptions {
    int N = 64;          // boundary nodes (power of two)
    int M = 16;          // radial rings
    int band = 0;        // Fourier band of the unknown trace; 0 means N/4
    double tol = 1e-10;  // sup-norm convergence target
    int max_iter = 25;
    int max_backtrack = 20;
    double fd_step = 1e-7;          // one-sided Jacobian differencing
    double interior_slack = 1e-6;   // rho may not exceed this on interior rings
    bool verbose = false;
};

struct StationarySolution {
    DiskTrace lift;             // 2n complex components: base then fiber
    BoundaryMultiplier lambda;  // nodewise multiplier recovered at the solution
    double mu = 1.0;
    std::vector<std::string> residual_names;
    std::vector<double> residual_sups;
    int newton_iterations = 0;
    std::string structure_description;
    std::string domain_kind;
    Vec x0, v0;
    std::string normalization;  // "center" or "boundary"
    double nu_target = 0.0;     // boundary normalization only
    double t = 0.0;             // deformation parameter for continuation output
};

// Independent evaluation of the interior-point system on a candidate: the
// nonlinear Cauchy-Riemann field on the rings (R1), the reduced conormal rows
// (R2), the two center anchors (R3, R4) from finite differences along the
// doubled real-axis line, and the lift normalization (R5) one-sided at 1.
// This route shares no differentiation machinery with the solver itself.
struct CenterOperatorValue {
    std::vector<Mat> r1;  // per ring, 4n x N
    Mat r2;               // (2n+1) x N, rows: rho; lambda - lambda*; reduced defect
    Vec r3;               // 2n
    Vec r4;               // 2n
    double r5 = 0.0;
    std::array<double, 5> sups() const;
};

CenterOperatorValue evaluate_center_operator(const Domain& domain,
                                             const AlmostComplexStructure& J, const Vec& x0,
                                             const Vec& v0, const DiskTrace& candidate,
                                             const BoundaryMultiplier& lambda, double mu);

StationarySolution solve_stationary_center(const Domain& domain, const AlmostComplexStructure& J,
                                           const Vec& x0, const Vec& v0,
                                           const SolverOptions& opt = {},
                                           const StationarySolution* initial = nullptr);

// Boundary-point normalization: f(1) = x0 on the boundary, f_x(1) = v0 (which
// must make angle < acos(a) with the outward normal), tangency parameter
// pinned to nu_target.
StationarySolution solve_stationary_boundary(const Domain& domain,
                                             const AlmostComplexStructure& J, const Vec& x0,
                                             const Vec& v0, double nu_target, double cone_a,
                                             const SolverOptions& opt = {},
                                             const StationarySolution* initial = nullptr);

// <f_xx(1), J(x0) f_x(1)> along the real-axis approach to zeta = 1, for the
// base part of the trace. Uses the interior rings when present, otherwise the
// Fourier coefficients of a holomorphic trace.
double tangency_parameter(const DiskTrace& trace, const AlmostComplexStructure& J);

// Linearization data at a converged solution: boundary loop G (reduced, square)
// and the interior zero-order coefficients A, B of h_zetabar + A h + B conj(h).
struct LinearizedData {
    int n = 0, N = 0, M = 0;
    std::vector<CMat> G;                  // per boundary node, 2n x 2n
    std::vector<std::vector<CMat>> A;     // [ring][node], 2n x 2n
    std::vector<std::vector<CMat>> B;     // [ring][node], 2n x 2n
    std::vector<CVec> lambda_row;         // per node: complex row of delta lambda*
    Vec radii;
    double min_abs_det_G = 0.0;
};

LinearizedData linearize(const StationarySolution& sol, const Domain& domain,
                         const AlmostComplexStructure& J);

// Rectangular derivative of the discrete stationary system at a solution, by
// the same one-sided differencing the Newton corrector uses. Rows follow the
// residual layout, columns the packed trace coefficients plus mu. Feeds the
// boundary-regularity diagnostic.
Mat solver_jacobian(const Domain& domain, const AlmostComplexStructure& J,
                    const StationarySolution& sol);

// Residual of the discrete stationary system at a provided solution, with the
// source iterated to its fixed point; rows match solver_jacobian. Pairs with
// it for post-hoc verification of solutions from disk or other builds.
Vec stationary_residual(const Domain& domain, const AlmostComplexStructure& J,
                        const StationarySolution& sol);

// Row layout of the residual and jacobian: (block name, row count), in order.
std::vector<std::pair<std::string, int>> stationary_residual_layout(
    const Domain& domain, const AlmostComplexStructure& J, const StationarySolution& sol);

class StepUnderflowError : public Error {
public:
    StepUnderflowError(double t_reached, std::vector<StationarySolution> partial,
                       const std::string& message)
        : Error("StepUnderflow", message), t_reached(t_reached), partial(std::move(partial)) {}
    double t_reached;
    std::vector<StationarySolution> partial;
};

struct ContinuationResult {
    std::vector<StationarySolution> family;  // family[i] solved at ts[i]
    std::vector<double> ts;
    double t_reached = 0.0;
};

// Predictor-corrector march of the base solution along the deformation path up
// to t_target; adaptive halving, minimum step 1e-6 (StepUnderflowError carries
// the partial family).
ContinuationResult continuation_path(const Domain& domain, const DeformationPath& path,
                                     const StationarySolution& base, double t_target,
                                     const SolverOptions& opt = {});

}  // namespace acdisk

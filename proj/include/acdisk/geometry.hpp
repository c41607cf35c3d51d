#pragma once

#include "acdisk/common.hpp"

#include <json.hpp>

#include <memory>
#include <random>
#include <vector>

namespace acdisk {

// J_st in the fixed chart: z_j = x_{2j} + i x_{2j+1}.
Mat standard_J(int n);

struct AlmostComplexStructure {
    int n = 1;
    std::string description = "standard";
    bool standard = true;
    std::function<Mat(const Vec&)> eval_fn;                 // unset => J_st
    std::function<std::vector<Mat>(const Vec&)> deriv_fn;   // unset => central FD

    Mat eval(const Vec& x) const;
    // deriv()[j] = dJ/dx^j, a 2n x 2n matrix (entry (a,i) = dJ^a_i / dx^j).
    std::vector<Mat> deriv(const Vec& x) const;

    static AlmostComplexStructure standard_structure(int n);
};

// J_t(x) = (I + tS(x)) J_st (I + tS(x))^{-1}: squares to -I exactly for every t
// with I + tS invertible.
struct DeformationPath {
    int n = 1;
    std::string generator = "zero";
    double t_max = 0.3;
    std::function<Mat(const Vec&)> S;
    std::function<std::vector<Mat>(const Vec&)> dS;  // analytic, dS()[j] = dS/dx^j

    AlmostComplexStructure structure(double t) const;

    // Built-in generators: "zero", "g1", "g2" (bounded trigonometric fields
    // with analytic derivatives), "random:<seed>" (random trigonometric field).
    static DeformationPath builtin(const std::string& id, int n);
};

struct Domain {
    int n = 1;
    std::string kind = "ball";
    nlohmann::json spec;  // parameters, kept for serialization and hashing
    std::function<double(const Vec&)> rho_fn;
    std::function<Vec(const Vec&)> grad_fn;
    std::function<Mat(const Vec&)> hess_fn;  // may be unset (FD fallback)

    double rho(const Vec& x) const { return rho_fn(x); }
    Vec grad(const Vec& x) const { return grad_fn(x); }
    Mat hess(const Vec& x) const;

    // 1-D Newton along the gradient direction; max 50 steps, |rho| < 1e-13.
    Vec boundary_project(const Vec& x) const;

    static Domain ball(int n);
    static Domain ellipsoid(const std::vector<double>& a);  // sum a_i |z^i|^2 - 1
    // Sparse real-coefficient multi-index table over (Re z, Im z):
    // rho(x) = sum_t coeff_t * prod_i x_i^{pow_t(i)}.
    static Domain polynomial(int n, const std::vector<std::pair<double, std::vector<int>>>& terms);
    static Domain from_json(const nlohmann::json& j);
};

struct LeviReport {
    double min_eigenvalue = 0.0;
    Vec worst_point;
    bool pass = false;
};

// L(v) = dtheta(v, Jv) with theta = -J*drho; positive definite on the complex
// tangent distribution = strong pseudoconvexity. With this orientation the
// unit sphere gives L(v) = 4|v|^2.
double levi_form(const Domain& domain, const AlmostComplexStructure& J, const Vec& x,
                 const Vec& v, double boundary_tol = 1e-8);

LeviReport check_strong_pseudoconvexity(const Domain& domain, const AlmostComplexStructure& J,
                                        const std::vector<Vec>& boundary_samples);

// Sampled boundary grid helper (deterministic, seeded).
std::vector<Vec> sample_boundary(const Domain& domain, int count, std::uint64_t seed);

// sup over the sample grid of the operator norm of (lifted J - lifted J0) at
// (x, p); the metric is Euclidean in the chart.
double deformation_norm(const AlmostComplexStructure& J, const AlmostComplexStructure& J0,
                        const std::vector<std::pair<Vec, Vec>>& samples);

std::vector<std::pair<Vec, Vec>> sample_phase_points(const Domain& domain, int count,
                                                     std::uint64_t seed);

}  // namespace acdisk

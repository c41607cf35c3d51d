#pragma once

#include "acdisk/common.hpp"
#include "acdisk/geometry.hpp"

namespace acdisk {

struct CotangentPoint {
    Vec x;  // base, R^{2n}
    Vec p;  // covector components in the chart
};

// Re(zeta) p - Im(zeta) J^T(x) p. In the (z, w) chart this multiplies the
// fiber coefficient by conj(zeta); on the unit circle conj(zeta) = 1/zeta, so
// the same call realizes the inverse-rotation of covectors.
Mat c_action_matrix(const Mat& J, cplx zeta);
Vec c_action(const AlmostComplexStructure& J, const Vec& x, cplx zeta, const Vec& p);

// Canonical lift of J to T*M acting on (dx, dp): base block J, fiber block
// J^T, and a mixed block linear in p built from the first derivatives of J.
Mat lift_structure(const AlmostComplexStructure& J, const Vec& x, const Vec& p);

// Defining map of the conormal bundle with multiplier slot t:
// rho_tilde(t, x, p) = (rho(x), p - t grad rho(x)).
struct ConormalModel {
    Domain domain;

    Vec rho_tilde(double t, const Vec& x, const Vec& p) const;
    // Jacobian with respect to (t, x, p), size (2n+1) x (4n+1); analytic when
    // the domain carries a Hessian, otherwise centered differences (1e-6).
    Mat rho_tilde_jacobian(double t, const Vec& x, const Vec& p) const;
};

// r(zeta, t, alpha) = rho_tilde(t, zeta-rotated covector); zero iff the rotated
// covector lies on the conormal bundle with multiplier t.
Vec conormal_defect(const ConormalModel& model, const AlmostComplexStructure& J, cplx zeta,
                    double t, const CotangentPoint& alpha);

// Smallest principal angle between T_alpha N* and its image under the lifted
// structure; positive = totally real at alpha. Evaluated at the unit-covector
// representative of the ray, so scalings of alpha give the identical angle.
double totally_real_angle(const Domain& domain, const AlmostComplexStructure& J,
                          const CotangentPoint& alpha);

}  // namespace acdisk

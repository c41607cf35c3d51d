#include "acdisk/cotangent.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace acdisk {

Mat c_action_matrix(const Mat& J, cplx zeta) {
    const int dim = static_cast<int>(J.rows());
    return Mat(zeta.real() * Mat::Identity(dim, dim) - zeta.imag() * J.transpose());
}

Vec c_action(const AlmostComplexStructure& J, const Vec& x, cplx zeta, const Vec& p) {
    return Vec(zeta.real() * p - zeta.imag() * (J.eval(x).transpose() * p));
}

Mat lift_structure(const AlmostComplexStructure& J, const Vec& x, const Vec& p) {
    const int dim = 2 * J.n;
    const Mat Jm = J.eval(x);
    Mat L = Mat::Zero(2 * dim, 2 * dim);
    L.topLeftCorner(dim, dim) = Jm;
    L.bottomRightCorner(dim, dim) = Jm.transpose();
    if (!J.standard) {
        const std::vector<Mat> dJ = J.deriv(x);
        // C[i][j] = (1/2) p_a ( J^a_{i,j} - J^a_{j,i}
        //                       + J^a_l (J^l_{j,m} J^m_i - J^l_{i,m} J^m_j) )
        // with J^a_{i,j} = dJ[j](a, i). The sign is pinned by functoriality:
        // pushing an integrable structure forward to the flat one must carry
        // this lift to the constant standard lift (see the unit test).
        const Vec u = Jm.transpose() * p;
        Mat P1(dim, dim), W(dim, dim);
        for (int j = 0; j < dim; ++j) {
            P1.col(j) = dJ[j].transpose() * p;  // P1(i, j) = p_a J^a_{i,j}
            W.col(j) = dJ[j].transpose() * u;   // W(i, m=j) = u_l J^l_{i,m}
        }
        const Mat WJ = W * Jm;  // (i, j) = u_l J^l_{i,m} J^m_j
        L.bottomLeftCorner(dim, dim) =
            0.5 * (P1 - P1.transpose() + WJ.transpose() - WJ);
    }
    return L;
}

Vec ConormalModel::rho_tilde(double t, const Vec& x, const Vec& p) const {
    const int dim = static_cast<int>(x.size());
    Vec out(dim + 1);
    out(0) = domain.rho(x);
    out.tail(dim) = p - t * domain.grad(x);
    return out;
}

Mat ConormalModel::rho_tilde_jacobian(double t, const Vec& x, const Vec& p) const {
    const int dim = static_cast<int>(x.size());
    Mat K = Mat::Zero(dim + 1, 2 * dim + 1);
    const Vec g = domain.grad(x);
    K.block(0, 1, 1, dim) = g.transpose();
    K.block(1, 0, dim, 1) = -g;
    if (domain.hess_fn) {
        K.block(1, 1, dim, dim) = -t * domain.hess(x);
    } else {
        Vec xp = x;
        const double h = 1e-6;
        for (int j = 0; j < dim; ++j) {
            const double x0 = x(j);
            xp(j) = x0 + h;
            Vec gp = domain.grad(xp);
            xp(j) = x0 - h;
            Vec gm = domain.grad(xp);
            xp(j) = x0;
            K.block(1, 1 + j, dim, 1) = -t * (gp - gm) / (2.0 * h);
        }
    }
    K.block(1, 1 + dim, dim, dim) = Mat::Identity(dim, dim);
    return K;
}

Vec conormal_defect(const ConormalModel& model, const AlmostComplexStructure& J, cplx zeta,
                    double t, const CotangentPoint& alpha) {
    return model.rho_tilde(t, alpha.x, c_action(J, alpha.x, zeta, alpha.p));
}

double totally_real_angle(const Domain& domain, const AlmostComplexStructure& J,
                          const CotangentPoint& alpha) {
    require(std::abs(domain.rho(alpha.x)) < 1e-8, "NotOnBoundary",
            "conormal points sit over the boundary");
    const Vec g = domain.grad(alpha.x);
    require(g.norm() > 1e-8, "RankDeficient", "degenerate gradient");
    const double t_raw = alpha.p.dot(g) / g.squaredNorm();
    require((alpha.p - t_raw * g).norm() <= 1e-6 * alpha.p.norm(), "NotInDistribution",
            "covector is not conormal at its base point");

    // Unit-covector representative of the ray through alpha.
    const double scale = alpha.p.norm();
    require(scale > 0.0, "NotInDistribution", "zero covector is excluded from N*");
    const Vec p = alpha.p / scale;
    const double t = t_raw / scale;

    const int dim = static_cast<int>(alpha.x.size());
    const ConormalModel model{domain};
    const Mat K = model.rho_tilde_jacobian(t, alpha.x, p);
    Eigen::JacobiSVD<Mat> svd(K, Eigen::ComputeFullV);
    const Vec sv = svd.singularValues();
    require(sv(sv.size() - 1) > 1e-7 * sv(0), "RankDeficient",
            "defining map is rank deficient at alpha");
    // Kernel of the (t,x,p) Jacobian, projected to its (x,p) components: the
    // multiplier slot parametrizes, it is not a direction of T*M.
    const Mat null_txp = svd.matrixV().rightCols(2 * dim + 1 - (dim + 1));
    const Mat V = null_txp.bottomRows(2 * dim);

    Eigen::HouseholderQR<Mat> qr1(V);
    const Mat Q1 = Mat(qr1.householderQ()).leftCols(V.cols());
    const Mat L = lift_structure(J, alpha.x, p);
    Eigen::HouseholderQR<Mat> qr2(Mat(L * Q1));
    const Mat Q2 = Mat(qr2.householderQ()).leftCols(V.cols());
    Eigen::JacobiSVD<Mat> cross(Mat(Q1.transpose() * Q2));
    const double smax = std::min(1.0, cross.singularValues()(0));
    return std::acos(smax);
}

}  // namespace acdisk

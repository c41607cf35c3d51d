#include "acdisk/geometry.hpp"

#include "acdisk/cotangent.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace acdisk {

namespace {
constexpr double kHJ = 1e-5;       // FD step for structure derivatives
constexpr double kDeltaGrad = 1e-8;
}  // namespace

Mat standard_J(int n) {
    Mat J = Mat::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        J(2 * j, 2 * j + 1) = -1.0;
        J(2 * j + 1, 2 * j) = 1.0;
    }
    return J;
}

Mat AlmostComplexStructure::eval(const Vec& x) const {
    if (!eval_fn) return standard_J(n);
    return eval_fn(x);
}

std::vector<Mat> AlmostComplexStructure::deriv(const Vec& x) const {
    if (standard || !eval_fn) return std::vector<Mat>(2 * n, Mat::Zero(2 * n, 2 * n));
    if (deriv_fn) return deriv_fn(x);
    std::vector<Mat> out(2 * n);
    Vec xp = x;
    for (int j = 0; j < 2 * n; ++j) {
        const double x0 = x(j);
        xp(j) = x0 + kHJ;
        Mat plus = eval_fn(xp);
        xp(j) = x0 - kHJ;
        Mat minus = eval_fn(xp);
        xp(j) = x0;
        out[j] = (plus - minus) / (2.0 * kHJ);
    }
    return out;
}

AlmostComplexStructure AlmostComplexStructure::standard_structure(int n) {
    AlmostComplexStructure J;
    J.n = n;
    J.description = "standard";
    J.standard = true;
    return J;
}

AlmostComplexStructure DeformationPath::structure(double t) const {
    AlmostComplexStructure out;
    out.n = n;
    out.description = generator + " t=" + format_double(t);
    out.standard = (t == 0.0) || generator == "zero";
    if (out.standard) return out;
    const Mat J0 = standard_J(n);
    auto Sf = S;
    auto dSf = dS;
    const int dim = 2 * n;
    out.eval_fn = [t, J0, Sf, dim](const Vec& x) {
        Mat M = Mat::Identity(dim, dim) + t * Sf(x);
        return Mat(M * J0 * M.inverse());
    };
    if (dSf) {
        out.deriv_fn = [t, J0, Sf, dSf, dim](const Vec& x) {
            const Mat M = Mat::Identity(dim, dim) + t * Sf(x);
            const Mat Mi = M.inverse();
            const Mat JM = M * J0 * Mi;
            const std::vector<Mat> dSx = dSf(x);
            std::vector<Mat> out(dim);
            for (int j = 0; j < dim; ++j) {
                const Mat Mj = t * dSx[j];
                out[j] = Mj * J0 * Mi - JM * Mj * Mi;
            }
            return out;
        };
    }
    return out;
}

DeformationPath DeformationPath::builtin(const std::string& id, int n) {
    DeformationPath path;
    path.n = n;
    path.generator = id;
    const int dim = 2 * n;
    if (id == "zero") {
        path.S = [dim](const Vec&) { return Mat::Zero(dim, dim); };
        path.dS = [dim](const Vec&) { return std::vector<Mat>(dim, Mat::Zero(dim, dim)); };
        return path;
    }
    // Trigonometric matrix fields: bounded, analytic, genuinely x-dependent
    // (a constant S would conjugate J_st to an integrable structure).
    double amp = 0.5 / dim;
    double freq2 = 2.0;
    std::vector<double> phase(dim * dim);
    if (id == "g1" || id == "g2") {
        const double shift = (id == "g1") ? 0.0 : 0.7;
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) phase[a * dim + b] = (a + 2.0 * b) / dim + shift;
        if (id == "g2") freq2 = 1.0;
    } else if (id.rfind("random:", 0) == 0) {
        std::mt19937_64 rng(std::stoull(id.substr(7)));
        std::uniform_real_distribution<double> uni(0.0, 2.0 * M_PI);
        for (auto& ph : phase) ph = uni(rng);
    } else {
        fail("InvalidConfig", "unknown deformation generator '" + id + "'");
    }
    path.S = [dim, amp, freq2, phase](const Vec& x) {
        Mat S(dim, dim);
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b)
                S(a, b) = amp * std::sin(x(a) + freq2 * x(b) + phase[a * dim + b]);
        return S;
    };
    path.dS = [dim, amp, freq2, phase](const Vec& x) {
        std::vector<Mat> out(dim, Mat::Zero(dim, dim));
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) {
                const double c = amp * std::cos(x(a) + freq2 * x(b) + phase[a * dim + b]);
                out[a](a, b) += c;
                out[b](a, b) += freq2 * c;
            }
        return out;
    };
    return path;
}

Mat Domain::hess(const Vec& x) const {
    if (hess_fn) return hess_fn(x);
    const int dim = static_cast<int>(x.size());
    Mat H(dim, dim);
    Vec xp = x;
    const double h = 1e-6;
    for (int j = 0; j < dim; ++j) {
        const double x0 = x(j);
        xp(j) = x0 + h;
        Vec gp = grad_fn(xp);
        xp(j) = x0 - h;
        Vec gm = grad_fn(xp);
        xp(j) = x0;
        H.col(j) = (gp - gm) / (2.0 * h);
    }
    return Mat(0.5 * (H + H.transpose()));
}

Vec Domain::boundary_project(const Vec& x) const {
    Vec g0 = grad(x);
    if (g0.norm() < kDeltaGrad) {
        // gradient degenerate at the seed (e.g. the center of the ball);
        // pick a fixed direction instead.
        g0 = Vec::Zero(x.size());
        g0(0) = 1.0;
    }
    const Vec d = g0 / g0.norm();
    double s = 0.0;
    // Bracket along the ray first so Newton cannot run away on user domains.
    double val = rho(x);
    if (val < 0.0) {
        double hi = 1.0;
        while (rho(x + hi * d) < 0.0 && hi < 1e6) hi *= 2.0;
        require(hi < 1e6, "NotOnBoundary", "no boundary point along the gradient ray");
        s = hi / 2.0;
    }
    for (int it = 0; it < 50; ++it) {
        const Vec y = x + s * d;
        const double f = rho(y);
        if (std::abs(f) < 1e-13) return y;
        const double df = grad(y).dot(d);
        require(std::abs(df) > kDeltaGrad, "NotOnBoundary", "degenerate gradient during projection");
        s -= f / df;
    }
    const Vec y = x + s * d;
    require(std::abs(rho(y)) < 1e-13, "NotOnBoundary", "projection did not converge");
    return y;
}

Domain Domain::ball(int n) {
    Domain D;
    D.n = n;
    D.kind = "ball";
    D.spec = {{"kind", "ball"}, {"n", n}};
    D.rho_fn = [](const Vec& x) { return x.squaredNorm() - 1.0; };
    D.grad_fn = [](const Vec& x) { return Vec(2.0 * x); };
    const int dim = 2 * n;
    D.hess_fn = [dim](const Vec&) { return Mat(2.0 * Mat::Identity(dim, dim)); };
    return D;
}

Domain Domain::ellipsoid(const std::vector<double>& a) {
    Domain D;
    const int n = static_cast<int>(a.size());
    D.n = n;
    D.kind = "ellipsoid";
    D.spec = {{"kind", "ellipsoid"}, {"a", a}};
    Vec w(2 * n);
    for (int j = 0; j < n; ++j) {
        require(a[j] > 0.0, "InvalidConfig", "ellipsoid weights must be positive");
        w(2 * j) = a[j];
        w(2 * j + 1) = a[j];
    }
    D.rho_fn = [w](const Vec& x) { return x.cwiseProduct(w).dot(x) - 1.0; };
    D.grad_fn = [w](const Vec& x) { return Vec(2.0 * w.cwiseProduct(x)); };
    D.hess_fn = [w](const Vec&) { return Mat(2.0 * w.asDiagonal()); };
    return D;
}

Domain Domain::polynomial(int n, const std::vector<std::pair<double, std::vector<int>>>& terms) {
    Domain D;
    D.n = n;
    D.kind = "polynomial";
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& [c, pw] : terms) jt.push_back({{"coeff", c}, {"powers", pw}});
    D.spec = {{"kind", "polynomial"}, {"n", n}, {"terms", jt}};
    const int dim = 2 * n;
    for (const auto& t : terms)
        require(static_cast<int>(t.second.size()) == dim, "InvalidConfig",
                "polynomial term power list must have 2n entries");
    auto mono = [](double x, int p) {
        double v = 1.0;
        for (int i = 0; i < p; ++i) v *= x;
        return v;
    };
    D.rho_fn = [terms, mono](const Vec& x) {
        double v = 0.0;
        for (const auto& [c, pw] : terms) {
            double m = c;
            for (int i = 0; i < x.size(); ++i) m *= mono(x(i), pw[i]);
            v += m;
        }
        return v;
    };
    D.grad_fn = [terms, mono, dim](const Vec& x) {
        Vec g = Vec::Zero(dim);
        for (const auto& [c, pw] : terms)
            for (int j = 0; j < dim; ++j) {
                if (pw[j] == 0) continue;
                double m = c * pw[j] * mono(x(j), pw[j] - 1);
                for (int i = 0; i < dim; ++i)
                    if (i != j) m *= mono(x(i), pw[i]);
                g(j) += m;
            }
        return g;
    };
    D.hess_fn = [terms, mono, dim](const Vec& x) {
        Mat H = Mat::Zero(dim, dim);
        for (const auto& [c, pw] : terms)
            for (int j = 0; j < dim; ++j) {
                if (pw[j] == 0) continue;
                for (int k = 0; k <= j; ++k) {
                    double m = c;
                    if (k == j) {
                        if (pw[j] < 2) continue;
                        m *= pw[j] * (pw[j] - 1) * mono(x(j), pw[j] - 2);
                        for (int i = 0; i < dim; ++i)
                            if (i != j) m *= mono(x(i), pw[i]);
                    } else {
                        if (pw[k] == 0) continue;
                        m *= pw[j] * mono(x(j), pw[j] - 1) * pw[k] * mono(x(k), pw[k] - 1);
                        for (int i = 0; i < dim; ++i)
                            if (i != j && i != k) m *= mono(x(i), pw[i]);
                    }
                    H(j, k) += m;
                    if (k != j) H(k, j) += m;
                }
            }
        return H;
    };
    return D;
}

Domain Domain::from_json(const nlohmann::json& j) {
    require(j.contains("kind"), "InvalidConfig", "domain spec needs a 'kind'");
    const std::string kind = j.at("kind");
    if (kind == "ball") {
        require(j.contains("n"), "InvalidConfig", "ball domain needs 'n'");
        return ball(j.at("n").get<int>());
    }
    if (kind == "ellipsoid") {
        require(j.contains("a"), "InvalidConfig", "ellipsoid domain needs weights 'a'");
        return ellipsoid(j.at("a").get<std::vector<double>>());
    }
    if (kind == "polynomial") {
        require(j.contains("n") && j.contains("terms"), "InvalidConfig",
                "polynomial domain needs 'n' and 'terms'");
        std::vector<std::pair<double, std::vector<int>>> terms;
        for (const auto& t : j.at("terms"))
            terms.emplace_back(t.at("coeff").get<double>(), t.at("powers").get<std::vector<int>>());
        return polynomial(j.at("n").get<int>(), terms);
    }
    fail("InvalidConfig", "unknown domain kind '" + kind + "'");
}

namespace {
// dtheta as a bilinear form for theta = -J*drho: returns (A - A^T) with
// A_{ij} = d_i theta_j = -(H_{ai} J^a_j + g_a dJ^a_j/dx^i).
Mat dtheta_matrix(const Domain& domain, const AlmostComplexStructure& J, const Vec& x) {
    const int dim = 2 * domain.n;
    const Mat Jm = J.eval(x);
    const std::vector<Mat> dJ = J.deriv(x);
    const Vec g = domain.grad(x);
    const Mat H = domain.hess(x);
    Mat A(dim, dim);
    for (int i = 0; i < dim; ++i) {
        // dJ[i](a, j) = dJ^a_j / dx^i
        const Vec gJ = dJ[i].transpose() * g;
        for (int j = 0; j < dim; ++j) A(i, j) = -(H.col(i).dot(Jm.col(j)) + gJ(j));
    }
    return Mat(A - A.transpose());
}
}  // namespace

double levi_form(const Domain& domain, const AlmostComplexStructure& J, const Vec& x,
                 const Vec& v, double boundary_tol) {
    require(std::abs(domain.rho(x)) < boundary_tol, "NotOnBoundary",
            "levi_form requires a boundary point");
    const Vec g = domain.grad(x);
    const Mat Jm = J.eval(x);
    const double scale = std::max(1.0, v.norm()) * std::max(1.0, g.norm());
    require(std::abs(g.dot(v)) < 1e-6 * scale && std::abs(g.dot(Jm * v)) < 1e-6 * scale,
            "NotInDistribution", "vector is not complex-tangent at x");
    const Mat D = dtheta_matrix(domain, J, x);
    return v.dot(D * (Jm * v));
}

LeviReport check_strong_pseudoconvexity(const Domain& domain, const AlmostComplexStructure& J,
                                        const std::vector<Vec>& boundary_samples) {
    require(!boundary_samples.empty(), "GridEmpty", "no boundary samples");
    LeviReport report;
    report.min_eigenvalue = std::numeric_limits<double>::infinity();
    report.pass = true;
    for (const Vec& x0 : boundary_samples) {
        const Vec x = domain.boundary_project(x0);
        const int dim = 2 * domain.n;
        const Vec g = domain.grad(x);
        const Mat Jm = J.eval(x);
        Mat rows(2, dim);
        rows.row(0) = g.transpose();
        rows.row(1) = (Jm.transpose() * g).transpose();
        Eigen::JacobiSVD<Mat> svd(rows, Eigen::ComputeFullV);
        const int kdim = dim - 2;
        if (kdim <= 0) continue;  // n = 1: empty complex tangent space
        const Mat V = svd.matrixV().rightCols(kdim);
        const Mat D = dtheta_matrix(domain, J, x);
        const Mat JV = Jm * V;
        Mat Q(kdim, kdim);
        for (int a = 0; a < kdim; ++a)
            for (int b = 0; b < kdim; ++b) Q(a, b) = V.col(a).dot(D * JV.col(b));
        const Mat Qs = 0.5 * (Q + Q.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> eig(Qs);
        const double mn = eig.eigenvalues().minCoeff();
        if (mn < report.min_eigenvalue) {
            report.min_eigenvalue = mn;
            report.worst_point = x;
        }
    }
    report.pass = report.min_eigenvalue > 0.0;
    return report;
}

std::vector<Vec> sample_boundary(const Domain& domain, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vec> out;
    out.reserve(count);
    const int dim = 2 * domain.n;
    // Unbounded domains have rays that never meet the boundary; skip those
    // draws instead of failing, but give up after a fixed budget.
    int budget = 200 * count;
    while (static_cast<int>(out.size()) < count && budget-- > 0) {
        Vec x(dim);
        for (int i = 0; i < dim; ++i) x(i) = gauss(rng);
        if (x.norm() < 1e-8) continue;
        try {
            out.push_back(domain.boundary_project(Vec(0.1 * x / x.norm())));
        } catch (const Error&) {
            continue;
        }
    }
    require(static_cast<int>(out.size()) == count, "GridEmpty",
            "could not place the requested boundary samples");
    return out;
}

std::vector<std::pair<Vec, Vec>> sample_phase_points(const Domain& domain, int count,
                                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<std::pair<Vec, Vec>> out;
    out.reserve(count);
    const int dim = 2 * domain.n;
    for (int k = 0; k < count; ++k) {
        Vec x(dim), p(dim);
        for (int i = 0; i < dim; ++i) x(i) = gauss(rng);
        // Pull interior-ward: points in a ball-shaped neighborhood of D-bar.
        const Vec b = domain.boundary_project(Vec(0.1 * x / std::max(x.norm(), 1e-9)));
        x = std::cbrt(uni(rng)) * b;
        for (int i = 0; i < dim; ++i) p(i) = gauss(rng);
        p /= p.norm();
        out.emplace_back(x, p);
    }
    return out;
}

double deformation_norm(const AlmostComplexStructure& J, const AlmostComplexStructure& J0,
                        const std::vector<std::pair<Vec, Vec>>& samples) {
    require(!samples.empty(), "GridEmpty", "deformation_norm needs a nonempty sample grid");
    double sup = 0.0;
    for (const auto& [x, p] : samples) {
        const Mat D = lift_structure(J, x, p) - lift_structure(J0, x, p);
        const double nrm = D.jacobiSvd().singularValues()(0);
        sup = std::max(sup, nrm);
    }
    return sup;
}

}  // namespace acdisk

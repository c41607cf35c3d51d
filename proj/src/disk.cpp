#include "acdisk/disk.hpp"

#include "acdisk/cotangent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace acdisk {

namespace {

bool power_of_two(int N) { return N > 0 && (N & (N - 1)) == 0; }

}  // namespace

DiskTrace DiskTrace::from_boundary(const CMat& values) {
    DiskTrace t;
    t.comps = static_cast<int>(values.rows());
    t.N = static_cast<int>(values.cols());
    require(t.comps > 0 && power_of_two(t.N), "InvalidConfig",
            "trace needs a power-of-two node count");
    t.boundary = values;
    t.coeffs.resize(t.comps, t.N);
    for (int c = 0; c < t.comps; ++c)
        t.coeffs.row(c) = fourier_coeffs(values.row(c).transpose()).transpose();
    t.holomorphic = t.negative_mass() < 1e-10;
    return t;
}

DiskTrace DiskTrace::from_coeffs(const CMat& coeffs) {
    DiskTrace t;
    t.comps = static_cast<int>(coeffs.rows());
    t.N = static_cast<int>(coeffs.cols());
    require(t.comps > 0 && power_of_two(t.N), "InvalidConfig",
            "trace needs a power-of-two mode count");
    t.coeffs = coeffs;
    t.boundary.resize(t.comps, t.N);
    for (int c = 0; c < t.comps; ++c)
        t.boundary.row(c) = fourier_values(coeffs.row(c).transpose()).transpose();
    t.holomorphic = t.negative_mass() < 1e-10;
    return t;
}

double DiskTrace::negative_mass() const {
    double neg = 0.0, total = 0.0;
    for (int c = 0; c < comps; ++c)
        for (int j = 0; j < N; ++j) {
            const double a = std::norm(coeffs(c, j));
            total += a;
            if (freq_of_index(j, N) < 0) neg += a;
        }
    if (total == 0.0) return 0.0;
    return neg / total;
}

DiskTrace DiskTrace::head(int count) const {
    require(count > 0 && count <= comps, "DimensionMismatch", "component slice out of range");
    DiskTrace t = from_boundary(boundary.topRows(count));
    t.radii = radii;
    t.rings.reserve(rings.size());
    for (const CMat& ring : rings) t.rings.push_back(ring.topRows(count));
    return t;
}

void DiskTrace::to_csv(const std::string& path) const {
    std::ofstream out(path);
    require(out.good(), "IoError", "cannot open " + path + " for writing");
    out << "theta";
    for (int c = 0; c < comps; ++c) out << ",re" << c << ",im" << c;
    out << "\n";
    for (int j = 0; j < N; ++j) {
        out << format_double(2.0 * M_PI * j / N);
        for (int c = 0; c < comps; ++c)
            out << "," << format_double(boundary(c, j).real()) << ","
                << format_double(boundary(c, j).imag());
        out << "\n";
    }
    require(out.good(), "IoError", "write failed for " + path);
}

DiskTrace DiskTrace::from_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "IoError", "cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "IoError", "empty file " + path);
    int fields = 1;
    for (char ch : line) fields += ch == ',';
    require(fields >= 3 && fields % 2 == 1, "IoError", "malformed header in " + path);
    const int comps = (fields - 1) / 2;
    std::vector<std::vector<cplx>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        require(static_cast<int>(vals.size()) == fields, "IoError", "ragged row in " + path);
        std::vector<cplx> row(comps);
        for (int c = 0; c < comps; ++c) row[c] = cplx(vals[1 + 2 * c], vals[2 + 2 * c]);
        rows.push_back(std::move(row));
    }
    const int N = static_cast<int>(rows.size());
    require(power_of_two(N), "IoError", "node count in " + path + " is not a power of two");
    CMat values(comps, N);
    for (int j = 0; j < N; ++j)
        for (int c = 0; c < comps; ++c) values(c, j) = rows[j][c];
    return from_boundary(values);
}

nlohmann::json DiskTrace::interior_to_json() const {
    nlohmann::json j;
    j["comps"] = comps;
    j["N"] = N;
    j["radii"] = nlohmann::json::array();
    for (int m = 0; m < radii.size(); ++m) j["radii"].push_back(radii(m));
    j["rings"] = nlohmann::json::array();
    for (const CMat& ring : rings) {
        nlohmann::json jring = nlohmann::json::array();
        for (int k = 0; k < N; ++k) {
            nlohmann::json node = nlohmann::json::array();
            for (int c = 0; c < comps; ++c) {
                node.push_back(ring(c, k).real());
                node.push_back(ring(c, k).imag());
            }
            jring.push_back(std::move(node));
        }
        j["rings"].push_back(std::move(jring));
    }
    return j;
}

void DiskTrace::interior_from_json(const nlohmann::json& j) {
    require(j.value("comps", -1) == comps && j.value("N", -1) == N, "InvalidConfig",
            "interior data does not match the trace shape");
    const auto& jr = j.at("radii");
    const auto& jrings = j.at("rings");
    require(jr.size() == jrings.size(), "InvalidConfig", "ring count mismatch");
    const int M = static_cast<int>(jr.size());
    radii.resize(M);
    rings.assign(M, CMat(comps, N));
    for (int m = 0; m < M; ++m) {
        radii(m) = jr[m].get<double>();
        const auto& jring = jrings[m];
        require(static_cast<int>(jring.size()) == N, "InvalidConfig", "ring width mismatch");
        for (int k = 0; k < N; ++k) {
            const auto& node = jring[k];
            require(static_cast<int>(node.size()) == 2 * comps, "InvalidConfig",
                    "node width mismatch");
            for (int c = 0; c < comps; ++c)
                rings[m](c, k) = cplx(node[2 * c].get<double>(), node[2 * c + 1].get<double>());
        }
    }
}

CauchyGreen::CauchyGreen(int N, int M) : N_(N), M_(M), grid_(M) {
    require(power_of_two(N) && N >= 4, "InvalidConfig", "node count must be a power of two >= 4");
    require(M >= 2, "InvalidConfig", "need at least two radial rings");
}

// Radial profile psi_m of the source response at theta-frequency m - 1, from
// q at frequency m. The two first-order recurrences below telescope the
// explicit kernels r^{m-1} rho^{1-m} between neighbouring rings so every
// weight stays bounded by one; integrating the kernels globally would blow up
// the quadrature noise by rho^{-|m|} factors.
CauchyGreen::ModeData CauchyGreen::mode_transform(const CVec& q_profile, int m,
                                                  bool want_derivatives) const {
    ModeData d;
    const int parity = std::abs(m) % 2 == 0 ? +1 : -1;
    d.cheb = grid_.cheb_coeffs(q_profile, parity);
    const Vec& r = grid_.r();
    const double s = 1.0 - m;
    d.psi.resize(M_);
    if (m >= 1) {
        // psi(1) = 0; march inward.
        cplx prev = 0.0;
        double rprev = 1.0;
        for (int j = 0; j < M_; ++j) {
            const double rj = r(j);
            const cplx loc = RadialGrid::power_weighted_integral(d.cheb, rj, rprev, s, rj);
            prev = std::pow(rj / rprev, m - 1.0) * prev - 2.0 * loc;
            d.psi(j) = prev;
            rprev = rj;
        }
        d.at_boundary = 0.0;
    } else {
        // regular at 0; march outward.
        const double rin0 = r(M_ - 1);
        d.psi(M_ - 1) = 2.0 * RadialGrid::power_weighted_integral(d.cheb, 0.0, rin0, s, rin0);
        for (int j = M_ - 2; j >= 0; --j) {
            const double rj = r(j);
            const double rin = r(j + 1);
            const cplx loc = RadialGrid::power_weighted_integral(d.cheb, rin, rj, s, rj);
            d.psi(j) = std::pow(rin / rj, s) * d.psi(j + 1) + 2.0 * loc;
        }
        const cplx loc = RadialGrid::power_weighted_integral(d.cheb, r(0), 1.0, s, 1.0);
        d.at_boundary = std::pow(r(0), s) * d.psi(0) + 2.0 * loc;
    }
    if (want_derivatives) {
        // psi' = (m-1) psi / r + 2 q_m, differentiated once more at r = 1.
        const cplx q1 = RadialGrid::cheb_sum_at_1(d.cheb);
        const cplx dq1 = RadialGrid::cheb_deriv_at_1(d.cheb);
        d.dpsi_at_one = (m - 1.0) * d.at_boundary + 2.0 * q1;
        d.ddpsi_at_one = (m - 1.0) * (d.dpsi_at_one - d.at_boundary) + 2.0 * dq1;
    }
    return d;
}

CauchyGreen::Result CauchyGreen::extend(const CMat& trace_coeffs,
                                        const std::vector<CMat>& q_rings, bool want_derivatives,
                                        bool want_rings) const {
    const int comps = static_cast<int>(trace_coeffs.rows());
    require(static_cast<int>(trace_coeffs.cols()) == N_, "DimensionMismatch",
            "trace does not match the grid width");
    const Vec& r = grid_.r();

    Result res;
    res.boundary_T = CMat::Zero(comps, N_);
    res.boundary_T_coeffs = CMat::Zero(comps, N_);
    res.at_zero = CVec::Zero(comps);
    res.dx_at_zero = CVec::Zero(comps);
    res.dx_at_one = CVec::Zero(comps);
    res.dxx_at_one = CVec::Zero(comps);

    // Ring values are accumulated in coefficient space, one synthesis at the
    // end per ring and component.
    std::vector<CMat> ringc;
    if (want_rings) ringc.assign(M_, CMat::Zero(comps, N_));

    for (int c = 0; c < comps; ++c)
        for (int jdx = 0; jdx <= N_ / 2; ++jdx) {
            const cplx a = trace_coeffs(c, jdx);
            if (a == cplx(0.0)) continue;
            const int k = jdx;
            if (want_rings)
                for (int m = 0; m < M_; ++m) ringc[m](c, jdx) += a * std::pow(r(m), k);
            if (k == 0) res.at_zero(c) += a;
            if (k == 1) res.dx_at_zero(c) += a;
            res.dx_at_one(c) += static_cast<double>(k) * a;
            res.dxx_at_one(c) += static_cast<double>(k) * (k - 1.0) * a;
        }

    if (!q_rings.empty()) {
        require(static_cast<int>(q_rings.size()) == M_, "DimensionMismatch",
                "source ring count does not match the grid");
        for (const CMat& ring : q_rings)
            require(ring.rows() == comps && static_cast<int>(ring.cols()) == N_,
                    "DimensionMismatch", "source ring shape mismatch");

        // Per-component mode profiles over the radii.
        for (int c = 0; c < comps; ++c) {
            CMat qhat(M_, N_);
            for (int m = 0; m < M_; ++m)
                qhat.row(m) = fourier_coeffs(q_rings[m].row(c).transpose()).transpose();
            for (int jm = 0; jm < N_; ++jm) {
                const int m = freq_of_index(jm, N_);
                if (qhat.col(jm).cwiseAbs().maxCoeff() < 1e-300) continue;
                const ModeData md = mode_transform(qhat.col(jm), m, want_derivatives);
                const int out_idx = ((m - 1) % N_ + N_) % N_;
                if (want_rings)
                    for (int ridx = 0; ridx < M_; ++ridx) ringc[ridx](c, out_idx) += md.psi(ridx);
                res.boundary_T_coeffs(c, out_idx) += md.at_boundary;
                if (want_derivatives) {
                    res.dx_at_one(c) += md.dpsi_at_one;
                    res.dxx_at_one(c) += md.ddpsi_at_one;
                    if (m == 1)
                        res.at_zero(c) -=
                            2.0 * RadialGrid::power_weighted_integral(md.cheb, 0.0, 1.0, 0.0, 1.0);
                    if (m == 2)
                        res.dx_at_zero(c) -=
                            2.0 * RadialGrid::power_weighted_integral(md.cheb, 0.0, 1.0, -1.0, 1.0);
                    if (m == 0) res.dx_at_zero(c) += RadialGrid::cheb_eval(md.cheb, 0.0);
                } else if (m == 1) {
                    res.at_zero(c) -=
                        2.0 * RadialGrid::power_weighted_integral(md.cheb, 0.0, 1.0, 0.0, 1.0);
                }
            }
        }
        for (int c = 0; c < comps; ++c)
            res.boundary_T.row(c) =
                fourier_values(res.boundary_T_coeffs.row(c).transpose()).transpose();
    }

    if (want_rings) {
        res.rings.assign(M_, CMat(comps, N_));
        for (int m = 0; m < M_; ++m)
            for (int c = 0; c < comps; ++c)
                res.rings[m].row(c) = fourier_values(ringc[m].row(c).transpose()).transpose();
    }
    return res;
}

DiskTrace cauchy_green_extend(const DiskTrace& trace, const std::vector<CMat>& q_rings, int M) {
    CauchyGreen cg(trace.N, M);
    auto res = cg.extend(trace.coeffs, q_rings, false, true);
    DiskTrace out = trace;
    out.rings = std::move(res.rings);
    out.radii = cg.radial().r();
    return out;
}

std::vector<CMat> CauchyGreen::z_derivative(const CMat& trace_coeffs,
                                            const std::vector<CMat>& q_rings) const {
    const int comps = static_cast<int>(trace_coeffs.rows());
    require(static_cast<int>(trace_coeffs.cols()) == N_, "DimensionMismatch",
            "trace does not match the grid width");
    const Vec& r = grid_.r();

    std::vector<CMat> ringc(M_, CMat::Zero(comps, N_));
    for (int c = 0; c < comps; ++c)
        for (int k = 1; k <= N_ / 2; ++k) {
            const cplx a = trace_coeffs(c, k);
            if (a == cplx(0.0)) continue;
            const int out_idx = index_of_freq(k - 1, N_);
            for (int m = 0; m < M_; ++m)
                ringc[m](c, out_idx) += static_cast<double>(k) * a * std::pow(r(m), k - 1);
        }

    if (!q_rings.empty()) {
        require(static_cast<int>(q_rings.size()) == M_, "DimensionMismatch",
                "source ring count does not match the grid");
        for (int c = 0; c < comps; ++c) {
            CMat qhat(M_, N_);
            for (int m = 0; m < M_; ++m)
                qhat.row(m) = fourier_coeffs(q_rings[m].row(c).transpose()).transpose();
            for (int jm = 0; jm < N_; ++jm) {
                const int m = freq_of_index(jm, N_);
                if (qhat.col(jm).cwiseAbs().maxCoeff() < 1e-300) continue;
                const ModeData md = mode_transform(qhat.col(jm), m, false);
                const int out_idx = ((m - 2) % N_ + N_) % N_;
                for (int ridx = 0; ridx < M_; ++ridx)
                    ringc[ridx](c, out_idx) +=
                        (m - 1.0) * md.psi(ridx) / r(ridx) + qhat(ridx, jm);
            }
        }
    }

    std::vector<CMat> out(M_, CMat(comps, N_));
    for (int m = 0; m < M_; ++m)
        for (int c = 0; c < comps; ++c)
            out[m].row(c) = fourier_values(ringc[m].row(c).transpose()).transpose();
    return out;
}

GridDerivatives disk_xy_derivatives(const DiskTrace& trace) {
    require(!trace.rings.empty(), "ResolutionTooLow", "trace has no interior values");
    const int M = trace.M();
    const int N = trace.N;
    require(M >= 8 && N >= 32, "ResolutionTooLow", "need at least 8 rings and 32 nodes");
    require(trace.comps % 2 == 0, "DimensionMismatch", "expected a lifted trace");
    const int half = trace.comps / 2;  // fiber components start here
    const int dim = 2 * trace.comps;
    const Vec& r = trace.radii;
    require(r.size() == M, "DimensionMismatch", "ring radii missing");

    // Real phase-chart field, per ring: dim x N.
    std::vector<Mat> F(M, Mat(dim, N));
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k)
            F[m].col(k) = phase_real(trace.rings[m].col(k));
    Mat Fb(dim, N);
    for (int k = 0; k < N; ++k) Fb.col(k) = phase_real(trace.boundary.col(k));

    // Angular derivative, spectral per ring. The chart maps are R-linear, so
    // differentiating the complex rows and re-encoding is exact.
    std::vector<Mat> Ft(M, Mat(dim, N));
    for (int m = 0; m < M; ++m)
        for (int c = 0; c < trace.comps; ++c) {
            const CVec d = theta_derivative(trace.rings[m].row(c).transpose());
            const bool fib = c >= half;
            const double sc = fib ? 2.0 : 1.0;   // fiber chart carries w = (p0 - i p1)/2
            const double sg = fib ? -1.0 : 1.0;
            for (int k = 0; k < N; ++k) {
                Ft[m](2 * c, k) = sc * d(k).real();
                Ft[m](2 * c + 1, k) = sc * sg * d(k).imag();
            }
        }

    // Radial derivative on the doubled lines through the origin. Line layout
    // (ascending): -1, -r_0 .. -r_{M-1}, r_{M-1} .. r_0, +1.
    const int L = 2 * M + 2;
    Vec line(L);
    line(0) = -1.0;
    for (int t = 0; t < M; ++t) line(1 + t) = -r(t);
    for (int u = 0; u < M; ++u) line(M + 1 + u) = r(M - 1 - u);
    line(L - 1) = 1.0;
    const int W = std::min(9, L);
    std::vector<Vec> wpos(M), wneg(M);
    std::vector<int> spos(M), sneg(M);
    for (int j = 0; j < M; ++j) {
        const int ppos = 2 * M - j;  // index of +r_j in the line
        const int pneg = 1 + j;      // index of -r_j
        spos[j] = std::clamp(ppos - W / 2, 0, L - W);
        sneg[j] = std::clamp(pneg - W / 2, 0, L - W);
        wpos[j] = fornberg_weights(r(j), line.segment(spos[j], W), 1).col(1);
        wneg[j] = fornberg_weights(-r(j), line.segment(sneg[j], W), 1).col(1);
    }

    std::vector<Mat> Fr(M, Mat(dim, N));
    Mat lineF(dim, L);
    for (int k = 0; k < N / 2; ++k) {
        const int kk = k + N / 2;
        lineF.col(0) = Fb.col(kk);
        for (int t = 0; t < M; ++t) lineF.col(1 + t) = F[t].col(kk);
        for (int u = 0; u < M; ++u) lineF.col(M + 1 + u) = F[M - 1 - u].col(k);
        lineF.col(L - 1) = Fb.col(k);
        for (int j = 0; j < M; ++j) {
            Fr[j].col(k) = lineF.middleCols(spos[j], W) * wpos[j];
            // d/ds at -r_j equals -d/dr for the opposite column.
            Fr[j].col(kk) = -(lineF.middleCols(sneg[j], W) * wneg[j]);
        }
    }

    GridDerivatives out;
    out.Fx.assign(M, Mat(dim, N));
    out.Fy.assign(M, Mat(dim, N));
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const double th = 2.0 * M_PI * k / N;
            const double ct = std::cos(th), st = std::sin(th);
            out.Fx[m].col(k) = ct * Fr[m].col(k) - st / r(m) * Ft[m].col(k);
            out.Fy[m].col(k) = st * Fr[m].col(k) + ct / r(m) * Ft[m].col(k);
        }
    return out;
}

std::vector<Mat> dbar_residual(const DiskTrace& trace, const AlmostComplexStructure& J) {
    const int n = J.n;
    require(trace.comps == 2 * n, "DimensionMismatch",
            "residual needs a lifted trace with 2n complex components");
    const GridDerivatives d = disk_xy_derivatives(trace);
    const int M = trace.M();
    const int N = trace.N;
    std::vector<Mat> out(M, Mat(4 * n, N));
    Mat JJ;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < N; ++k) {
            const Vec xp = phase_real(trace.rings[m].col(k));
            JJ = lift_structure(J, xp.head(2 * n), xp.tail(2 * n));
            out[m].col(k) = d.Fy[m].col(k) - JJ * d.Fx[m].col(k);
        }
    return out;
}

double sup_norm(const std::vector<Mat>& field) {
    double s = 0.0;
    for (const Mat& m : field) s = std::max(s, m.cwiseAbs().maxCoeff());
    return s;
}

Vec hilbert_conjugate(const Vec& boundary_values) {
    const int N = static_cast<int>(boundary_values.size());
    require(N >= 4 && N % 2 == 0, "InvalidConfig", "need an even number of nodes");
    CVec c = fourier_coeffs(boundary_values.cast<cplx>());
    for (int j = 0; j < N; ++j) {
        const int k = freq_of_index(j, N);
        if (k == 0 || k == N / 2)
            c(j) = 0.0;
        else
            c(j) *= k > 0 ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
    }
    return fourier_values(c).real();
}

}  // namespace acdisk

#include "acdisk/indices.hpp"

#include "acdisk/disk.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace acdisk {

namespace {

constexpr double kTolFact = 1e-8;
constexpr double kSigmaNull = 1e-7;
constexpr double kSigmaInv = 1e-7;

// Entrywise Fourier data of a loop, FFT mode ordering.
struct LoopSpectrum {
    int N = 0, d = 0;
    std::vector<CMat> hat;
    CMat zero;
    int band = 0;

    const CMat& mode(int q) const {
        if (q < -(N / 2) || q >= N / 2) return zero;
        return hat[index_of_freq(q, N)];
    }
};

LoopSpectrum spectrum_of(const MatrixLoop& loop) {
    const int N = loop.nodes(), d = loop.dim();
    LoopSpectrum sp;
    sp.N = N;
    sp.d = d;
    sp.zero = CMat::Zero(d, d);
    sp.hat.assign(N, CMat::Zero(d, d));
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            CVec v(N);
            for (int j = 0; j < N; ++j) v(j) = loop.values[j](r, c);
            const CVec co = fourier_coeffs(v);
            for (int j = 0; j < N; ++j) sp.hat[j](r, c) = co(j);
        }
    double scale = 0.0;
    for (const CMat& h : sp.hat) scale = std::max(scale, h.cwiseAbs().maxCoeff());
    for (int j = 0; j < N; ++j)
        if (sp.hat[j].cwiseAbs().maxCoeff() > 1e-12 * scale)
            sp.band = std::max(sp.band, std::abs(freq_of_index(j, N)));
    return sp;
}

// Coefficient window for exterior candidates: modes -Wt..0 stacked in blocks
// of d, lowest mode first.
int window_rows(int d, int Wt) { return d * (Wt + 1); }

// phi with modes in [-Wt, 0] such that (A phi) has no modes in [k - Kc, k - 1].
// With Kc covering every mode the product can reach below k, membership is
// exact up to the Fourier tail of the loop.
CMat exterior_solutions(const LoopSpectrum& sp, int k, int Wt, int Kc) {
    const int d = sp.d;
    CMat sys = CMat::Zero(d * Kc, window_rows(d, Wt));
    for (int ti = 0; ti < Kc; ++ti) {
        const int t = k - Kc + ti;
        for (int mi = 0; mi <= Wt; ++mi) {
            const int m = mi - Wt;
            const CMat& Aq = sp.mode(t - m);
            if (Aq.cwiseAbs().maxCoeff() == 0.0) continue;
            sys.block(ti * d, mi * d, d, d) = Aq;
        }
    }
    Eigen::BDCSVD<CMat> svd(sys, Eigen::ComputeThinV);
    const Vec& sig = svd.singularValues();
    const double cut = 1e-6 * sig(0);
    int rank = 0;
    while (rank < sig.size() && sig(rank) > cut) ++rank;
    const int nullity = static_cast<int>(sys.cols()) - rank;
    return svd.matrixV().rightCols(nullity);
}

// Node values of a windowed coefficient vector.
CMat window_values(const CVec& coeffs, int d, int Wt, int N) {
    CMat vals(d, N);
    for (int c = 0; c < d; ++c) {
        CVec full = CVec::Zero(N);
        for (int mi = 0; mi <= Wt; ++mi) full(index_of_freq(mi - Wt, N)) = coeffs(mi * d + c);
        vals.row(c) = fourier_values(full).transpose();
    }
    return vals;
}

CVec window_coeffs(const CMat& vals, int d, int Wt) {
    const int N = static_cast<int>(vals.cols());
    CVec out = CVec::Zero(window_rows(d, Wt));
    for (int c = 0; c < d; ++c) {
        const CVec co = fourier_coeffs(vals.row(c).transpose());
        for (int mi = 0; mi <= Wt; ++mi) out(mi * d + c) = co(index_of_freq(mi - Wt, N));
    }
    return out;
}

// Antilinear involution sigma(phi) = zeta^k conj(A) conj(phi) preserving the
// solution space; its fixed vectors produce the conjugate-symmetric columns.
CVec sigma_map(const LoopSpectrum& sp, const std::vector<CMat>& nodes, const CVec& phi, int k,
               int Wt) {
    const int d = sp.d, N = sp.N;
    const CMat v = window_values(phi, d, Wt, N);
    CMat u(d, N);
    for (int j = 0; j < N; ++j) {
        const cplx zk = std::polar(1.0, 2.0 * M_PI * j * k / N);
        u.col(j) = zk * (nodes[j].conjugate() * v.col(j).conjugate());
    }
    return window_coeffs(u, d, Wt);
}

double winding_of(const std::vector<cplx>& dets, double* defect_out) {
    const int N = static_cast<int>(dets.size());
    double total = 0.0;
    for (int j = 0; j < N; ++j) {
        const cplx cur = dets[j], prev = dets[(j + N - 1) % N];
        require(std::abs(cur) > 0.0, "NotInvertible", "determinant vanishes at a node");
        const double dphi = std::arg(cur / prev);
        require(std::abs(dphi) < M_PI / 2,
                "WindingAmbiguous", "phase jumps by more than pi/2 between nodes");
        total += dphi;
    }
    const double w = total / (2.0 * M_PI);
    if (defect_out) *defect_out = std::abs(w - std::llround(w));
    return w;
}

struct IndexSweep {
    std::vector<int> indices;  // descending
    int total = 0;
};

// Partial indices from the dimension jumps of the exterior solution spaces:
// dim S_k - dim S_{k+1} counts the indices >= k.
IndexSweep sweep_indices(const LoopSpectrum& sp, int wind, int N) {
    (void)N;  // modes beyond the sampled band read as zero
    const int d = sp.d;
    for (int Kmax = std::abs(wind) + d + 2;; Kmax *= 2) {
        if (Kmax > 256) fail("FactorizationFailed", "partial indices out of search range");
        const int Wt = std::max({16, 2 * Kmax + 8, 2 * sp.band + 8});
        const int Kc = Wt + sp.band + Kmax + 4;
        const int klo = -Kmax, khi = Kmax;
        std::vector<int> dims(khi - klo + 2);
        for (int k = klo; k <= khi + 1; ++k)
            dims[k - klo] = static_cast<int>(exterior_solutions(sp, k, Wt, Kc).cols());
        if (dims[khi + 1 - klo] != 0) continue;  // some index beyond the bound
        std::vector<int> jump(khi - klo + 1);
        for (int k = klo; k <= khi; ++k) jump[k - klo] = dims[k - klo] - dims[k + 1 - klo];
        if (jump[0] != d) continue;  // not saturated, widen
        bool monotone = true;
        for (int k = klo; k < khi; ++k)
            if (jump[k - klo] < jump[k + 1 - klo]) monotone = false;
        if (!monotone) fail("FactorizationFailed", "inconsistent solution space dimensions");
        IndexSweep out;
        for (int c = khi; c >= klo; --c) {
            const int upper = (c == khi) ? 0 : jump[c + 1 - klo];
            for (int rep = 0; rep < jump[c - klo] - upper; ++rep) out.indices.push_back(c);
        }
        for (int k : out.indices) out.total += k;
        if (out.total != wind)
            fail("FactorizationFailed", "index sum " + std::to_string(out.total) +
                                            " disagrees with winding " + std::to_string(wind));
        return out;
    }
}

}  // namespace

MatrixLoop MatrixLoop::from_function(int N, int d, const std::function<CMat(cplx)>& fn) {
    require(N >= 16 && d >= 1, "InvalidConfig", "loop needs at least 16 nodes");
    MatrixLoop loop;
    loop.values.reserve(N);
    for (int j = 0; j < N; ++j) {
        CMat v = fn(std::polar(1.0, 2.0 * M_PI * j / N));
        require(v.rows() == d && v.cols() == d, "DimensionMismatch", "loop values must be d x d");
        loop.values.push_back(std::move(v));
    }
    return loop;
}

MatrixLoop MatrixLoop::from_linearized_boundary(const LinearizedData& lin) {
    require(!lin.G.empty(), "InvalidConfig", "linearized data has no boundary rows");
    MatrixLoop loop;
    loop.values = lin.G;
    return loop;
}

double MatrixLoop::min_abs_det() const {
    double worst = std::numeric_limits<double>::max();
    for (const CMat& v : values) worst = std::min(worst, std::abs(v.determinant()));
    return values.empty() ? 0.0 : worst;
}

double MatrixLoop::fourier_tail(int band) const {
    const LoopSpectrum sp = spectrum_of(*this);
    double in = 0.0, out = 0.0;
    for (int j = 0; j < sp.N; ++j) {
        const double m = sp.hat[j].squaredNorm();
        (std::abs(freq_of_index(j, sp.N)) <= band ? in : out) += m;
    }
    return in + out == 0.0 ? 0.0 : std::sqrt(out / (in + out));
}

int winding_number(const MatrixLoop& loop) {
    require(loop.nodes() > 0, "InvalidConfig", "empty loop");
    std::vector<cplx> dets(loop.nodes());
    for (int j = 0; j < loop.nodes(); ++j) dets[j] = loop.values[j].determinant();
    double defect = 0.0;
    const double w = winding_of(dets, &defect);
    require(defect < 1e-6, "WindingAmbiguous",
            "winding rounding defect " + std::to_string(defect));
    return static_cast<int>(std::llround(w));
}

FactorizationResult birkhoff_factorize(const MatrixLoop& loop) {
    const int N = loop.nodes(), d = loop.dim();
    require(N >= 16 && N % 2 == 0, "InvalidConfig", "loop needs an even node count >= 16");
    require(loop.min_abs_det() > 1e-12, "NotInvertible", "loop is singular at a node");

    const LoopSpectrum sp = spectrum_of(loop);
    const int wind = winding_number(loop);
    const IndexSweep sweep = sweep_indices(sp, wind, N);

    FactorizationResult out;
    out.indices = sweep.indices;
    out.total = sweep.total;

    // Conjugate-symmetric factors need A conj(A) = I; without it the
    // Globevnik form does not exist and the indices are the whole story.
    double invol = 0.0;
    for (int j = 0; j < N; ++j)
        invol = std::max(invol, (loop.values[j] * loop.values[j].conjugate() - CMat::Identity(d, d))
                                    .cwiseAbs()
                                    .maxCoeff());
    if (invol > 1e-8) return out;

    const int khi = out.indices.front(), klo = out.indices.back();
    const int Wt =
        std::max({16, 2 * (std::abs(khi) + std::abs(klo)) + 8, 2 * sp.band + 8}) + (khi - klo);
    const int Kc = Wt + sp.band + std::abs(klo) + std::abs(khi) + 4;
    // value synthesis happens on the N-node grid, keep the window clear of it
    require(Wt + sp.band + std::abs(khi) + 4 < N, "FactorizationFailed",
            "node count too small for the factor window");

    std::vector<CVec> chosen;  // windowed coefficients per column
    for (int s = 0; s < d; ++s) {
        const int k = out.indices[s];
        const CMat Sk = exterior_solutions(sp, k, Wt, Kc);
        // span of zeta^{-j} phi_r for earlier columns: already inside S_k
        int wcols = 0;
        for (int r = 0; r < s; ++r) wcols += out.indices[r] - k + 1;
        CMat W(window_rows(d, Wt), std::max(wcols, 1));
        W.setZero();
        int at = 0;
        for (int r = 0; r < s; ++r)
            for (int jshift = 0; jshift <= out.indices[r] - k; ++jshift, ++at)
                for (int mi = 0; mi + jshift <= Wt; ++mi)
                    W.block(mi * d, at, d, 1) = chosen[r].segment((mi + jshift) * d, d);
        CMat Qw;
        if (wcols > 0) Qw = Eigen::HouseholderQR<CMat>(W).householderQ() * CMat::Identity(W.rows(), wcols);
        auto deflate = [&](const CVec& v) -> CVec {
            if (wcols == 0) return v;
            return v - Qw * (Qw.adjoint() * v);
        };
        CMat cand = Sk;
        for (int c = 0; c < cand.cols(); ++c) cand.col(c) = deflate(cand.col(c));
        Eigen::BDCSVD<CMat> csvd(cand, Eigen::ComputeThinU);
        CVec pick;
        bool found = false;
        for (int c = 0; c < csvd.singularValues().size() && !found; ++c) {
            if (csvd.singularValues()(c) < 1e-6) break;
            const CVec psi = csvd.matrixU().col(c);
            const CVec spsi = sigma_map(sp, loop.values, psi, k, Wt);
            for (const CVec& f : {CVec(psi + spsi), CVec(cplx(0.0, 1.0) * (psi - spsi))}) {
                if (f.norm() < 1e-6) continue;
                const CVec df = deflate(f);
                if (df.norm() < 1e-6 * f.norm()) continue;
                pick = f / f.norm();
                found = true;
                break;
            }
        }
        require(found, "FactorizationFailed", "no symmetric canonical column at index " +
                                                  std::to_string(k));
        chosen.push_back(pick);
    }

    out.theta.assign(N, CMat(d, d));
    out.lambda.assign(N, CMat::Zero(d, d));
    for (int j = 0; j < N; ++j)
        for (int s = 0; s < d; ++s)
            out.lambda[j](s, s) = std::polar(1.0, 2.0 * M_PI * j * out.indices[s] / N);
    for (int s = 0; s < d; ++s) {
        const CMat v = window_values(chosen[s], d, Wt, N);
        double colmax = 0.0;
        CMat col(d, N);
        for (int j = 0; j < N; ++j) {
            const cplx zk = std::polar(1.0, -2.0 * M_PI * j * out.indices[s] / N);
            col.col(j) = zk * (loop.values[j] * v.col(j));
            colmax = std::max(colmax, col.col(j).cwiseAbs().maxCoeff());
        }
        for (int j = 0; j < N; ++j) out.theta[j].col(s) = col.col(j) / colmax;
    }

    out.defect = 0.0;
    double theta_det = std::numeric_limits<double>::max();
    for (int j = 0; j < N; ++j) {
        theta_det = std::min(theta_det, std::abs(out.theta[j].determinant()));
        require(std::abs(out.theta[j].determinant()) > 1e-12, "FactorizationFailed",
                "holomorphic factor is singular on the boundary");
        const CMat recon = out.theta[j] * out.lambda[j] * out.theta[j].conjugate().inverse();
        out.defect = std::max(out.defect, (loop.values[j] - recon).cwiseAbs().maxCoeff());
    }
    require(out.defect < kTolFact, "FactorizationFailed",
            "factorization defect " + std::to_string(out.defect));

    // The factor must stay invertible inside, not only at the boundary nodes.
    std::vector<CVec> tco(d * d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            CVec nodevals(N);
            for (int j = 0; j < N; ++j) nodevals(j) = out.theta[j](r, c);
            tco[r * d + c] = fourier_coeffs(nodevals);
        }
    for (double rad : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95}) {
        for (int j = 0; j < N; j += 4) {
            CMat t(d, d);
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) {
                    cplx acc = 0.0;
                    for (int m = 0; m <= N / 2 - 1; ++m)
                        acc += tco[r * d + c](index_of_freq(m, N)) * std::pow(rad, m) *
                               std::polar(1.0, 2.0 * M_PI * j * m / N);
                    t(r, c) = acc;
                }
            require(std::abs(t.determinant()) > 1e-10, "FactorizationFailed",
                    "holomorphic factor degenerates inside the disk");
        }
    }
    return out;
}

FactorizationResult partial_indices_of_boundary(const MatrixLoop& G) {
    require(G.min_abs_det() > 1e-12, "NotInvertible", "boundary coupling is singular at a node");
    MatrixLoop A;
    A.values.reserve(G.nodes());
    for (const CMat& g : G.values) A.values.push_back(g.inverse() * g.conjugate());
    return birkhoff_factorize(A);
}

int fredholm_index(const MatrixLoop& G) {
    return G.dim() - 2 * winding_number(G);
}

namespace {

KernelReport kernel_report_from(const Mat& op, const MatrixLoop& G) {
    Eigen::BDCSVD<Mat> svd(op, Eigen::ComputeThinV);
    const Vec& sig = svd.singularValues();
    int rank = 0;
    while (rank < sig.size() && sig(rank) > kSigmaNull * sig(0)) ++rank;
    KernelReport rep;
    rep.numeric = static_cast<int>(op.cols()) - rank;
    rep.basis = svd.matrixV().rightCols(rep.numeric);
    const auto fact = partial_indices_of_boundary(G);
    rep.closed_form = 0;
    rep.surjective = true;
    for (int k : fact.indices) {
        if (k >= 0) rep.closed_form += k + 1;
        if (k < -1) rep.surjective = false;
    }
    rep.agree = rep.numeric == rep.closed_form;
    return rep;
}

}  // namespace

KernelReport kernel_dimension(const MatrixLoop& G) {
    const int N = G.nodes(), d = G.dim();
    require(N >= 16, "InvalidConfig", "loop needs at least 16 nodes");
    const int Kb = N / 4;
    const int cols = 2 * d * (Kb + 1) + 1;
    Mat op = Mat::Zero(d * N + 1, cols);
    int col = 0;
    for (int c = 0; c < d; ++c)
        for (int m = 0; m <= Kb; ++m)
            for (int part = 0; part < 2; ++part, ++col)
                for (int j = 0; j < N; ++j) {
                    const cplx zm = std::polar(1.0, 2.0 * M_PI * j * m / N) *
                                    (part ? cplx(0.0, 1.0) : cplx(1.0, 0.0));
                    op.block(j * d, col, d, 1) = 2.0 * (G.values[j].col(c) * zm).real();
                }
    op(d * N, cols - 1) = 1.0;  // tau slot
    return kernel_report_from(op, G);
}

KernelReport kernel_dimension(const LinearizedData& lin) {
    const int N = lin.N, d = 2 * lin.n, M = lin.M;
    require(N >= 16 && M >= 2, "InvalidConfig", "linearized data grid too small");
    MatrixLoop G = MatrixLoop::from_linearized_boundary(lin);
    double abmax = 0.0;
    for (const auto& ring : lin.A)
        for (const CMat& a : ring) abmax = std::max(abmax, a.cwiseAbs().maxCoeff());
    for (const auto& ring : lin.B)
        for (const CMat& b : ring) abmax = std::max(abmax, b.cwiseAbs().maxCoeff());

    const CauchyGreen cg(N, M);
    const int Kb = N / 4;
    const int cols = 2 * d * (Kb + 1) + 1;
    Mat op = Mat::Zero(d * N + 1, cols);
    int col = 0;
    for (int c = 0; c < d; ++c)
        for (int m = 0; m <= Kb; ++m)
            for (int part = 0; part < 2; ++part, ++col) {
                CMat a = CMat::Zero(d, N);
                a(c, index_of_freq(m, N)) = part ? cplx(0.0, 1.0) : cplx(1.0, 0.0);
                CMat hbd(d, N);
                for (int r = 0; r < d; ++r) hbd.row(r) = fourier_values(a.row(r).transpose());
                std::vector<CMat> q;
                // source slaved to the trace: dbar rows hold identically
                for (int sweep = 0; sweep < 40 && abmax > 0.0; ++sweep) {
                    const auto res = cg.extend(a, q, false, true);
                    std::vector<CMat> qn(M, CMat(d, N));
                    for (int r = 0; r < M; ++r)
                        for (int j = 0; j < N; ++j)
                            qn[r].col(j) = -(lin.A[r][j] * res.rings[r].col(j) +
                                             lin.B[r][j] * res.rings[r].col(j).conjugate());
                    double delta = 0.0;
                    for (int r = 0; r < M; ++r)
                        delta = std::max(delta, q.empty() ? qn[r].cwiseAbs().maxCoeff()
                                                          : (qn[r] - q[r]).cwiseAbs().maxCoeff());
                    q = std::move(qn);
                    if (delta < 1e-13) break;
                }
                if (!q.empty()) {
                    const auto res = cg.extend(a, q, false, false);
                    for (int r = 0; r < d; ++r)
                        hbd.row(r) += fourier_values(res.boundary_T_coeffs.row(r).transpose());
                }
                for (int j = 0; j < N; ++j)
                    op.block(j * d, col, d, 1) = 2.0 * (lin.G[j] * hbd.col(j)).real();
            }
    op(d * N, cols - 1) = 1.0;
    return kernel_report_from(op, G);
}

GoodBoundaryReport good_boundary_test(const StationarySolution& sol, const Domain& domain,
                                      const AlmostComplexStructure& J) {
    const Mat jac = solver_jacobian(domain, J, sol);
    Eigen::BDCSVD<Mat> svd(jac);
    const Vec& sig = svd.singularValues();
    GoodBoundaryReport rep;
    rep.min_singular = sig(sig.size() - 1) / sig(0);
    rep.invertible = rep.min_singular > kSigmaInv;
    return rep;
}

}  // namespace acdisk

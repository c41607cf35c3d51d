#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace acdisk {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Every failure mode carries a stable machine-readable code next to the
// human-readable message; the CLI maps codes onto exit statuses.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool ok, const std::string& code, const std::string& message) {
    if (!ok) fail(code, message);
}

// Chart conventions, fixed once for the whole library.
//
// Base points x in R^{2n} carry complex coordinates z_j = x_{2j} + i x_{2j+1}.
// Covectors p in R^{2n} carry the coefficient w_j = (p_{2j} - i p_{2j+1}) / 2,
// so that a real 1-form acts on a real vector V (complex components Vc) as
// alpha(V) = sum_k p_k V_k = 2 Re( sum_j w_j Vc_j ).
inline CVec base_complex(const Vec& x) {
    const int n = static_cast<int>(x.size()) / 2;
    CVec z(n);
    for (int j = 0; j < n; ++j) z(j) = cplx(x(2 * j), x(2 * j + 1));
    return z;
}

inline Vec base_real(const CVec& z) {
    Vec x(2 * z.size());
    for (int j = 0; j < z.size(); ++j) {
        x(2 * j) = z(j).real();
        x(2 * j + 1) = z(j).imag();
    }
    return x;
}

inline CVec fiber_complex(const Vec& p) {
    const int n = static_cast<int>(p.size()) / 2;
    CVec w(n);
    for (int j = 0; j < n; ++j) w(j) = 0.5 * cplx(p(2 * j), -p(2 * j + 1));
    return w;
}

inline Vec fiber_real(const CVec& w) {
    Vec p(2 * w.size());
    for (int j = 0; j < w.size(); ++j) {
        p(2 * j) = 2.0 * w(j).real();
        p(2 * j + 1) = -2.0 * w(j).imag();
    }
    return p;
}

// Real pairing <alpha, V> written through the complex components.
inline double pair_covector(const CVec& w, const CVec& vc) {
    cplx s = 0.0;
    for (int j = 0; j < w.size(); ++j) s += w(j) * vc(j);
    return 2.0 * s.real();
}

// A lifted point of T*M stored as one complex 2n-vector: base part in the
// z-chart followed by fiber part in the w-chart.
inline Vec phase_real(const CVec& u) {
    const int n = static_cast<int>(u.size()) / 2;
    Vec out(4 * n);
    out.head(2 * n) = base_real(u.head(n));
    out.tail(2 * n) = fiber_real(u.tail(n));
    return out;
}

inline CVec phase_complex(const Vec& xp) {
    const int n = static_cast<int>(xp.size()) / 4;
    CVec u(2 * n);
    u.head(n) = base_complex(xp.head(2 * n));
    u.tail(n) = fiber_complex(xp.tail(2 * n));
    return u;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Fixed 17-significant-digit formatting: reruns must serialize byte-identically.
std::string format_double(double v);

}  // namespace acdisk

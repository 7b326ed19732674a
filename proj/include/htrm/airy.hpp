#ifndef HTRM_AIRY_HPP
#define HTRM_AIRY_HPP

#include <cmath>
#include <numbers>

namespace htrm {

struct AiryValue {
    double ai;
    double aip; ///< Ai'(x)
};

namespace detail {

// Ai(0) = 1/(3^(2/3) Gamma(2/3)), -Ai'(0) = 1/(3^(1/3) Gamma(1/3)).
inline constexpr long double airy_c1 = 0.355028053887817239260063186004183176L;
inline constexpr long double airy_c2 = 0.258819403792806798405183560189203963L;

// Maclaurin series Ai = c1 f - c2 g, in extended precision. The positive
// axis cancels badly (f and g grow like exp(2/3 x^1.5)), which bounds the
// range where this branch is used.
inline AiryValue airy_maclaurin(double xd) {
    const long double x = xd;
    const long double x3 = x * x * x;
    long double f = 1.0L, fp = 0.0L;
    long double g = x, gp = 1.0L;
    long double a = 1.0L; // coefficient of x^(3k) in f
    long double b = 1.0L; // coefficient of x^(3k+1) in g
    long double pw = 1.0L; // x^(3k)
    for (int k = 0; k < 200; ++k) {
        const long double k3 = 3.0L * k;
        a /= (k3 + 2.0L) * (k3 + 3.0L);
        b /= (k3 + 3.0L) * (k3 + 4.0L);
        const long double tf = a * pw * x3;
        const long double tg = b * pw * x3 * x;
        const long double tfp = (k3 + 3.0L) * a * pw * x * x;
        const long double tgp = (k3 + 4.0L) * b * pw * x3;
        pw *= x3;
        f += tf;
        g += tg;
        fp += tfp;
        gp += tgp;
        const long double scale = std::fabs(f) + std::fabs(g) + std::fabs(fp) + std::fabs(gp);
        if (std::fabs(tf) + std::fabs(tg) + std::fabs(tfp) + std::fabs(tgp) < 1e-21L * scale) {
            break;
        }
    }
    return {static_cast<double>(airy_c1 * f - airy_c2 * g),
            static_cast<double>(airy_c1 * fp - airy_c2 * gp)};
}

// Asymptotic expansions in zeta = 2/3 |x|^1.5, truncated at the smallest term.
inline AiryValue airy_asymptotic(double x) {
    const double y = std::abs(x);
    const double zeta = 2.0 / 3.0 * y * std::sqrt(y);
    const double sqrt_pi = std::sqrt(std::numbers::pi);
    constexpr int max_terms = 60;
    double u[max_terms], v[max_terms];
    u[0] = 1.0;
    v[0] = 1.0;
    for (int k = 1; k < max_terms; ++k) {
        u[k] = u[k - 1] * (6.0 * k - 5.0) * (6.0 * k - 3.0) * (6.0 * k - 1.0) /
               ((2.0 * k - 1.0) * 216.0 * k);
        v[k] = -(6.0 * k + 1.0) / (6.0 * k - 1.0) * u[k];
    }
    if (x > 0.0) {
        double su = 0.0, sv = 0.0, zk = 1.0, last = INFINITY;
        for (int k = 0; k < max_terms; ++k) {
            const double tu = u[k] * zk;
            if (std::abs(tu) > last) {
                break;
            }
            last = std::abs(tu);
            const double sign = (k % 2 == 0) ? 1.0 : -1.0;
            su += sign * tu;
            sv += sign * v[k] * zk;
            zk /= zeta;
            if (last < 1e-17 * std::abs(su)) {
                break;
            }
        }
        const double e = std::exp(-zeta) / (2.0 * sqrt_pi);
        const double q = std::sqrt(std::sqrt(y));
        return {e / q * su, -e * q * sv};
    }
    // Oscillatory side: even and odd parts of the same series.
    double ue = 0.0, uo = 0.0, ve = 0.0, vo = 0.0, zk = 1.0, last = INFINITY;
    for (int k = 0; k < max_terms; ++k) {
        const double tu = u[k] * zk;
        if (std::abs(tu) > last) {
            break;
        }
        last = std::abs(tu);
        const double sign = (k / 2) % 2 == 0 ? 1.0 : -1.0;
        if (k % 2 == 0) {
            ue += sign * tu;
            ve += sign * v[k] * zk;
        } else {
            uo += sign * tu;
            vo += sign * v[k] * zk;
        }
        zk /= zeta;
        if (last < 1e-17) {
            break;
        }
    }
    const double phase = zeta - std::numbers::pi / 4.0;
    const double c = std::cos(phase), s = std::sin(phase);
    const double q = std::sqrt(std::sqrt(y));
    return {(c * ue + s * uo) / (sqrt_pi * q), q * (s * ve - c * vo) / sqrt_pi};
}

} // namespace detail

/// Ai(x) and Ai'(x). Maclaurin series on [-8, 6.5], asymptotic expansions
/// outside; relative accuracy is about 1e-9 or better everywhere.
inline AiryValue airy(double x) {
    if (x >= -8.0 && x <= 6.5) {
        return detail::airy_maclaurin(x);
    }
    return detail::airy_asymptotic(x);
}

} // namespace htrm

#endif

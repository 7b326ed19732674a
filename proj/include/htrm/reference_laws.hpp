#ifndef HTRM_REFERENCE_LAWS_HPP
#define HTRM_REFERENCE_LAWS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <ostream>
#include <vector>

#include "htrm/airy.hpp"
#include "htrm/errors.hpp"
#include "htrm/matrix.hpp"
#include "htrm/quadrature.hpp"

namespace htrm {

/// Semicircle law with density (1/(pi sigma2)) sqrt(2 sigma2 - t^2) on
/// |t| <= sqrt(2 sigma2). A Wigner matrix with off-diagonal variance v,
/// divided by sqrt(n), has this limit with sigma2 = 2v.
inline double semicircle_cdf(double x, double sigma2) {
    require(sigma2 > 0.0, "semicircle: sigma2 must be positive");
    const double r = std::sqrt(2.0 * sigma2);
    if (x <= -r) {
        return 0.0;
    }
    if (x >= r) {
        return 1.0;
    }
    const double u = x / r;
    return 0.5 + (u * std::sqrt(1.0 - u * u) + std::asin(u)) / std::numbers::pi;
}

inline double semicircle_density(double x, double sigma2) {
    const double r2 = 2.0 * sigma2;
    return x * x >= r2 ? 0.0 : std::sqrt(r2 - x * x) / (std::numbers::pi * sigma2);
}

struct EsdParams {
    double sigma2 = 1.0;
    double gamma = 1.0; ///< m / n >= 1

    void validate() const {
        require(sigma2 > 0.0, "sigma2 must be positive");
        require(gamma >= 1.0, "gamma must be at least 1");
    }
};

/// Marchenko-Pastur law of A^t A / m for an m x n matrix with entry
/// variance sigma2 and gamma = m/n.
///
/// The CDF is tabulated once in the angle theta of t = a + w(1 - cos theta),
/// which turns the square-root edges (and the t^(-1/2) edge at gamma = 1)
/// into a smooth integrand; lookups interpolate linearly in theta.
class MarchenkoPastur {
public:
    static constexpr std::size_t grid_size = 4096;

    explicit MarchenkoPastur(EsdParams p) : p_(p) {
        p_.validate();
        const double r = 1.0 / std::sqrt(p_.gamma);
        a_ = p_.sigma2 * (1.0 - r) * (1.0 - r);
        b_ = p_.sigma2 * (1.0 + r) * (1.0 + r);
        w_ = 0.5 * (b_ - a_);
        cumulative_.assign(grid_size + 1, 0.0);
        const double dtheta = std::numbers::pi / grid_size;
        auto f = [this](double th) { return theta_integrand(th); };
        for (std::size_t i = 0; i < grid_size; ++i) {
            auto r = quad::integrate(f, i * dtheta, (i + 1) * dtheta, 1e-15, 1e-13);
            cumulative_[i + 1] = cumulative_[i] + r.value;
        }
        total_ = cumulative_.back();
    }

    double lower() const { return a_; }
    double upper() const { return b_; }
    /// Integral of the density over the support, before any renormalisation.
    double total_mass() const { return total_; }

    /// gamma sqrt((b-t)(t-a)) / (2 pi t sigma2) on [a, b].
    double density(double t) const {
        if (t <= a_ || t >= b_) {
            return 0.0;
        }
        return p_.gamma * std::sqrt((b_ - t) * (t - a_)) / (2.0 * std::numbers::pi * t * p_.sigma2);
    }

    double cdf(double x) const {
        if (x <= a_) {
            return 0.0;
        }
        if (x >= b_) {
            return 1.0;
        }
        const double c = std::clamp(1.0 - (x - a_) / w_, -1.0, 1.0);
        const double pos = std::acos(c) / std::numbers::pi * grid_size;
        const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), grid_size - 1);
        const double frac = pos - static_cast<double>(i);
        return cumulative_[i] + frac * (cumulative_[i + 1] - cumulative_[i]);
    }

private:
    // g(t) dt with t = a + w(1 - cos th), sqrt((b-t)(t-a)) = w sin th.
    double theta_integrand(double th) const {
        const double s = std::sin(th);
        const double half = std::sin(0.5 * th);
        const double one_minus_cos = 2.0 * half * half;
        const double coef = p_.gamma / (2.0 * std::numbers::pi * p_.sigma2);
        if (a_ == 0.0) {
            // sin^2 / (1 - cos) = 1 + cos, finite at th = 0.
            return coef * w_ * (1.0 + std::cos(th));
        }
        return coef * w_ * w_ * s * s / (a_ + w_ * one_minus_cos);
    }

    EsdParams p_;
    double a_ = 0, b_ = 0, w_ = 0;
    double total_ = 0;
    std::vector<double> cumulative_;
};

inline double marchenko_pastur_cdf(double x, const EsdParams& p) {
    return MarchenkoPastur(p).cdf(x);
}

/// Hastings-McLeod solution of q'' = x q + 2 q^3 and the Tracy-Widom CDFs
/// on a uniform grid s_min = s[0] < ... < s[N] = s_max.
struct TWTable {
    double s_min = 0, s_max = 0, step = 0;
    int retries = 0; ///< step halvings needed to reach s_min
    std::vector<double> s, q, qp;
    std::vector<double> F1, F2;

    bool has(int beta) const { return beta == 1 ? !F1.empty() : !F2.empty(); }

    /// Linear interpolation on the grid; 0 left of s_min's value, 1 right of s_max.
    double cdf(double x, int beta) const {
        const auto& f = beta == 1 ? F1 : F2;
        require(!f.empty(), "TWTable: CDF for this beta was not computed");
        if (x <= s_min) {
            return x < s_min ? 0.0 : f.front();
        }
        if (x >= s_max) {
            return 1.0;
        }
        const double pos = (x - s_min) / step;
        const auto i = std::min(static_cast<std::size_t>(pos), s.size() - 2);
        const double frac = pos - static_cast<double>(i);
        return f[i] + frac * (f[i + 1] - f[i]);
    }

    void write_csv(std::ostream& os) const {
        os << "# Painleve II, Hastings-McLeod, backward RK4 from s_max\n";
        os << "# s_min=" << format_double(s_min) << " s_max=" << format_double(s_max)
           << " step=" << format_double(step) << " retries=" << retries << "\n";
        os << "# integrals: composite Simpson on the grid plus Airy tails beyond s_max\n";
        os << "s,q,F1,F2\n";
        for (std::size_t i = 0; i < s.size(); ++i) {
            os << format_double(s[i]) << ',' << format_double(q[i]) << ','
               << (F1.empty() ? std::string() : format_double(F1[i])) << ','
               << (F2.empty() ? std::string() : format_double(F2[i])) << '\n';
        }
    }
};

namespace detail {

inline bool painleve2_march(TWTable& t, std::size_t steps) {
    const double h = (t.s_max - t.s_min) / static_cast<double>(steps);
    t.step = h;
    t.s.assign(steps + 1, 0.0);
    t.q.assign(steps + 1, 0.0);
    t.qp.assign(steps + 1, 0.0);
    for (std::size_t i = 0; i <= steps; ++i) {
        t.s[i] = i == steps ? t.s_max : t.s_min + static_cast<double>(i) * h;
    }
    const AiryValue start = airy(t.s_max);
    double y = start.ai;
    double p = start.aip;
    t.q[steps] = y;
    t.qp[steps] = p;
    auto acc = [](double x, double q) { return x * q + 2.0 * q * q * q; };
    for (std::size_t i = steps; i > 0; --i) {
        const double x = t.s[i];
        const double dh = -h;
        const double k1y = p, k1p = acc(x, y);
        const double k2y = p + 0.5 * dh * k1p, k2p = acc(x + 0.5 * dh, y + 0.5 * dh * k1y);
        const double k3y = p + 0.5 * dh * k2p, k3p = acc(x + 0.5 * dh, y + 0.5 * dh * k2y);
        const double k4y = p + dh * k3p, k4p = acc(x + dh, y + dh * k3y);
        y += dh / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        p += dh / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        if (!std::isfinite(y) || std::abs(y) > 1e6) {
            return false;
        }
        t.q[i - 1] = y;
        t.qp[i - 1] = p;
    }
    return true;
}

// R[i] = integral of f over [s_i, s_N] on a uniform grid: Simpson where the
// number of panels is even, one 3/8 panel in front otherwise.
inline std::vector<double> right_cumulative(const std::vector<double>& f, double h) {
    const std::size_t n = f.size() - 1;
    std::vector<double> r(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        const std::size_t panels = n - i;
        if (panels % 2 == 0) {
            r[i] = r[i + 2] + h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
        } else if (panels == 1) {
            r[i] = 0.5 * h * (f[i] + f[i + 1]);
        } else {
            r[i] = r[i + 3] + 3.0 * h / 8.0 * (f[i] + 3.0 * f[i + 1] + 3.0 * f[i + 2] + f[i + 3]);
        }
    }
    return r;
}

} // namespace detail

/// Integrates Painleve II backwards from s_max with (q, q') = (Ai, Ai')(s_max)
/// by fixed-step RK4. If q blows up before s_min the step is halved, at most
/// three times.
inline TWTable painleve2_solve(double s_min = -8.0, double s_max = 8.0, double h = 0.005) {
    require(s_max >= 6.0, "painleve2_solve: s_max must be at least 6");
    require(s_min <= -8.0, "painleve2_solve: s_min must be at most -8");
    require(h > 0.0 && h <= 0.01, "painleve2_solve: step must lie in (0, 0.01]");
    const double span = s_max - s_min;
    auto steps = static_cast<std::size_t>(std::llround(span / h));
    require(std::abs(static_cast<double>(steps) * h - span) <= 1e-9 * span,
            "painleve2_solve: (s_max - s_min) must be a multiple of the step");
    TWTable t;
    t.s_min = s_min;
    t.s_max = s_max;
    for (int attempt = 0; attempt <= 3; ++attempt) {
        t.retries = attempt;
        if (detail::painleve2_march(t, steps)) {
            return t;
        }
        steps *= 2;
    }
    throw NumericalError("painleve2_solve: q overflowed before s_min after 3 step halvings");
}

/// Fills F2 (beta = 2) or F1 (beta = 1):
///   F2(s) = exp(-int_s^inf (x - s) q^2),
///   F1(s) = exp(-1/2 int_s^inf q + (x - s) q^2).
/// The pieces beyond s_max use q ~ Ai there.
inline TWTable tw_cdf(TWTable table, int beta) {
    require(beta == 1 || beta == 2, "tw_cdf: beta must be 1 or 2");
    require(table.s.size() >= 4, "tw_cdf: table has too few grid points");
    const std::size_t n = table.s.size();
    std::vector<double> q2(n), xq2(n);
    for (std::size_t i = 0; i < n; ++i) {
        q2[i] = table.q[i] * table.q[i];
        xq2[i] = table.s[i] * q2[i];
    }
    const double big_s = table.s_max;
    const AiryValue ai = airy(big_s);
    const double tail_q2 = ai.aip * ai.aip - big_s * ai.ai * ai.ai;
    const double tail_xq2 =
        -(big_s * big_s * ai.ai * ai.ai - big_s * ai.aip * ai.aip + ai.ai * ai.aip) / 3.0;
    const auto a = detail::right_cumulative(q2, table.step);
    const auto b = detail::right_cumulative(xq2, table.step);
    std::vector<double> f(n);
    if (beta == 2) {
        for (std::size_t i = 0; i < n; ++i) {
            const double sv = table.s[i];
            const double integral = (b[i] + tail_xq2) - sv * (a[i] + tail_q2);
            f[i] = std::exp(-integral);
        }
        table.F2 = std::move(f);
    } else {
        const auto c = detail::right_cumulative(table.q, table.step);
        const double tail_q = ai.ai / std::sqrt(big_s);
        for (std::size_t i = 0; i < n; ++i) {
            const double sv = table.s[i];
            const double integral = (c[i] + tail_q) + (b[i] + tail_xq2) - sv * (a[i] + tail_q2);
            f[i] = std::exp(-0.5 * integral);
        }
        table.F1 = std::move(f);
    }
    return table;
}

/// Painleve solve plus both CDFs.
inline TWTable tracy_widom_table(double s_min = -8.0, double s_max = 8.0, double h = 0.005) {
    return tw_cdf(tw_cdf(painleve2_solve(s_min, s_max, h), 1), 2);
}

/// Process-wide default table, built on first use.
inline const TWTable& default_tw_table() {
    static const TWTable table = tracy_widom_table();
    return table;
}

} // namespace htrm

#endif

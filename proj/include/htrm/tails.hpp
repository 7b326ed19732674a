#ifndef HTRM_TAILS_HPP
#define HTRM_TAILS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "htrm/errors.hpp"
#include "htrm/quadrature.hpp"
#include "htrm/rng.hpp"

namespace htrm {

enum class TailFamily { pareto, cauchy, stable, pareto_logvar };

inline std::string_view to_string(TailFamily f) {
    switch (f) {
    case TailFamily::pareto: return "pareto";
    case TailFamily::cauchy: return "cauchy";
    case TailFamily::stable: return "stable";
    case TailFamily::pareto_logvar: return "pareto_logvar";
    }
    return "?";
}

inline std::optional<TailFamily> tail_family_from_string(std::string_view s) {
    if (s == "pareto") return TailFamily::pareto;
    if (s == "cauchy") return TailFamily::cauchy;
    if (s == "stable") return TailFamily::stable;
    if (s == "pareto_logvar") return TailFamily::pareto_logvar;
    return std::nullopt;
}

/// Marginal law of a heavy-tailed matrix entry, Pr(|a| > x) = h(x) x^-alpha.
///
/// Use the factory functions; they validate the parameters so the samplers
/// and tail functions never see an invalid spec.
struct TailSpec {
    TailFamily family = TailFamily::cauchy;
    double alpha = 1.0;
    /// Random +/- sign for the pareto families. Cauchy and stable carry their own sign.
    bool symmetric = true;
    /// Skewness, stable family only.
    double stable_beta = 0.0;

    static TailSpec pareto(double alpha, bool symmetric = true) {
        TailSpec s{TailFamily::pareto, alpha, symmetric, 0.0};
        s.validate();
        return s;
    }
    static TailSpec cauchy() { return TailSpec{TailFamily::cauchy, 1.0, true, 0.0}; }
    static TailSpec stable(double alpha, double beta) {
        TailSpec s{TailFamily::stable, alpha, true, beta};
        s.validate();
        return s;
    }
    static TailSpec pareto_logvar(double alpha, bool symmetric = true) {
        TailSpec s{TailFamily::pareto_logvar, alpha, symmetric, 0.0};
        s.validate();
        return s;
    }

    void validate() const {
        require(std::isfinite(alpha) && alpha > 0.0 && alpha < 2.0, "alpha must lie in (0,2)");
        if (family == TailFamily::cauchy) {
            require(alpha == 1.0, "alpha must equal 1 for the cauchy family");
        }
        if (family == TailFamily::stable) {
            require(stable_beta >= -1.0 && stable_beta <= 1.0, "stable_beta must lie in [-1,1]");
        } else {
            require(stable_beta == 0.0, "stable_beta is only meaningful for the stable family");
        }
    }

    bool operator==(const TailSpec&) const = default;
};

namespace detail {

// pareto_logvar: G(x) = c ln(e + x) x^-alpha for x >= x0, and 1 below x0.
// x0 is 1 unless ln(e + x) x^-alpha has a bump on [1, inf); then x0 is the last
// stationary point, so that G is continuous and strictly decreasing past x0.
struct LogVarShape {
    double x0;
    double log_c;
};

inline LogVarShape logvar_shape(double alpha) {
    // d/dx log(ln(e+x) x^-a) has the sign of psi(x) = x / ((e+x) ln(e+x)) - a.
    const double e = std::numbers::e;
    auto psi = [&](double x) { return x / ((e + x) * std::log(e + x)) - alpha; };
    double x0 = 1.0;
    // psi rises to a single maximum and then decays to -alpha; locate the
    // maximum on a log grid, then bisect for the last sign change.
    double best_x = 1.0;
    double best = psi(1.0);
    for (double x = 1.0; x < 1e12; x *= 1.05) {
        const double v = psi(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    if (best > 0.0) {
        double lo = best_x;
        double hi = best_x;
        while (psi(hi) > 0.0) {
            hi *= 2.0;
        }
        for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            (psi(mid) > 0.0 ? lo : hi) = mid;
        }
        x0 = hi;
    }
    return {x0, alpha * std::log(x0) - std::log(std::log(e + x0))};
}

inline const LogVarShape& logvar_shape_cached(double alpha) {
    static thread_local double cached_alpha = -1.0;
    static thread_local LogVarShape cached{1.0, 0.0};
    if (cached_alpha != alpha) {
        cached = logvar_shape(alpha);
        cached_alpha = alpha;
    }
    return cached;
}

inline double logvar_log_tail(double x, double alpha, const LogVarShape& shape) {
    return shape.log_c + std::log(std::log(std::numbers::e + x)) - alpha * std::log(x);
}

// Standard stable law in Nolan's S0 parametrisation, Pr(Z > y), via the
// integral representation of the distribution function.
inline double stable_upper_tail_s0(double y, double alpha, double beta) {
    constexpr double pi = std::numbers::pi;
    auto integral = [](auto&& f, double a, double b) {
        auto r = quad::integrate(f, a, b, 1e-15, 1e-11, 4000);
        return r.value;
    };
    if (alpha == 1.0) {
        if (beta == 0.0) {
            return 0.5 - std::atan(y) / pi;
        }
        if (beta < 0.0) {
            // Pr(Z > y; beta) = 1 - Pr(Z > -y; -beta).
            return 1.0 - stable_upper_tail_s0(-y, alpha, -beta);
        }
        const double log_t = -pi * y / (2.0 * beta);
        auto f = [&](double theta) {
            const double a = pi / 2.0 + beta * theta;
            const double log_v = std::log(2.0 / pi) + std::log(a / std::cos(theta)) +
                                 a * std::tan(theta) / beta;
            const double arg = std::exp(log_t + log_v);
            return std::isfinite(arg) ? -std::expm1(-arg) : 1.0;
        };
        return integral(f, -pi / 2.0, pi / 2.0) / pi;
    }
    const double tan_term = beta * std::tan(pi * alpha / 2.0);
    const double zeta = -tan_term;
    const double theta0 = std::atan(tan_term) / alpha;
    if (y == zeta) {
        return 1.0 - (pi / 2.0 - theta0) / pi;
    }
    if (y < zeta) {
        return 1.0 - stable_upper_tail_s0(-y, alpha, -beta);
    }
    const double expo = alpha / (alpha - 1.0);
    const double log_t = expo * std::log(y - zeta);
    const double log_cos0 = std::log(std::cos(alpha * theta0)) / (alpha - 1.0);
    auto exponent = [&](double theta) {
        const double ratio = std::cos(theta) / std::sin(alpha * (theta0 + theta));
        const double log_v = log_cos0 + expo * std::log(ratio) +
                             std::log(std::cos(alpha * theta0 + (alpha - 1.0) * theta)) -
                             std::log(std::cos(theta));
        return std::exp(log_t + log_v);
    };
    if (alpha > 1.0) {
        auto f = [&](double theta) {
            const double arg = exponent(theta);
            return std::isfinite(arg) ? std::exp(-arg) : 0.0;
        };
        return integral(f, -theta0, pi / 2.0) / pi;
    }
    auto f = [&](double theta) {
        const double arg = exponent(theta);
        return std::isfinite(arg) ? -std::expm1(-arg) : 1.0;
    };
    return integral(f, -theta0, pi / 2.0) / pi;
}

inline double stable_tail(double x, double alpha, double beta) {
    // CMS draws follow the S1 parametrisation: X = Z0 - zeta for alpha != 1.
    const double zeta = alpha == 1.0 ? 0.0 : -beta * std::tan(std::numbers::pi * alpha / 2.0);
    // Pr(|X| > x) = Pr(Z0 > x + zeta) + Pr(Z0 < zeta - x), and
    // Pr(Z0 < w; beta) = Pr(Z0 > -w; -beta).
    return stable_upper_tail_s0(x + zeta, alpha, beta) +
           stable_upper_tail_s0(x - zeta, alpha, -beta);
}

inline double sample_stable(double alpha, double beta, Rng& rng) {
    constexpr double pi = std::numbers::pi;
    const double v = pi * (rng.uniform() - 0.5);
    const double w = -std::log(rng.uniform());
    if (alpha == 1.0) {
        const double a = pi / 2.0 + beta * v;
        return (2.0 / pi) * (a * std::tan(v) - beta * std::log((pi / 2.0) * w * std::cos(v) / a));
    }
    const double t = beta * std::tan(pi * alpha / 2.0);
    const double b = std::atan(t) / alpha;
    const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * alpha));
    return s * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
           std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
}

} // namespace detail

/// Pr(|entry| > x) for x > 0.
inline double tail_function(const TailSpec& spec, double x) {
    require(x > 0.0, "tail_function: x must be positive");
    switch (spec.family) {
    case TailFamily::pareto:
        return x < 1.0 ? 1.0 : std::pow(x, -spec.alpha);
    case TailFamily::cauchy:
        return (2.0 / std::numbers::pi) * std::atan(1.0 / x);
    case TailFamily::stable:
        return std::min(1.0, detail::stable_tail(x, spec.alpha, spec.stable_beta));
    case TailFamily::pareto_logvar: {
        const auto& shape = detail::logvar_shape_cached(spec.alpha);
        if (x <= shape.x0) {
            return 1.0;
        }
        return std::min(1.0, std::exp(detail::logvar_log_tail(x, spec.alpha, shape)));
    }
    }
    return 1.0;
}

/// Draw one entry. The magnitude has tail function tail_function(spec, .).
inline double sample_entry(const TailSpec& spec, Rng& rng) {
    switch (spec.family) {
    case TailFamily::cauchy:
        return std::tan(std::numbers::pi * (rng.uniform() - 0.5));
    case TailFamily::stable:
        return detail::sample_stable(spec.alpha, spec.stable_beta, rng);
    case TailFamily::pareto: {
        const double u = rng.uniform();
        const double mag = std::pow(u, -1.0 / spec.alpha);
        return spec.symmetric && rng.coin() ? -mag : mag;
    }
    case TailFamily::pareto_logvar:
        break;
    }
    // pareto_logvar: invert G(x) = u in log coordinates, Newton safeguarded by bisection.
    const auto shape = detail::logvar_shape_cached(spec.alpha);
    const double log_u = std::log(rng.uniform());
    const double e = std::numbers::e;
    auto residual = [&](double y) {
        return detail::logvar_log_tail(std::exp(y), spec.alpha, shape) - log_u;
    };
    double lo = std::log(shape.x0);
    double hi = lo + 1.0;
    while (residual(hi) > 0.0) {
        hi = lo + 2.0 * (hi - lo);
    }
    double y = 0.5 * (lo + hi);
    for (int iter = 0; iter < 100; ++iter) {
        const double r = residual(y);
        (r > 0.0 ? lo : hi) = y;
        const double x = std::exp(y);
        const double slope = x / ((e + x) * std::log(e + x)) - spec.alpha;
        double next = y - r / slope;
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (std::abs(next - y) <= 1e-14 * std::max(1.0, std::abs(y))) {
            y = next;
            break;
        }
        y = next;
    }
    const double mag = std::exp(y);
    return spec.symmetric && rng.coin() ? -mag : mag;
}

/// b_N = inf{t : G(t-0) >= 1/N >= G(t+0)}.
///
/// Closed form N^(1/alpha) for pure Pareto; otherwise bisection on the tail
/// function with a doubling upper bracket, to relative width 1e-12.
inline double normalizer_bn(const TailSpec& spec, double count) {
    require(count >= 1.0, "normalizer_bn: N must be at least 1");
    if (spec.family == TailFamily::pareto) {
        return std::pow(count, 1.0 / spec.alpha);
    }
    const double level = 1.0 / count;
    double lo = 0.0;
    double hi = 1.0;
    while (tail_function(spec, hi) > level) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) {
            throw NumericalError("normalizer_bn: tail never drops below 1/N");
        }
    }
    // Invariant: G(lo) > level >= G(hi), with G(0+) = 1 > level when N > 1.
    // N = 1 drives hi towards 0, where every t qualifies; stop before underflow.
    while (hi - lo > 1e-12 * hi && hi > 1e-300) {
        const double mid = 0.5 * (lo + hi);
        if (tail_function(spec, mid) > level) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double g_lo = lo > 0.0 ? tail_function(spec, lo) : 1.0;
    const double g_hi = tail_function(spec, hi);
    if (!(g_lo >= g_hi)) {
        throw NumericalError("normalizer_bn: tail function not decreasing near the root");
    }
    return hi;
}

struct BnCheck {
    double x;
    double scaled_tail; ///< N * G(b_N x)
    double limit;       ///< x^-alpha
};

/// Diagnostic triples (x, N G(b_N x), x^-alpha). Callers pick the tolerance.
inline std::vector<BnCheck> verify_bn_limit(const TailSpec& spec, double count,
                                            const std::vector<double>& xs) {
    require(count >= 10.0, "verify_bn_limit: N must be at least 10");
    const double bn = normalizer_bn(spec, count);
    std::vector<BnCheck> out;
    out.reserve(xs.size());
    for (double x : xs) {
        require(x > 0.0, "verify_bn_limit: x must be positive");
        out.push_back({x, count * tail_function(spec, bn * x), std::pow(x, -spec.alpha)});
    }
    return out;
}

} // namespace htrm

#endif

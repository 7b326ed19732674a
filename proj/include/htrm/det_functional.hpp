#ifndef HTRM_DET_FUNCTIONAL_HPP
#define HTRM_DET_FUNCTIONAL_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <json.hpp>

#include "htrm/ensembles.hpp"
#include "htrm/errors.hpp"
#include "htrm/parallel.hpp"
#include "htrm/quadrature.hpp"
#include "htrm/spectra.hpp"

namespace htrm {

using Complex = std::complex<double>;

/// z must lie in Re z > 0; z = 0 is accepted as the trivial limit.
inline void validate_z(Complex z) {
    require(z.real() > 0.0 || z == Complex(0.0, 0.0), "z must satisfy Re z > 0");
}

/// exp(-2 sqrt(z) / pi) with the principal square root.
inline Complex det_target(Complex z) {
    return std::exp(-2.0 / std::numbers::pi * std::sqrt(z));
}

/// prod_i (1 + z lambda_i / scale)^(-1/2), principal branch per factor.
///
/// Eigenvalues slightly below zero from rounding are clipped; the cut-off is
/// relative to the trace (the squared Frobenius norm of A).
inline Complex det_stat(std::span<const double> eigenvalues, Complex z, double scale) {
    validate_z(z);
    require(scale > 0.0, "det_stat: scale must be positive");
    double trace = 0.0;
    for (double v : eigenvalues) {
        trace += std::abs(v);
    }
    const double clip = -1e-10 * std::max(1.0, trace);
    Complex log_sum = 0.0;
    for (double v : eigenvalues) {
        if (v < 0.0) {
            if (v < clip) {
                throw NumericalError("det_stat: eigenvalue " + format_double(v) +
                                     " is negative beyond rounding");
            }
            v = 0.0;
        }
        log_sum += std::log(1.0 + z * (v / scale));
    }
    return std::exp(-0.5 * log_sum);
}

inline Complex det_stat(const SpectrumResult& s, Complex z, double scale) {
    return det_stat(std::span<const double>(s.eigenvalues), z, scale);
}

struct McEstimate {
    Complex z;
    Complex mean;
    double stderr_re = 0;
    double stderr_im = 0;
    double stderr = 0; ///< hypot(stderr_re, stderr_im)
    std::size_t trials = 0;
    Complex target;

    double abs_error() const { return std::abs(mean - target); }
    bool within(double sigmas) const { return abs_error() < sigmas * stderr; }
};

inline nlohmann::ordered_json to_json(const McEstimate& e) {
    return {{"z_re", e.z.real()},         {"z_im", e.z.imag()},
            {"mean_re", e.mean.real()},   {"mean_im", e.mean.imag()},
            {"stderr", e.stderr},         {"stderr_re", e.stderr_re},
            {"stderr_im", e.stderr_im},   {"trials", e.trials},
            {"target_re", e.target.real()}, {"target_im", e.target.imag()},
            {"abs_error", e.abs_error()}};
}

/// Squared nonzero count: m^2 n^2 dense, n^2 d^2 sparse.
inline double det_scale(const EnsembleSpec& spec) {
    return rescale_map(spec, RescaleMode::m2d2).divisor;
}

/// Summary of per-trial values already ordered by trial index.
inline McEstimate summarize(Complex z, const std::vector<Complex>& values) {
    McEstimate e;
    e.z = z;
    e.trials = values.size();
    e.target = det_target(z);
    const double m = static_cast<double>(values.size());
    e.mean = pairwise_sum(std::span<const Complex>(values)) / m;
    std::vector<double> dre(values.size()), dim(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Complex d = values[i] - e.mean;
        dre[i] = d.real() * d.real();
        dim[i] = d.imag() * d.imag();
    }
    if (values.size() > 1) {
        e.stderr_re = std::sqrt(pairwise_sum(std::span<const double>(dre)) / (m - 1.0) / m);
        e.stderr_im = std::sqrt(pairwise_sum(std::span<const double>(dim)) / (m - 1.0) / m);
    }
    e.stderr = std::hypot(e.stderr_re, e.stderr_im);
    return e;
}

/// Per-trial det_stat values for every z; trial t uses substream (seed, t).
inline std::vector<std::vector<Complex>> det_trials(const EnsembleSpec& spec,
                                                    const std::vector<Complex>& zs,
                                                    std::size_t trials, unsigned workers) {
    require(spec.kind == EnsembleKind::sample_cov || spec.kind == EnsembleKind::sparse_sample_cov,
            "det-functional: kind must be sample_cov or sparse_sample_cov");
    const auto* tail = spec.tail();
    require(tail != nullptr && tail->family == TailFamily::cauchy,
            "det-functional: the target exp(-2 sqrt(z)/pi) holds for Cauchy entries only");
    spec.validate();
    for (Complex z : zs) {
        validate_z(z);
    }
    const double scale = det_scale(spec);
    auto per_trial = run_trials<std::vector<Complex>>(trials, workers, [&](std::size_t t) {
        Rng rng = Rng::substream(spec.seed, t);
        const auto spectrum = eigh_full(gram(build_rect(spec, rng)));
        std::vector<Complex> out;
        out.reserve(zs.size());
        for (Complex z : zs) {
            out.push_back(det_stat(spectrum, z, scale));
        }
        return out;
    });
    std::vector<std::vector<Complex>> by_z(zs.size(), std::vector<Complex>(trials));
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t i = 0; i < zs.size(); ++i) {
            by_z[i][t] = per_trial[t][i];
        }
    }
    return by_z;
}

inline std::vector<McEstimate> mc_expectation(const EnsembleSpec& spec, const std::vector<Complex>& zs,
                                              std::size_t trials, unsigned workers = 1) {
    require(trials >= 100, "det-functional: at least 100 trials required");
    const auto by_z = det_trials(spec, zs, trials, workers);
    std::vector<McEstimate> out;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        out.push_back(summarize(zs[i], by_z[i]));
    }
    return out;
}

inline McEstimate mc_expectation(const EnsembleSpec& spec, Complex z, std::size_t trials,
                                 unsigned workers = 1) {
    return mc_expectation(spec, std::vector<Complex>{z}, trials, workers).front();
}

/// int_0^inf ((1 + z x)^(-1/2) - 1) / (pi x^(3/2)) dx, which equals -2 sqrt(z) / pi.
///
/// With x = u^2 the integrand is -2z / (pi s (1 + s)), s = sqrt(1 + z u^2),
/// on u in [0, 1]; the rest maps through w = 1/u to
/// -(2/pi) z / (r (w + r)), r = sqrt(w^2 + z), on w in (0, 1].
inline quad::Result<Complex> poisson_side_quadrature(Complex z, double tol = 1e-13) {
    validate_z(z);
    const double two_over_pi = 2.0 / std::numbers::pi;
    auto inner = [&](double u) {
        const Complex s = std::sqrt(1.0 + z * (u * u));
        return -two_over_pi * z / (s * (1.0 + s));
    };
    auto outer = [&](double w) {
        const Complex r = std::sqrt(w * w + z);
        return -two_over_pi * z / (r * (w + r));
    };
    auto a = quad::integrate(inner, 0.0, 1.0, tol, tol);
    auto b = quad::integrate(outer, 0.0, 1.0, tol, tol);
    quad::Result<Complex> out;
    out.value = a.value + b.value;
    out.error = a.error + b.error;
    out.converged = a.converged && b.converged && out.error <= 1e-8;
    out.evaluations = a.evaluations + b.evaluations;
    if (!out.converged) {
        throw NumericalError("poisson_side_quadrature: quadrature did not reach 1e-8");
    }
    return out;
}

/// E prod (1 + z x_i)^(-1/2) over a Poisson process of intensity 1/(pi x^(3/2)).
inline Complex product_expectation_poisson(Complex z) {
    if (z == Complex(0.0, 0.0)) {
        return 1.0;
    }
    return std::exp(poisson_side_quadrature(z).value);
}

struct GaussCheck {
    double lhs; ///< det(B)^(-1/2)
    double rhs; ///< pi^(-N/2) int exp(-x B x^t) dx by Gauss-Hermite
};

/// det(B)^(-1/2) = pi^(-N/2) int_{R^N} exp(-x B x^t) dx for symmetric positive
/// definite B, N <= 4. The integral uses a tensor Gauss-Hermite rule after the
/// diagonal rescaling x_i = y_i / sqrt(B_ii).
inline GaussCheck gaussian_integral_check(const RealSymMatrix& b, int nodes = 48) {
    const std::size_t n = b.dim();
    require(n >= 1 && n <= 4, "gaussian_integral_check: dimension must lie in [1, 4]");
    const auto ev = eigh_full(b).eigenvalues;
    require(ev.back() > 0.0, "gaussian_integral_check: B must be positive definite");
    double det = 1.0;
    for (double v : ev) {
        det *= v;
    }
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = 1.0 / std::sqrt(b(i, i));
    }
    // C = D B D has unit diagonal; the weight exp(-|y|^2) carries the identity part.
    std::vector<double> c(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            c[i * n + j] = (i == j) ? 0.0 : d[i] * b(i, j) * d[j];
        }
    }
    const auto rule = quad::gauss_hermite(nodes);
    const std::size_t q = rule.nodes.size();
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
        total *= q;
    }
    std::vector<std::size_t> idx(n, 0);
    std::vector<double> y(n);
    double sum = 0.0;
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        double w = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            idx[i] = rem % q;
            rem /= q;
            y[i] = rule.nodes[idx[i]];
            w *= rule.weights[idx[i]];
        }
        double form = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                form += y[i] * c[i * n + j] * y[j];
            }
        }
        sum += w * std::exp(-form);
    }
    double jac = 1.0;
    for (double v : d) {
        jac *= v;
    }
    return {1.0 / std::sqrt(det), sum * jac / std::pow(std::numbers::pi, 0.5 * static_cast<double>(n))};
}

} // namespace htrm

#endif

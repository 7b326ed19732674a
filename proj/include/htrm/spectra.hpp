#ifndef HTRM_SPECTRA_HPP
#define HTRM_SPECTRA_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "htrm/ensembles.hpp"
#include "htrm/errors.hpp"
#include "htrm/matrix.hpp"
#include "htrm/rng.hpp"
#include "htrm/tails.hpp"

namespace htrm {

/// Eigenvalues of one draw, descending, plus the affine map used to normalise them.
///
/// normalized(i) = (eigenvalues[i] - shift) / normalization. When the values
/// come from top_k, `eigenvalues` holds only the leading prefix and `dim` is
/// the full matrix dimension.
struct SpectrumResult {
    std::vector<double> eigenvalues;
    std::size_t dim = 0;
    double normalization = 1.0;
    double shift = 0.0;
    std::optional<EnsembleSpec> ensemble;
    std::size_t trial_index = 0;

    bool complete() const { return eigenvalues.size() == dim; }
    double normalized(std::size_t i) const { return (eigenvalues[i] - shift) / normalization; }
    std::vector<double> normalized_values() const {
        std::vector<double> out(eigenvalues.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = normalized(i);
        }
        return out;
    }
};

namespace detail {

/// Householder reduction of a dense symmetric row-major matrix to tridiagonal
/// form. Destroys `a`. On return diag has n entries and off[i] couples i, i+1
/// (off[n-1] = 0).
inline void tridiagonalize(std::vector<double>& a, std::size_t n, std::vector<double>& diag,
                           std::vector<double>& off) {
    diag.assign(n, 0.0);
    off.assign(n, 0.0);
    if (n == 0) {
        return;
    }
    std::vector<double> v(n), p(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const std::size_t r = n - k - 1;
        double* row_k = a.data() + k * n + k + 1;
        double norm2 = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            norm2 += row_k[i] * row_k[i];
        }
        diag[k] = a[k * n + k];
        if (norm2 == 0.0) {
            off[k] = 0.0;
            continue;
        }
        const double x0 = row_k[0];
        const double alpha = x0 >= 0.0 ? -std::sqrt(norm2) : std::sqrt(norm2);
        for (std::size_t i = 0; i < r; ++i) {
            v[i] = row_k[i];
        }
        v[0] -= alpha;
        const double vtv = norm2 - x0 * x0 + v[0] * v[0];
        off[k] = alpha;
        if (vtv == 0.0) {
            continue;
        }
        const double beta = 2.0 / vtv;
        // p = beta S v on the trailing r x r block.
        double ptv = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            const double* s_row = a.data() + (k + 1 + i) * n + k + 1;
            double acc = 0.0;
            for (std::size_t j = 0; j < r; ++j) {
                acc += s_row[j] * v[j];
            }
            p[i] = beta * acc;
            ptv += p[i] * v[i];
        }
        const double kappa = 0.5 * beta * ptv;
        for (std::size_t i = 0; i < r; ++i) {
            p[i] -= kappa * v[i];
        }
        // S -= v w^t + w v^t with w = p.
        for (std::size_t i = 0; i < r; ++i) {
            double* s_row = a.data() + (k + 1 + i) * n + k + 1;
            const double vi = v[i];
            const double wi = p[i];
            for (std::size_t j = 0; j < r; ++j) {
                s_row[j] -= vi * p[j] + wi * v[j];
            }
        }
    }
    if (n >= 2) {
        diag[n - 2] = a[(n - 2) * n + (n - 2)];
        off[n - 2] = a[(n - 2) * n + (n - 1)];
    }
    diag[n - 1] = a[(n - 1) * n + (n - 1)];
    off[n - 1] = 0.0;
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// diag is overwritten by the (unsorted) eigenvalues. When `bottom` is given
/// it must hold the last row of the identity on entry; on exit bottom[i] is
/// the last component of the unit eigenvector for diag[i]. Throws after 50
/// iterations on a single eigenvalue.
inline void tridiagonal_ql(std::vector<double>& diag, std::vector<double> off,
                           std::vector<double>* bottom = nullptr) {
    const std::size_t n = diag.size();
    if (n == 0) {
        return;
    }
    constexpr double eps = std::numeric_limits<double>::epsilon();
    off.resize(n);
    off[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m = l;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(diag[m]) + std::abs(diag[m + 1]);
                if (std::abs(off[m]) <= eps * dd) {
                    break;
                }
            }
            if (m != l) {
                if (iter++ == 50) {
                    throw NumericalError("tridiagonal QL: no convergence after 50 iterations");
                }
                double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
                double r = std::hypot(g, 1.0);
                g = diag[m] - diag[l] + off[l] / (g + std::copysign(r, g));
                double s = 1.0;
                double c = 1.0;
                double p = 0.0;
                bool underflow = false;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * off[i];
                    const double b = c * off[i];
                    r = std::hypot(f, g);
                    off[i + 1] = r;
                    if (r == 0.0) {
                        diag[i + 1] -= p;
                        off[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = diag[i + 1] - p;
                    r = (diag[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    diag[i + 1] = g + p;
                    g = c * r - b;
                    if (bottom != nullptr) {
                        auto& z = *bottom;
                        f = z[i + 1];
                        z[i + 1] = s * z[i] + c * f;
                        z[i] = c * z[i] - s * f;
                    }
                }
                if (underflow) {
                    continue;
                }
                diag[l] -= p;
                off[l] = g;
                off[m] = 0.0;
            }
        } while (m != l);
    }
}

inline double vdot_re(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * y[i];
    }
    return s;
}

inline std::complex<double> vdot(std::span<const std::complex<double>> x,
                                 std::span<const std::complex<double>> y) {
    std::complex<double> s{};
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += std::conj(x[i]) * y[i];
    }
    return s;
}
inline double vdot(std::span<const double> x, std::span<const double> y) { return vdot_re(x, y); }

template <class T>
double norm2(std::span<const T> x) {
    double s = 0.0;
    for (const T& v : x) {
        s += std::norm(v);
    }
    return std::sqrt(s);
}

template <class T>
T random_scalar(Rng& rng) {
    if constexpr (is_complex<T>::value) {
        return T(rng.normal(), rng.normal());
    } else {
        return rng.normal();
    }
}

template <class T>
void orthogonalize(std::vector<T>& w, const std::vector<std::vector<T>>& basis) {
    // Classical Gram-Schmidt, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : basis) {
            const T c = vdot(std::span<const T>(q), std::span<const T>(w));
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] -= c * q[i];
            }
        }
    }
}

} // namespace detail

/// Eigenvalues of a symmetric tridiagonal matrix, descending.
inline std::vector<double> tridiagonal_eigenvalues(std::vector<double> diag,
                                                   std::vector<double> off) {
    detail::tridiagonal_ql(diag, std::move(off));
    std::sort(diag.begin(), diag.end(), std::greater<>());
    return diag;
}

/// Relative checks |sum(lambda) - tr| and |sum(lambda^2) - ||M||_F^2| from eigh_full's contract.
template <class T>
bool check_conservation(const SymMatrix<T>& a, const SpectrumResult& s) {
    if (!s.complete()) {
        return false;
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double v : s.eigenvalues) {
        sum += v;
        sum_sq += v * v;
    }
    const double tr = a.trace();
    const double fro = a.frobenius_squared();
    return std::abs(sum - tr) <= 1e-8 * (1.0 + std::abs(tr)) &&
           std::abs(sum_sq - fro) <= 1e-6 * (1.0 + fro);
}

/// All eigenvalues of a real symmetric matrix: Householder tridiagonalisation,
/// then implicit QL. The matrix is divided by its largest entry first and the
/// eigenvalues scaled back, so heavy-tailed draws do not overflow.
inline SpectrumResult eigh_full(const RealSymMatrix& a) {
    require(a.dim() >= 1, "eigh_full: empty matrix");
    const std::size_t n = a.dim();
    const double scale = a.max_abs();
    SpectrumResult out;
    out.dim = n;
    if (scale == 0.0) {
        out.eigenvalues.assign(n, 0.0);
        return out;
    }
    std::vector<double> dense = a.dense();
    for (double& v : dense) {
        v /= scale;
    }
    std::vector<double> diag, off;
    detail::tridiagonalize(dense, n, diag, off);
    dense.clear();
    dense.shrink_to_fit();
    out.eigenvalues = tridiagonal_eigenvalues(std::move(diag), std::move(off));
    for (double& v : out.eigenvalues) {
        v *= scale;
    }
#ifdef HTRM_CHECK_INVARIANTS
    if (!check_conservation(a, out)) {
        throw NumericalError("eigh_full: trace/Frobenius conservation violated");
    }
#endif
    return out;
}

/// Hermitian case through the real embedding [[X, -Y], [Y, X]] of doubled
/// dimension; each eigenvalue appears twice there and is reported once.
inline SpectrumResult eigh_full(const HermitianMatrix& a) {
    require(a.dim() >= 1, "eigh_full: empty matrix");
    const std::size_t n = a.dim();
    RealSymMatrix big(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const auto v = a(i, j);
            big.set(i, j, v.real());
            big.set(n + i, n + j, v.real());
            // Lower-left block is Y, upper-right is -Y = Y^t.
            big.set(n + i, j, v.imag());
            big.set(n + j, i, -v.imag());
        }
    }
    SpectrumResult doubled = eigh_full(big);
    SpectrumResult out;
    out.dim = n;
    out.eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.eigenvalues[i] = 0.5 * (doubled.eigenvalues[2 * i] + doubled.eigenvalues[2 * i + 1]);
    }
    return out;
}

inline SpectrumResult eigh_full(const AnySymMatrix& a) {
    return std::visit([](const auto& m) { return eigh_full(m); }, a);
}

/// The k largest eigenvalues, descending, by Lanczos with full
/// reorthogonalisation.
///
/// The Krylov space starts at min(dim, max(4k, 60)) and doubles until every
/// wanted Ritz pair has residual below 1e-10 times the largest Ritz value.
/// On breakdown a fresh random direction orthogonal to the basis is added, at
/// most three times; eigenvalues of multiplicity above four may be undercounted.
template <class T>
std::vector<double> top_k(const SymMatrix<T>& a, std::size_t k, Rng& rng) {
    const std::size_t n = a.dim();
    require(k >= 1 && 4 * k <= n, "top_k: need 1 <= k <= dim/4");
    std::size_t target = std::min(n, std::max<std::size_t>(4 * k, 60));
    std::vector<std::vector<T>> basis;
    std::vector<double> alphas;
    std::vector<double> betas;

    auto add_random_direction = [&]() {
        std::vector<T> w(n);
        for (auto& x : w) {
            x = detail::random_scalar<T>(rng);
        }
        const double before = detail::norm2<T>(w);
        detail::orthogonalize(w, basis);
        const double after = detail::norm2<T>(w);
        if (after <= 1e-8 * before) {
            return false;
        }
        for (auto& x : w) {
            x /= after;
        }
        basis.push_back(std::move(w));
        return true;
    };

    if (!add_random_direction()) {
        throw NumericalError("top_k: could not draw a start vector");
    }
    int restarts = 0;
    double anorm = 0.0;
    std::vector<T> w(n);
    while (true) {
        const auto& v = basis.back();
        a.multiply(v, w);
        const double alpha = std::real(detail::vdot(std::span<const T>(v), std::span<const T>(w)));
        for (std::size_t i = 0; i < n; ++i) {
            w[i] -= alpha * v[i];
        }
        if (!betas.empty()) {
            const auto& prev = basis[basis.size() - 2];
            const double b = betas.back();
            for (std::size_t i = 0; i < n; ++i) {
                w[i] -= b * prev[i];
            }
        }
        detail::orthogonalize(w, basis);
        alphas.push_back(alpha);
        const double beta = detail::norm2<T>(w);
        anorm = std::max(anorm, std::abs(alpha) + beta + (betas.empty() ? 0.0 : betas.back()));
        const bool breakdown = beta <= 1e-12 * anorm;
        const std::size_t size = basis.size();

        if (size >= target || size == n || breakdown) {
            std::vector<double> ritz = alphas;
            std::vector<double> bottom(size, 0.0);
            bottom[size - 1] = 1.0;
            detail::tridiagonal_ql(ritz, betas, &bottom);
            std::vector<std::size_t> order(size);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(),
                      [&](std::size_t x, std::size_t y) { return ritz[x] > ritz[y]; });
            double theta_max = 0.0;
            for (double t : ritz) {
                theta_max = std::max(theta_max, std::abs(t));
            }
            bool converged = size >= k;
            for (std::size_t i = 0; i < std::min(k, size) && converged; ++i) {
                const double residual = beta * std::abs(bottom[order[i]]);
                converged = residual <= 1e-10 * theta_max;
            }
            if (size == n) {
                converged = true;
            }
            // An invariant subspace says nothing about the complement, so a
            // breakdown is only trusted once the restarts are used up.
            const bool may_restart = breakdown && size < n && restarts < 3;
            if (converged && size >= k && !may_restart) {
                std::vector<double> out(k);
                for (std::size_t i = 0; i < k; ++i) {
                    out[i] = ritz[order[i]];
                }
                return out;
            }
            if (breakdown) {
                if (++restarts > 3) {
                    throw NumericalError("top_k: Lanczos breakdown persisted after 3 restarts");
                }
                betas.push_back(0.0);
                if (!add_random_direction()) {
                    throw NumericalError("top_k: Krylov space exhausted before convergence");
                }
                continue;
            }
            if (size >= target) {
                target = std::min(n, 2 * target);
            }
        }
        betas.push_back(beta);
        for (auto& x : w) {
            x /= beta;
        }
        basis.push_back(w);
    }
}

inline std::vector<double> top_k(const AnySymMatrix& a, std::size_t k, Rng& rng) {
    return std::visit([&](const auto& m) { return top_k(m, k, rng); }, a);
}

enum class RescaleMode { bn, sqrt_n, goe_edge, johnstone, m2d2 };

inline std::string_view to_string(RescaleMode m) {
    switch (m) {
    case RescaleMode::bn: return "bn";
    case RescaleMode::sqrt_n: return "sqrt_n";
    case RescaleMode::goe_edge: return "goe_edge";
    case RescaleMode::johnstone: return "johnstone";
    case RescaleMode::m2d2: return "m2d2";
    }
    return "?";
}

inline std::optional<RescaleMode> rescale_mode_from_string(std::string_view s) {
    for (auto m : {RescaleMode::bn, RescaleMode::sqrt_n, RescaleMode::goe_edge,
                   RescaleMode::johnstone, RescaleMode::m2d2}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    return std::nullopt;
}

struct AffineMap {
    double shift;
    double divisor;
};

/// Centre 2 sqrt(n) and scale n^(-1/6): lambda_max <= 2 sqrt(n) + s n^(-1/6).
inline AffineMap goe_rescale(std::size_t n) {
    require(n >= 1, "goe_rescale: n must be at least 1");
    const double dn = static_cast<double>(n);
    return {2.0 * std::sqrt(dn), std::pow(dn, -1.0 / 6.0)};
}

/// mu = (sqrt n + sqrt m)^2, sigma = (sqrt n + sqrt m)(1/sqrt n + 1/sqrt m)^(1/3).
inline AffineMap johnstone_rescale(std::size_t m, std::size_t n) {
    require(n >= 1 && m >= n, "johnstone_rescale: need m >= n >= 1");
    const double sn = std::sqrt(static_cast<double>(n));
    const double sm = std::sqrt(static_cast<double>(m));
    return {(sn + sm) * (sn + sm), (sn + sm) * std::cbrt(1.0 / sn + 1.0 / sm)};
}

/// The affine normalisation for `mode`, validated against the ensemble kind.
inline AffineMap rescale_map(const EnsembleSpec& spec, RescaleMode mode) {
    const double n = static_cast<double>(spec.n);
    switch (mode) {
    case RescaleMode::bn: {
        const auto* tail = spec.tail();
        require(is_symmetric_kind(spec.kind) && tail != nullptr,
                "rescale bn: needs a symmetric kind with a heavy-tailed entry law");
        return {0.0, normalizer_bn(*tail, static_cast<double>(count_independent_entries(spec)))};
    }
    case RescaleMode::sqrt_n:
        require(is_symmetric_kind(spec.kind), "rescale sqrt_n: needs a symmetric kind");
        return {0.0, std::sqrt(n)};
    case RescaleMode::goe_edge:
        require(is_symmetric_kind(spec.kind) && !is_band_kind(spec.kind),
                "rescale goe_edge: needs a Wigner-type kind");
        return goe_rescale(spec.n);
    case RescaleMode::johnstone:
        require(is_rect_kind(spec.kind), "rescale johnstone: needs a rectangular kind");
        return johnstone_rescale(spec.m, spec.n);
    case RescaleMode::m2d2: {
        require(spec.kind == EnsembleKind::sample_cov ||
                    spec.kind == EnsembleKind::sparse_sample_cov,
                "rescale m2d2: needs sample_cov or sparse_sample_cov");
        // Square of the number of nonzero entries: m^2 n^2 dense, n^2 d^2 with
        // d nonzeros per column. The largest eigenvalue is the square of the
        // largest of those entries, which is of that order.
        const double rows = spec.kind == EnsembleKind::sparse_sample_cov
                                ? static_cast<double>(spec.d)
                                : static_cast<double>(spec.m);
        const double nonzeros = rows * n;
        return {0.0, nonzeros * nonzeros};
    }
    }
    throw ConfigError("rescale: unknown mode");
}

inline SpectrumResult rescale(const EnsembleSpec& spec, SpectrumResult raw, RescaleMode mode) {
    const AffineMap map = rescale_map(spec, mode);
    raw.shift = map.shift;
    raw.normalization = map.divisor;
    raw.ensemble = spec;
    return raw;
}

} // namespace htrm

#endif

#ifndef HTRM_ENSEMBLES_HPP
#define HTRM_ENSEMBLES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "htrm/errors.hpp"
#include "htrm/matrix.hpp"
#include "htrm/rng.hpp"
#include "htrm/tails.hpp"

namespace htrm {

enum class EnsembleKind {
    wigner_real,
    wigner_hermitian,
    band_aperiodic,
    band_periodic,
    sample_cov,
    sparse_sample_cov,
    goe,
    gue,
    gaussian_rect,
};

inline std::string_view to_string(EnsembleKind k) {
    switch (k) {
    case EnsembleKind::wigner_real: return "wigner_real";
    case EnsembleKind::wigner_hermitian: return "wigner_hermitian";
    case EnsembleKind::band_aperiodic: return "band_aperiodic";
    case EnsembleKind::band_periodic: return "band_periodic";
    case EnsembleKind::sample_cov: return "sample_cov";
    case EnsembleKind::sparse_sample_cov: return "sparse_sample_cov";
    case EnsembleKind::goe: return "goe";
    case EnsembleKind::gue: return "gue";
    case EnsembleKind::gaussian_rect: return "gaussian_rect";
    }
    return "?";
}

inline std::optional<EnsembleKind> ensemble_kind_from_string(std::string_view s) {
    for (auto k : {EnsembleKind::wigner_real, EnsembleKind::wigner_hermitian,
                   EnsembleKind::band_aperiodic, EnsembleKind::band_periodic,
                   EnsembleKind::sample_cov, EnsembleKind::sparse_sample_cov, EnsembleKind::goe,
                   EnsembleKind::gue, EnsembleKind::gaussian_rect}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

inline bool is_symmetric_kind(EnsembleKind k) {
    return k != EnsembleKind::sample_cov && k != EnsembleKind::sparse_sample_cov &&
           k != EnsembleKind::gaussian_rect;
}
inline bool is_rect_kind(EnsembleKind k) { return !is_symmetric_kind(k); }
inline bool is_band_kind(EnsembleKind k) {
    return k == EnsembleKind::band_aperiodic || k == EnsembleKind::band_periodic;
}
inline bool is_hermitian_kind(EnsembleKind k) {
    return k == EnsembleKind::wigner_hermitian || k == EnsembleKind::gue;
}

/// Gaussian entries N(0, variance); used by goe, gue, gaussian_rect and
/// light-tailed contrast runs of the other kinds.
struct GaussianEntries {
    double variance = 1.0;
    bool operator==(const GaussianEntries&) const = default;
};

using EntryLaw = std::variant<GaussianEntries, TailSpec>;

/// Recipe for one random matrix draw.
struct EnsembleSpec {
    EnsembleKind kind = EnsembleKind::wigner_real;
    std::size_t n = 0;
    std::size_t m = 0; ///< rows, rectangular kinds only
    std::size_t d = 0; ///< bandwidth (band kinds) or column degree (sparse_sample_cov)
    EntryLaw entry = TailSpec::cauchy();
    std::uint64_t seed = 0;

    const TailSpec* tail() const { return std::get_if<TailSpec>(&entry); }
    bool gaussian() const { return std::holds_alternative<GaussianEntries>(entry); }

    void validate() const {
        require(n >= 1, "n must be at least 1");
        if (const auto* t = tail()) {
            t->validate();
        } else {
            require(std::get<GaussianEntries>(entry).variance > 0.0, "variance must be positive");
        }
        if (kind == EnsembleKind::goe || kind == EnsembleKind::gue ||
            kind == EnsembleKind::gaussian_rect) {
            require(gaussian(), std::string(to_string(kind)) + " requires gaussian entries");
        }
        if (is_band_kind(kind)) {
            require(d <= n - 1, "bandwidth d must satisfy 0 <= d <= n-1");
        }
        if (is_rect_kind(kind)) {
            require(m >= n, "rectangular kinds require m >= n");
        }
        if (kind == EnsembleKind::sparse_sample_cov) {
            require(d >= 1 && d <= m, "sparse_sample_cov requires 1 <= d <= m");
        }
    }

    bool operator==(const EnsembleSpec&) const = default;
};

namespace detail {

inline double draw_real(const EntryLaw& law, Rng& rng) {
    if (const auto* g = std::get_if<GaussianEntries>(&law)) {
        return std::sqrt(g->variance) * rng.normal();
    }
    return sample_entry(std::get<TailSpec>(law), rng);
}

inline bool in_band(EnsembleKind kind, std::size_t n, std::size_t d, std::size_t i, std::size_t j) {
    const std::size_t diff = i > j ? i - j : j - i;
    if (kind == EnsembleKind::band_periodic) {
        return std::min(diff, n - diff) <= d;
    }
    if (kind == EnsembleKind::band_aperiodic) {
        return diff <= d;
    }
    return true;
}

} // namespace detail

/// Independent nonzero entries N_n = #{i <= j in the support}.
inline std::size_t count_independent_entries(const EnsembleSpec& spec) {
    require(is_symmetric_kind(spec.kind), "count_independent_entries: symmetric kind required");
    const std::size_t n = spec.n;
    const std::size_t full = n * (n + 1) / 2;
    switch (spec.kind) {
    case EnsembleKind::band_periodic:
        // n(d+1) while 2d+1 <= n; once the cyclic band wraps, every pair is in.
        return std::min(n * (spec.d + 1), full);
    case EnsembleKind::band_aperiodic:
        return n * (spec.d + 1) - spec.d * (spec.d + 1) / 2;
    default:
        return full;
    }
}

/// Wigner-type draw: goe, gue, wigner_real, wigner_hermitian.
///
/// Entries are drawn row by row over the lower triangle. Hermitian
/// off-diagonal entries take independent real and imaginary parts from the
/// real law scaled by 1/sqrt(2); diagonals reuse the real law.
inline AnySymMatrix build_wigner(const EnsembleSpec& spec, Rng& rng) {
    spec.validate();
    const std::size_t n = spec.n;
    switch (spec.kind) {
    case EnsembleKind::goe: {
        const double var = std::get<GaussianEntries>(spec.entry).variance;
        RealSymMatrix a(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                const double sd = std::sqrt(i == j ? 2.0 * var : var);
                a.set(i, j, sd * rng.normal());
            }
        }
        return a;
    }
    case EnsembleKind::gue: {
        const double var = std::get<GaussianEntries>(spec.entry).variance;
        HermitianMatrix a(n);
        const double sd_half = std::sqrt(0.5 * var);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                const double re = sd_half * rng.normal();
                const double im = sd_half * rng.normal();
                a.set(i, j, {re, im});
            }
            a.set(i, i, {std::sqrt(var) * rng.normal(), 0.0});
        }
        return a;
    }
    case EnsembleKind::wigner_real: {
        RealSymMatrix a(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                a.set(i, j, detail::draw_real(spec.entry, rng));
            }
        }
        return a;
    }
    case EnsembleKind::wigner_hermitian: {
        HermitianMatrix a(n);
        const double s = 1.0 / std::sqrt(2.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                const double re = s * detail::draw_real(spec.entry, rng);
                const double im = s * detail::draw_real(spec.entry, rng);
                a.set(i, j, {re, im});
            }
            a.set(i, i, {detail::draw_real(spec.entry, rng), 0.0});
        }
        return a;
    }
    default:
        throw ConfigError("build_wigner: kind " + std::string(to_string(spec.kind)) +
                          " is not a Wigner kind");
    }
}

/// Band draw: a_ij = 0 unless |i-j| <= d (aperiodic) or min(|i-j|, n-|i-j|) <= d (periodic).
inline RealSymMatrix build_band(const EnsembleSpec& spec, Rng& rng) {
    require(is_band_kind(spec.kind), "build_band: kind " + std::string(to_string(spec.kind)) +
                                         " is not a band kind");
    spec.validate();
    const std::size_t n = spec.n;
    RealSymMatrix a(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            if (detail::in_band(spec.kind, n, spec.d, i, j)) {
                a.set(i, j, detail::draw_real(spec.entry, rng));
            }
        }
    }
    return a;
}

/// Any symmetric kind.
inline AnySymMatrix build_symmetric(const EnsembleSpec& spec, Rng& rng) {
    if (is_band_kind(spec.kind)) {
        return build_band(spec, rng);
    }
    return build_wigner(spec, rng);
}

/// The fixed 0-1 mask of a sparse_sample_cov spec: d distinct rows per column,
/// ascending. Depends only on (seed, m, n, d).
inline std::vector<std::size_t> sparse_mask(const EnsembleSpec& spec) {
    require(spec.d <= spec.m, "sparse_sample_cov requires d <= m");
    Rng rng = Rng::substream(spec.seed, 0, Channel::sparse_mask);
    std::vector<std::size_t> rows(spec.m);
    std::vector<std::size_t> out;
    out.reserve(spec.n * spec.d);
    for (std::size_t c = 0; c < spec.n; ++c) {
        for (std::size_t r = 0; r < spec.m; ++r) {
            rows[r] = r;
        }
        // Partial Fisher-Yates: the first d slots are a uniform d-subset.
        for (std::size_t r = 0; r < spec.d; ++r) {
            const std::size_t pick = r + rng.below(spec.m - r);
            std::swap(rows[r], rows[pick]);
        }
        std::sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(spec.d));
        out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(spec.d));
    }
    return out;
}

/// Rectangular draw: dense i.i.d. fill, or A_jk = b_jk a_jk with the frozen mask.
inline RectMatrix build_rect(const EnsembleSpec& spec, Rng& rng) {
    require(is_rect_kind(spec.kind),
            "build_rect: kind " + std::string(to_string(spec.kind)) + " is not rectangular");
    spec.validate();
    RectMatrix a = spec.kind == EnsembleKind::sparse_sample_cov
                       ? RectMatrix::sparse(spec.m, spec.n, spec.d, sparse_mask(spec))
                       : RectMatrix::dense(spec.m, spec.n);
    for (std::size_t c = 0; c < a.cols(); ++c) {
        for (double& v : a.column(c)) {
            v = detail::draw_real(spec.entry, rng);
        }
    }
    return a;
}

/// A^t A, computed on the lower triangle only.
inline RealSymMatrix gram(const RectMatrix& a) {
    const std::size_t n = a.cols();
    RealSymMatrix g(n);
    if (!a.is_sparse()) {
        for (std::size_t k = 0; k < n; ++k) {
            const auto ck = a.column(k);
            for (std::size_t l = 0; l <= k; ++l) {
                const auto cl = a.column(l);
                double s = 0.0;
                for (std::size_t r = 0; r < ck.size(); ++r) {
                    s += ck[r] * cl[r];
                }
                g.set(k, l, s);
            }
        }
        return g;
    }
    for (std::size_t k = 0; k < n; ++k) {
        const auto rk = a.column_rows(k);
        const auto vk = a.column(k);
        for (std::size_t l = 0; l <= k; ++l) {
            const auto rl = a.column_rows(l);
            const auto vl = a.column(l);
            double s = 0.0;
            std::size_t p = 0;
            std::size_t q = 0;
            while (p < rk.size() && q < rl.size()) {
                if (rk[p] < rl[q]) {
                    ++p;
                } else if (rl[q] < rk[p]) {
                    ++q;
                } else {
                    s += vk[p++] * vl[q++];
                }
            }
            g.set(k, l, s);
        }
    }
    return g;
}

} // namespace htrm

#endif

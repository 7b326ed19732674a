#ifndef HTRM_MATRIX_HPP
#define HTRM_MATRIX_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "htrm/errors.hpp"

namespace htrm {

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

inline double conj_if(double v) { return v; }
inline std::complex<double> conj_if(std::complex<double> v) { return std::conj(v); }

/// Real symmetric (T = double) or Hermitian (T = complex<double>) matrix.
///
/// Storage is the packed lower triangle, row-major: element (i, j) with
/// j <= i lives at i(i+1)/2 + j. The upper triangle is implied, so
/// a(j, i) == conj(a(i, j)) holds exactly. Diagonal imaginary parts are
/// forced to zero on write.
template <class T>
class SymMatrix {
public:
    using value_type = T;

    SymMatrix() = default;
    explicit SymMatrix(std::size_t dim) : dim_(dim), packed_(dim * (dim + 1) / 2, T{}) {}

    std::size_t dim() const { return dim_; }
    std::span<const T> packed() const { return packed_; }

    T operator()(std::size_t i, std::size_t j) const {
        return i >= j ? packed_[index(i, j)] : conj_if(packed_[index(j, i)]);
    }

    void set(std::size_t i, std::size_t j, T value) {
        if (i == j) {
            if constexpr (is_complex<T>::value) {
                value = T(value.real(), 0.0);
            }
            packed_[index(i, i)] = value;
        } else if (i > j) {
            packed_[index(i, j)] = value;
        } else {
            packed_[index(j, i)] = conj_if(value);
        }
    }

    /// Largest |a_ij| over the stored triangle.
    double max_abs() const {
        double m = 0.0;
        for (const T& v : packed_) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }

    /// Sum over all n^2 entries of |a_ij|^2.
    double frobenius_squared() const {
        double s = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const T* row = packed_.data() + index(i, 0);
            for (std::size_t j = 0; j < i; ++j) {
                s += 2.0 * std::norm(row[j]);
            }
            s += std::norm(row[i]);
        }
        return s;
    }

    double trace() const {
        double t = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            t += std::real(packed_[index(i, i)]);
        }
        return t;
    }

    /// y = A x, one pass over the packed triangle.
    void multiply(std::span<const T> x, std::span<T> y) const {
        std::fill(y.begin(), y.end(), T{});
        for (std::size_t i = 0; i < dim_; ++i) {
            const T* row = packed_.data() + index(i, 0);
            const T xi = x[i];
            T acc{};
            for (std::size_t j = 0; j < i; ++j) {
                acc += row[j] * x[j];
                y[j] += conj_if(row[j]) * xi;
            }
            y[i] += acc + row[i] * xi;
        }
    }

    /// Dense row-major copy of the full matrix.
    std::vector<T> dense() const {
        std::vector<T> out(dim_ * dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                const T v = packed_[index(i, j)];
                out[i * dim_ + j] = v;
                out[j * dim_ + i] = conj_if(v);
            }
        }
        return out;
    }

    std::size_t count_nonzero_stored() const {
        return static_cast<std::size_t>(
            std::count_if(packed_.begin(), packed_.end(), [](const T& v) { return v != T{}; }));
    }

    bool operator==(const SymMatrix&) const = default;

    static std::size_t index(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }

private:
    std::size_t dim_ = 0;
    std::vector<T> packed_;
};

using RealSymMatrix = SymMatrix<double>;
using HermitianMatrix = SymMatrix<std::complex<double>>;
using AnySymMatrix = std::variant<RealSymMatrix, HermitianMatrix>;

/// m x n real matrix, either dense column-major or masked-sparse.
///
/// The sparse form keeps, per column, exactly `degree` (row, value) pairs with
/// rows ascending; it is the support of a 0-1 mask with constant column sums.
class RectMatrix {
public:
    static RectMatrix dense(std::size_t rows, std::size_t cols) {
        RectMatrix a;
        a.rows_ = rows;
        a.cols_ = cols;
        a.values_.assign(rows * cols, 0.0);
        return a;
    }

    static RectMatrix sparse(std::size_t rows, std::size_t cols, std::size_t degree,
                             std::vector<std::size_t> row_index) {
        require(degree <= rows, "sparse matrix: column degree d must not exceed m");
        require(row_index.size() == degree * cols, "sparse matrix: mask size mismatch");
        RectMatrix a;
        a.rows_ = rows;
        a.cols_ = cols;
        a.degree_ = degree;
        a.sparse_ = true;
        a.row_index_ = std::move(row_index);
        a.values_.assign(degree * cols, 0.0);
        return a;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool is_sparse() const { return sparse_; }
    std::size_t degree() const { return sparse_ ? degree_ : rows_; }
    std::size_t stored() const { return values_.size(); }

    /// Stored values of column k (all m rows when dense, d rows when sparse).
    std::span<double> column(std::size_t k) {
        const std::size_t len = sparse_ ? degree_ : rows_;
        return {values_.data() + k * len, len};
    }
    std::span<const double> column(std::size_t k) const {
        const std::size_t len = sparse_ ? degree_ : rows_;
        return {values_.data() + k * len, len};
    }
    /// Row indices of column k's stored values (sparse form only).
    std::span<const std::size_t> column_rows(std::size_t k) const {
        return {row_index_.data() + k * degree_, degree_};
    }

    double operator()(std::size_t r, std::size_t c) const {
        if (!sparse_) {
            return values_[c * rows_ + r];
        }
        auto rows = column_rows(c);
        auto it = std::lower_bound(rows.begin(), rows.end(), r);
        if (it == rows.end() || *it != r) {
            return 0.0;
        }
        return values_[c * degree_ + static_cast<std::size_t>(it - rows.begin())];
    }

    double frobenius_squared() const {
        double s = 0.0;
        for (double v : values_) {
            s += v * v;
        }
        return s;
    }

    bool operator==(const RectMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t degree_ = 0;
    bool sparse_ = false;
    std::vector<std::size_t> row_index_;
    std::vector<double> values_;
};

/// Shortest round-trip decimal with 17 significant digits, locale independent.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

/// Writes the stored lower triangle as "i j value" lines, 1-based indices.
/// Hermitian matrices get a fourth column with the imaginary part.
template <class T>
void export_triples(std::ostream& os, const SymMatrix<T>& a) {
    for (std::size_t i = 0; i < a.dim(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const T v = a(i, j);
            if (v == T{}) {
                continue;
            }
            os << i + 1 << ' ' << j + 1 << ' ' << format_double(std::real(v));
            if constexpr (is_complex<T>::value) {
                os << ' ' << format_double(v.imag());
            }
            os << '\n';
        }
    }
}

inline void export_triples(std::ostream& os, const RectMatrix& a) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
        for (std::size_t r = 0; r < a.rows(); ++r) {
            const double v = a(r, c);
            if (v != 0.0) {
                os << r + 1 << ' ' << c + 1 << ' ' << format_double(v) << '\n';
            }
        }
    }
}

} // namespace htrm

#endif

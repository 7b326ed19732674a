#ifndef HTRM_POINTPROC_HPP
#define HTRM_POINTPROC_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "htrm/errors.hpp"
#include "htrm/matrix.hpp"
#include "htrm/rng.hpp"
#include "htrm/spectra.hpp"

namespace htrm {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

struct Interval {
    double lo;
    double hi; ///< may be +infinity
    bool operator==(const Interval&) const = default;
};

/// Disjoint ordered intervals on (0, inf).
struct IntervalPartition {
    std::vector<Interval> intervals;

    void validate() const {
        require(!intervals.empty(), "partition: at least one interval required");
        double prev_hi = 0.0;
        for (std::size_t j = 0; j < intervals.size(); ++j) {
            const auto& iv = intervals[j];
            require(iv.lo > 0.0, "partition: left endpoints must be positive");
            require(iv.lo < iv.hi, "partition: each interval needs lo < hi");
            require(iv.lo >= prev_hi, "partition: intervals must be disjoint and ordered");
            require(std::isfinite(iv.hi) || j + 1 == intervals.size(),
                    "partition: only the last interval may be unbounded");
            prev_hi = iv.hi;
        }
    }

    std::size_t size() const { return intervals.size(); }

    /// Parses "(1,2) (2,4) (4,inf)".
    static IntervalPartition parse(const std::string& text) {
        IntervalPartition p;
        std::size_t pos = 0;
        while (true) {
            pos = text.find_first_not_of(" \t,", pos);
            if (pos == std::string::npos) {
                break;
            }
            require(text[pos] == '(', "partition: expected '(' in \"" + text + "\"");
            const auto close = text.find(')', pos);
            require(close != std::string::npos, "partition: missing ')' in \"" + text + "\"");
            const std::string body = text.substr(pos + 1, close - pos - 1);
            const auto comma = body.find(',');
            require(comma != std::string::npos, "partition: interval needs two endpoints");
            auto number = [&](std::string s) {
                s.erase(0, s.find_first_not_of(" \t"));
                s.erase(s.find_last_not_of(" \t") + 1);
                if (s == "inf" || s == "+inf" || s == "infinity") {
                    return infinity;
                }
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(s, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                require(used == s.size() && !s.empty(), "partition: bad endpoint \"" + s + "\"");
                return v;
            };
            p.intervals.push_back({number(body.substr(0, comma)), number(body.substr(comma + 1))});
            pos = close + 1;
        }
        p.validate();
        return p;
    }

    std::string to_string() const {
        std::string out;
        for (const auto& iv : intervals) {
            if (!out.empty()) {
                out += ' ';
            }
            out += "(" + format_double(iv.lo) + "," +
                   (std::isfinite(iv.hi) ? format_double(iv.hi) : std::string("inf")) + ")";
        }
        return out;
    }
};

/// Mean number of points in (x, y) for intensity alpha / t^(1+alpha).
inline double intensity_measure(double alpha, double x, double y) {
    require(alpha > 0.0, "intensity_measure: alpha must be positive");
    require(x > 0.0 && x < y, "intensity_measure: need 0 < x < y");
    return std::pow(x, -alpha) - (std::isfinite(y) ? std::pow(y, -alpha) : 0.0);
}

/// P(k-th largest point <= x) = exp(-x^-alpha) sum_{l<k} x^(-l alpha) / l!.
inline double frechet_cdf_kth(double x, int k, double alpha) {
    require(k >= 1, "frechet_cdf_kth: k must be at least 1");
    require(alpha > 0.0, "frechet_cdf_kth: alpha must be positive");
    if (x <= 0.0) {
        return 0.0;
    }
    const double m = std::pow(x, -alpha);
    double term = 1.0;
    double sum = 1.0;
    for (int l = 1; l < k; ++l) {
        term *= m / l;
        sum += term;
    }
    return std::min(1.0, std::exp(-m) * sum);
}

/// Occupation counts of one trial's normalized values.
inline std::vector<int> count_occupations(std::span<const double> values,
                                          const IntervalPartition& p) {
    std::vector<int> counts(p.size(), 0);
    for (double v : values) {
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (v > p.intervals[j].lo && v < p.intervals[j].hi) {
                ++counts[j];
                break;
            }
        }
    }
    return counts;
}

/// Per-trial occupation counts, indexed [trial][interval].
struct CountsSample {
    std::vector<std::vector<int>> counts;
    std::size_t trials() const { return counts.size(); }
};

struct KsResult {
    double d = 0.0;
    double dkw_p = 1.0; ///< 2 exp(-2 M D^2), capped at 1
    std::size_t samples = 0;
};

/// Kolmogorov-Smirnov distance of sorted samples to a continuous CDF.
inline KsResult ks_statistic(std::span<const double> sorted, const std::function<double(double)>& cdf) {
    require(sorted.size() >= 20, "ks_statistic: at least 20 samples required");
    require(std::is_sorted(sorted.begin(), sorted.end()), "ks_statistic: samples must be sorted");
    const double m = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / m - f, f - static_cast<double>(i) / m});
    }
    return {d, std::min(1.0, 2.0 * std::exp(-2.0 * m * d * d)), sorted.size()};
}

struct ChiCell {
    int lo;         ///< smallest count in the cell
    int hi;         ///< largest count, -1 for "and above"
    double observed;
    double expected;
};

struct IntervalReport {
    Interval interval;
    double expected_mean = 0;
    double mean = 0;
    double variance = 0;
    std::vector<ChiCell> cells;
    double chi2 = 0;
    int df = 0;
    double p_value = 1;
    bool pass = true; ///< p_value >= significance
};

struct CorrelationReport {
    std::size_t i, j;
    double covariance;
    double r;
    bool pass; ///< |r| < threshold
};

/// Goodness of fit of interval counts against independent Poisson(mu_j).
struct GofReport {
    double alpha = 1.0;
    std::size_t trials = 0;
    double significance = 0.01;
    double overall_level = 0.01; ///< significance / k, used for the overall verdict
    double correlation_threshold = 0.0;
    std::vector<IntervalReport> intervals;
    std::vector<CorrelationReport> correlations;
    std::optional<KsResult> ks_lambda1;
    double ks_threshold = 0.0;

    bool intervals_pass() const {
        return std::all_of(intervals.begin(), intervals.end(), [](const auto& r) { return r.pass; });
    }
    bool correlations_pass() const {
        return std::all_of(correlations.begin(), correlations.end(), [](const auto& c) { return c.pass; });
    }
    /// Every interval p-value above significance / k and every |r| below threshold.
    bool verdict() const {
        for (const auto& r : intervals) {
            if (r.p_value < overall_level) {
                return false;
            }
        }
        return correlations_pass();
    }
};

inline double poisson_pmf(int j, double mu) {
    return std::exp(j * std::log(mu) - mu - std::lgamma(j + 1.0));
}

/// Poisson(mu) by sequential inversion; mu up to a few hundred.
inline int sample_poisson(double mu, Rng& rng) {
    require(mu >= 0.0 && mu < 700.0, "sample_poisson: mu out of range");
    const double u = rng.uniform();
    double p = std::exp(-mu);
    double cdf = p;
    int j = 0;
    while (u > cdf && j < 100000) {
        ++j;
        p *= mu / j;
        cdf += p;
        if (p == 0.0 && j > mu) {
            break;
        }
    }
    return j;
}

namespace detail {

// Cells 0, 1, 2, >=3; the smallest cell under 5 expected is merged into its
// smaller neighbour until every cell reaches 5 or one cell is left.
inline std::vector<ChiCell> poisson_cells(const std::vector<int>& counts, double mu) {
    const double m = static_cast<double>(counts.size());
    std::vector<ChiCell> cells;
    double tail = 1.0;
    for (int j = 0; j < 3; ++j) {
        const double p = poisson_pmf(j, mu);
        cells.push_back({j, j, 0.0, m * p});
        tail -= p;
    }
    cells.push_back({3, -1, 0.0, m * std::max(tail, 0.0)});
    for (int c : counts) {
        cells[static_cast<std::size_t>(std::min(c, 3))].observed += 1.0;
    }
    while (cells.size() > 1) {
        std::size_t worst = 0;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            if (cells[i].expected < cells[worst].expected) {
                worst = i;
            }
        }
        if (cells[worst].expected >= 5.0) {
            break;
        }
        std::size_t other;
        if (worst == 0) {
            other = 1;
        } else if (worst + 1 == cells.size()) {
            other = worst - 1;
        } else {
            other = cells[worst - 1].expected <= cells[worst + 1].expected ? worst - 1 : worst + 1;
        }
        const std::size_t left = std::min(worst, other);
        ChiCell merged{cells[left].lo, cells[left + 1].hi,
                       cells[left].observed + cells[left + 1].observed,
                       cells[left].expected + cells[left + 1].expected};
        cells[left] = merged;
        cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(left) + 1);
    }
    return cells;
}

} // namespace detail

/// Chi-square test of each interval's counts against Poisson(mu_j), plus
/// pairwise Pearson correlations against 4 / sqrt(M).
inline GofReport joint_count_test(const CountsSample& samples, const IntervalPartition& partition,
                                  double alpha, double significance = 0.01) {
    partition.validate();
    const std::size_t m = samples.trials();
    require(m >= 50, "joint_count_test: at least 50 trials required");
    const std::size_t k = partition.size();
    for (const auto& row : samples.counts) {
        require(row.size() == k, "joint_count_test: count rows must match the partition");
    }
    GofReport rep;
    rep.alpha = alpha;
    rep.trials = m;
    rep.significance = significance;
    rep.overall_level = significance / static_cast<double>(k);
    rep.correlation_threshold = 4.0 / std::sqrt(static_cast<double>(m));

    std::vector<std::vector<double>> cols(k, std::vector<double>(m));
    for (std::size_t t = 0; t < m; ++t) {
        for (std::size_t j = 0; j < k; ++j) {
            cols[j][t] = samples.counts[t][j];
        }
    }
    std::vector<double> means(k), vars(k);
    for (std::size_t j = 0; j < k; ++j) {
        const auto& iv = partition.intervals[j];
        IntervalReport r;
        r.interval = iv;
        r.expected_mean = intensity_measure(alpha, iv.lo, iv.hi);
        double s = 0.0;
        for (double v : cols[j]) s += v;
        r.mean = s / static_cast<double>(m);
        double ss = 0.0;
        for (double v : cols[j]) ss += (v - r.mean) * (v - r.mean);
        r.variance = ss / static_cast<double>(m - 1);
        means[j] = r.mean;
        vars[j] = ss / static_cast<double>(m);

        std::vector<int> column(m);
        for (std::size_t t = 0; t < m; ++t) column[t] = samples.counts[t][j];
        r.cells = detail::poisson_cells(column, r.expected_mean);
        r.df = static_cast<int>(r.cells.size()) - 1;
        for (const auto& c : r.cells) {
            if (c.expected > 0.0) {
                r.chi2 += (c.observed - c.expected) * (c.observed - c.expected) / c.expected;
            } else if (c.observed > 0.0) {
                r.chi2 = infinity;
            }
        }
        if (r.df >= 1) {
            r.p_value = std::isfinite(r.chi2) ? boost::math::gamma_q(0.5 * r.df, 0.5 * r.chi2) : 0.0;
        }
        r.pass = r.p_value >= significance;
        rep.intervals.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            double cov = 0.0;
            for (std::size_t t = 0; t < m; ++t) {
                cov += (cols[i][t] - means[i]) * (cols[j][t] - means[j]);
            }
            cov /= static_cast<double>(m);
            const double denom = std::sqrt(vars[i] * vars[j]);
            const double r = denom > 0.0 ? cov / denom : 0.0;
            rep.correlations.push_back({i, j, cov, r, std::abs(r) < rep.correlation_threshold});
        }
    }
    return rep;
}

inline nlohmann::ordered_json to_json(const KsResult& ks) {
    return {{"d", ks.d}, {"dkw_p", ks.dkw_p}, {"samples", ks.samples}};
}

inline nlohmann::ordered_json to_json(const GofReport& r) {
    nlohmann::ordered_json j;
    j["alpha"] = r.alpha;
    j["trials"] = r.trials;
    j["significance"] = r.significance;
    j["overall_level"] = r.overall_level;
    j["correlation_threshold"] = r.correlation_threshold;
    auto& ivs = j["intervals"] = nlohmann::ordered_json::array();
    for (const auto& iv : r.intervals) {
        nlohmann::ordered_json cells = nlohmann::ordered_json::array();
        for (const auto& c : iv.cells) {
            cells.push_back({{"lo", c.lo}, {"hi", c.hi}, {"observed", c.observed}, {"expected", c.expected}});
        }
        ivs.push_back({{"lo", iv.interval.lo},
                       {"hi", std::isfinite(iv.interval.hi) ? nlohmann::ordered_json(iv.interval.hi)
                                                            : nlohmann::ordered_json("inf")},
                       {"expected_mean", iv.expected_mean},
                       {"mean", iv.mean},
                       {"variance", iv.variance},
                       {"chi2", iv.chi2},
                       {"df", iv.df},
                       {"p_value", iv.p_value},
                       {"pass", iv.pass},
                       {"cells", cells}});
    }
    auto& cs = j["correlations"] = nlohmann::ordered_json::array();
    for (const auto& c : r.correlations) {
        cs.push_back({{"i", c.i}, {"j", c.j}, {"covariance", c.covariance}, {"r", c.r}, {"pass", c.pass}});
    }
    if (r.ks_lambda1) {
        j["ks_lambda1"] = to_json(*r.ks_lambda1);
        j["ks_threshold"] = r.ks_threshold;
    }
    j["intervals_pass"] = r.intervals_pass();
    j["correlations_pass"] = r.correlations_pass();
    j["verdict"] = r.verdict();
    return j;
}

/// Histogram rows: interval, count value, empirical frequency, Poisson pmf.
inline void write_count_histogram(std::ostream& os, const CountsSample& samples,
                                  const IntervalPartition& p, double alpha) {
    os << "interval,count_value,frequency,poisson_pmf\n";
    const double m = static_cast<double>(samples.trials());
    for (std::size_t j = 0; j < p.size(); ++j) {
        int top = 0;
        for (const auto& row : samples.counts) top = std::max(top, row[j]);
        const double mu = intensity_measure(alpha, p.intervals[j].lo, p.intervals[j].hi);
        for (int c = 0; c <= std::max(top, 3); ++c) {
            std::size_t hits = 0;
            for (const auto& row : samples.counts) hits += row[j] == c;
            os << j << ',' << c << ',' << format_double(static_cast<double>(hits) / m) << ','
               << format_double(poisson_pmf(c, mu)) << '\n';
        }
    }
}

struct CouplingRow {
    double eigen_scaled; ///< lambda_i / b_n
    double entry_scaled; ///< s_i / b_n, the i-th largest |a_jk| over j <= k
    double rel_gap;      ///< |eigen - entry| / |eigen|
};

/// The k largest |a_ij| (i <= j) in descending order.
template <class T>
std::vector<double> largest_entries(const SymMatrix<T>& a, std::size_t k) {
    std::priority_queue<double, std::vector<double>, std::greater<>> heap;
    for (const T& v : a.packed()) {
        const double x = std::abs(v);
        if (heap.size() < k) {
            heap.push(x);
        } else if (x > heap.top()) {
            heap.pop();
            heap.push(x);
        }
    }
    std::vector<double> out;
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

/// Pairs the top-k eigenvalues with the top-k entry magnitudes, both over b_n.
template <class T>
std::vector<CouplingRow> order_stat_coupling(const SymMatrix<T>& a, const SpectrumResult& spectrum,
                                             double bn, std::size_t k) {
    require(k >= 1 && k <= 10, "order_stat_coupling: k must lie in [1, 10]");
    require(spectrum.eigenvalues.size() >= k, "order_stat_coupling: spectrum shorter than k");
    require(bn > 0.0, "order_stat_coupling: b_n must be positive");
    const auto entries = largest_entries(a, k);
    std::vector<CouplingRow> rows;
    for (std::size_t i = 0; i < k && i < entries.size(); ++i) {
        const double lam = spectrum.eigenvalues[i] / bn;
        const double s = entries[i] / bn;
        rows.push_back({lam, s, lam != 0.0 ? std::abs(lam - s) / std::abs(lam) : std::abs(s)});
    }
    return rows;
}

struct RowDominance {
    std::size_t rows_two_large = 0;      ///< rows with >= 2 entries above b_n^(3/4 + delta)
    std::size_t rows_residual_large = 0; ///< max and (row sum - max) both above b_n^(3/4 + alpha/8)
    double threshold_two = 0;
    double threshold_residual = 0;
};

/// One pass over the packed triangle; entry (i, j) feeds rows i and j.
template <class T>
RowDominance row_dominance_diagnostic(const SymMatrix<T>& a, double bn, double delta, double alpha) {
    require(delta > 0.0 && delta < 0.25, "row_dominance: delta must lie in (0, 1/4)");
    require(bn > 0.0, "row_dominance: b_n must be positive");
    const std::size_t n = a.dim();
    RowDominance out;
    out.threshold_two = std::pow(bn, 0.75 + delta);
    out.threshold_residual = std::pow(bn, 0.75 + alpha / 8.0);
    std::vector<std::size_t> big(n, 0);
    std::vector<double> row_max(n, 0.0), row_sum(n, 0.0);
    const auto packed = a.packed();
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++idx) {
            const double x = std::abs(packed[idx]);
            const bool large = x > out.threshold_two;
            big[i] += large;
            row_max[i] = std::max(row_max[i], x);
            row_sum[i] += x;
            if (j != i) {
                big[j] += large;
                row_max[j] = std::max(row_max[j], x);
                row_sum[j] += x;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.rows_two_large += big[i] >= 2;
        out.rows_residual_large +=
            row_max[i] > out.threshold_residual && row_sum[i] - row_max[i] > out.threshold_residual;
    }
    return out;
}

} // namespace htrm

#endif

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "htrm/quadrature.hpp"
#include "htrm/rng.hpp"
#include "htrm/tails.hpp"

namespace htrm {
namespace {

constexpr double pi = std::numbers::pi;

TEST(Rng, SameSeedSameStream) {
    Rng a(42, 7);
    Rng b(42, 7);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.next_u64(), b.next_u64());
    }
}

TEST(Rng, SubstreamsDiffer) {
    Rng a = Rng::substream(42, 0);
    Rng b = Rng::substream(42, 1);
    Rng c = Rng::substream(42, 0, Channel::lanczos_start);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        seen.insert(a.next_u64());
        seen.insert(b.next_u64());
        seen.insert(c.next_u64());
    }
    EXPECT_EQ(seen.size(), 3000u);
}

TEST(Rng, TrialReplayableInIsolation) {
    std::vector<double> direct;
    Rng r5 = Rng::substream(9, 5);
    for (int i = 0; i < 10; ++i) direct.push_back(r5.uniform());
    for (int t = 0; t < 5; ++t) {
        Rng r = Rng::substream(9, t);
        for (int i = 0; i < 100; ++i) r.uniform();
    }
    Rng again = Rng::substream(9, 5);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(again.uniform(), direct[i]);
}

TEST(Rng, UniformAndNormalMoments) {
    Rng r(1, 0);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = r.normal();
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, BelowIsUniformOnRange) {
    Rng r(3, 3);
    std::vector<int> hist(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto v = r.below(7);
        ASSERT_LT(v, 7u);
        ++hist[v];
    }
    for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Quadrature, ExactOnPolynomialsAndSmoothFunctions) {
    auto poly = quad::integrate([](double x) { return 5 * std::pow(x, 8) - x * x + 1; }, -1, 2);
    EXPECT_NEAR(poly.value, 5.0 / 9 * (512 + 1) - 3 + 3, 1e-10);
    auto ex = quad::integrate([](double x) { return std::exp(-x * x); }, -6, 6);
    EXPECT_NEAR(ex.value, std::sqrt(pi) * std::erf(6.0), 1e-13);
    EXPECT_TRUE(ex.converged);
    auto cx = quad::integrate([](double x) { return std::complex<double>(std::cos(x), std::sin(x)); },
                              0, pi / 2);
    EXPECT_NEAR(cx.value.real(), 1.0, 1e-13);
    EXPECT_NEAR(cx.value.imag(), 1.0, 1e-13);
}

TEST(Quadrature, GaussHermiteIntegratesPolynomials) {
    auto rule = quad::gauss_hermite(20);
    double w = 0, x2 = 0, x4 = 0, odd = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double x = rule.nodes[i];
        w += rule.weights[i];
        x2 += rule.weights[i] * x * x;
        x4 += rule.weights[i] * x * x * x * x;
        odd += rule.weights[i] * x * x * x;
    }
    EXPECT_NEAR(w, std::sqrt(pi), 1e-13);
    EXPECT_NEAR(x2, std::sqrt(pi) / 2, 1e-13);
    EXPECT_NEAR(x4, 3 * std::sqrt(pi) / 4, 1e-12);
    EXPECT_NEAR(odd, 0.0, 1e-13);
    EXPECT_TRUE(std::is_sorted(rule.nodes.begin(), rule.nodes.end()));
}

TEST(TailSpec, Validation) {
    EXPECT_THROW(TailSpec::pareto(2.5), ConfigError);
    EXPECT_THROW(TailSpec::pareto(0.0), ConfigError);
    EXPECT_THROW(TailSpec::stable(1.5, 1.5), ConfigError);
    TailSpec bad_cauchy{TailFamily::cauchy, 0.5, true, 0.0};
    EXPECT_THROW(bad_cauchy.validate(), ConfigError);
    EXPECT_NO_THROW(TailSpec::stable(1.0, -1.0));
}

TEST(SampleEntry, CauchyMedianAtHalf) {
    // u = 0.5 maps to tan(0) = 0; check the transform at the median directly.
    EXPECT_EQ(std::tan(pi * (0.5 - 0.5)), 0.0);
    Rng r(11, 0);
    std::vector<double> xs(20001);
    for (auto& x : xs) x = sample_entry(TailSpec::cauchy(), r);
    std::nth_element(xs.begin(), xs.begin() + 10000, xs.end());
    EXPECT_NEAR(xs[10000], 0.0, 0.03);
}

TEST(SampleEntry, ParetoInverseCdf) {
    // |x| = u^(-1/alpha): u = 0.25, alpha = 1 gives 4 and G(4) = 0.25.
    EXPECT_DOUBLE_EQ(std::pow(0.25, -1.0), 4.0);
    EXPECT_DOUBLE_EQ(tail_function(TailSpec::pareto(1.0), 4.0), 0.25);
    Rng r(5, 0);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_GE(std::abs(sample_entry(TailSpec::pareto(0.7), r)), 1.0);
    }
}

TEST(SampleEntry, StableAlphaOneIsCauchy) {
    Rng r(2024, 0);
    const int n = 100000;
    std::vector<double> xs(n);
    auto spec = TailSpec::stable(1.0, 0.0);
    for (auto& x : xs) x = sample_entry(spec, r);
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = 0.5 + std::atan(xs[i]) / pi;
        d = std::max({d, (i + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    EXPECT_LT(d, 0.01);
}

TEST(TailFunction, ClosedForms) {
    EXPECT_DOUBLE_EQ(tail_function(TailSpec::pareto(1.0), 2.0), 0.5);
    EXPECT_DOUBLE_EQ(tail_function(TailSpec::pareto(1.0), 0.5), 1.0);
    EXPECT_NEAR(tail_function(TailSpec::cauchy(), 1.0), 0.5, 1e-15);
    EXPECT_NEAR(tail_function(TailSpec::cauchy(), 10.0), 1.0 - (2.0 / pi) * std::atan(10.0), 1e-12);
    EXPECT_THROW(tail_function(TailSpec::cauchy(), 0.0), ConfigError);
}

TEST(TailFunction, StableMatchesCauchyAndLevy) {
    auto cauchy_like = TailSpec::stable(1.0, 0.0);
    for (double x : {0.1, 1.0, 3.0, 50.0}) {
        EXPECT_NEAR(tail_function(cauchy_like, x), tail_function(TailSpec::cauchy(), x), 1e-14);
    }
    // S1(1/2, 1) is the Levy law with Pr(X > x) = erf(sqrt(1/(2x))).
    auto levy = TailSpec::stable(0.5, 1.0);
    for (double x : {0.2, 1.0, 4.0, 100.0, 1e4}) {
        const double expected = std::erf(std::sqrt(1.0 / (2.0 * x)));
        EXPECT_NEAR(tail_function(levy, x), expected, 1e-8 * std::max(1e-2, expected)) << x;
    }
}

TEST(TailFunction, MonotoneAndVanishing) {
    for (auto spec : {TailSpec::pareto(0.5), TailSpec::cauchy(), TailSpec::stable(1.5, 0.3),
                      TailSpec::stable(0.7, -0.4), TailSpec::pareto_logvar(1.0),
                      TailSpec::pareto_logvar(0.2)}) {
        double prev = 1.0;
        for (double x = 0.05; x < 1e6; x *= 1.3) {
            const double g = tail_function(spec, x);
            EXPECT_LE(g, prev + 1e-9) << to_string(spec.family) << " x=" << x;
            EXPECT_GE(g, 0.0);
            prev = g;
        }
        EXPECT_LT(tail_function(spec, 1e40), 1e-3);
    }
}

TEST(TailFunction, LogVarIsSlowlyVarying) {
    // h(x) = G(x) x^alpha = c ln(e + x); h(2x)/h(x) -> 1.
    auto spec = TailSpec::pareto_logvar(1.2);
    auto h = [&](double x) { return tail_function(spec, x) * std::pow(x, 1.2); };
    double prev_gap = 1.0;
    for (double x : {1e2, 1e4, 1e8, 1e12}) {
        const double gap = std::abs(h(2 * x) / h(x) - 1.0);
        EXPECT_LT(gap, prev_gap);
        prev_gap = gap;
    }
    EXPECT_LT(prev_gap, 0.03);
    EXPECT_DOUBLE_EQ(tail_function(spec, 1.0), 1.0);
}

// Empirical frequency of {|entry| > x} is within 3 binomial sd of G(x).
TEST(TailFunction, MatchesSamplerFrequencies) {
    const int m = 100000;
    int family_index = 0;
    for (auto spec : {TailSpec::pareto(1.0), TailSpec::pareto(0.6, false), TailSpec::cauchy(),
                      TailSpec::stable(1.5, 0.5), TailSpec::stable(0.8, -0.3),
                      TailSpec::stable(1.0, 0.7), TailSpec::pareto_logvar(1.0),
                      TailSpec::pareto_logvar(0.25)}) {
        Rng r(77, static_cast<std::uint64_t>(family_index++));
        std::vector<double> mags(m);
        for (auto& v : mags) v = std::abs(sample_entry(spec, r));
        for (double x : {1.0, 2.0, 5.0, 10.0}) {
            const double g = tail_function(spec, x);
            const double freq =
                static_cast<double>(std::count_if(mags.begin(), mags.end(), [&](double v) { return v > x; })) / m;
            const double sd = std::sqrt(g * (1 - g) / m);
            EXPECT_LE(std::abs(freq - g), 3 * sd + 1e-12)
                << to_string(spec.family) << " alpha=" << spec.alpha << " x=" << x;
        }
    }
}

TEST(SampleEntry, SymmetricFamiliesAreSignBalanced) {
    for (auto spec : {TailSpec::pareto(1.0), TailSpec::cauchy(), TailSpec::stable(1.3, 0.0),
                      TailSpec::pareto_logvar(0.9)}) {
        Rng r(8, 1);
        double s = 0;
        const int m = 100000;
        for (int i = 0; i < m; ++i) s += sample_entry(spec, r) > 0 ? 1.0 : -1.0;
        EXPECT_LT(std::abs(s / m), 0.02) << to_string(spec.family);
    }
}

TEST(NormalizerBn, ParetoClosedForm) {
    EXPECT_DOUBLE_EQ(normalizer_bn(TailSpec::pareto(1.0), 100), 100.0);
    EXPECT_DOUBLE_EQ(normalizer_bn(TailSpec::pareto(0.5), 100), 10000.0);
    for (double alpha : {0.3, 1.0, 1.7}) {
        for (double n : {1.0, 17.0, 1e6}) {
            EXPECT_EQ(normalizer_bn(TailSpec::pareto(alpha), n), std::pow(n, 1.0 / alpha));
        }
    }
}

TEST(NormalizerBn, CauchyBisectionMatchesExactRoot) {
    // 1 - (2/pi) atan(t) = 1/N  <=>  t = cot(pi / (2N)).
    for (double n : {1.0, 10.0, 1000.0, 2001000.0}) {
        const double exact = 1.0 / std::tan(pi / (2 * n));
        EXPECT_NEAR(normalizer_bn(TailSpec::cauchy(), n), exact, std::max(1e-9 * exact, 1e-12));
    }
    EXPECT_NEAR(normalizer_bn(TailSpec::cauchy(), 1000) / (2000 / pi), 1.0, 1e-5);
}

TEST(NormalizerBn, NondecreasingInN) {
    for (auto spec : {TailSpec::cauchy(), TailSpec::pareto_logvar(1.0), TailSpec::stable(1.5, 0.2),
                      TailSpec::pareto(0.8)}) {
        double prev = 0.0;
        for (double n = 1; n < 1e9; n *= 3.7) {
            const double b = normalizer_bn(spec, n);
            EXPECT_GE(b, prev) << to_string(spec.family);
            prev = b;
        }
    }
}

TEST(VerifyBnLimit, ParetoExact) {
    for (double n : {10.0, 1e3, 1e7}) {
        auto rows = verify_bn_limit(TailSpec::pareto(1.0), n, {2.0});
        ASSERT_EQ(rows.size(), 1u);
        EXPECT_EQ(rows[0].x, 2.0);
        EXPECT_NEAR(rows[0].scaled_tail, 0.5, 1e-12);
        EXPECT_EQ(rows[0].limit, 0.5);
    }
    EXPECT_THROW(verify_bn_limit(TailSpec::pareto(1.0), 5, {1.0}), ConfigError);
}

TEST(VerifyBnLimit, CauchyAtOne) {
    auto rows = verify_bn_limit(TailSpec::cauchy(), 1e6, {1.0, 3.0});
    EXPECT_NEAR(rows[0].scaled_tail, 1.0, 1e-3);
    EXPECT_NEAR(rows[1].scaled_tail, 1.0 / 3.0, 1e-3);
}

TEST(VerifyBnLimit, LogVarConvergesSlowly) {
    auto spec = TailSpec::pareto_logvar(1.0);
    const double small = std::abs(verify_bn_limit(spec, 1e4, {2.0})[0].scaled_tail - 0.5);
    const double large = std::abs(verify_bn_limit(spec, 1e8, {2.0})[0].scaled_tail - 0.5);
    EXPECT_LT(large, small);
    EXPECT_GT(small, 1e-3); // h is genuinely non-constant
}

} // namespace
} // namespace htrm

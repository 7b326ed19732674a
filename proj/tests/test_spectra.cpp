#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "htrm/ensembles.hpp"
#include "htrm/spectra.hpp"

namespace htrm {
namespace {

RealSymMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    RealSymMatrix a(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) a.set(i, j, rows[i][j]);
    }
    return a;
}

RealSymMatrix random_sym(std::size_t n, std::uint64_t seed) {
    Rng rng(seed, 0);
    RealSymMatrix a(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) a.set(i, j, 2 * rng.uniform() - 1);
    }
    return a;
}

// Characteristic polynomial by Faddeev-LeVerrier, roots from the companion
// matrix with a general (nonsymmetric) eigensolver.
std::vector<double> charpoly_roots(const RealSymMatrix& a) {
    const int n = static_cast<int>(a.dim());
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = a(i, j);
    std::vector<double> c(n + 1);
    c[n] = 1.0;
    Eigen::MatrixXd mk = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k <= n; ++k) {
        mk = m * mk + c[n - k + 1] * Eigen::MatrixXd::Identity(n, n);
        c[n - k] = -(m * mk).trace() / k;
    }
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -c[i];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    std::vector<double> roots;
    for (int i = 0; i < n; ++i) roots.push_back(es.eigenvalues()[i].real());
    std::sort(roots.begin(), roots.end(), std::greater<>());
    return roots;
}

TEST(EighFull, TrivialCases) {
    RealSymMatrix d(3);
    d.set(0, 0, 3);
    d.set(1, 1, 1);
    d.set(2, 2, 2);
    EXPECT_EQ(eigh_full(d).eigenvalues, (std::vector<double>{3, 2, 1}));
    auto swap = eigh_full(from_rows({{0}, {1, 0}}));
    EXPECT_NEAR(swap.eigenvalues[0], 1.0, 1e-15);
    EXPECT_NEAR(swap.eigenvalues[1], -1.0, 1e-15);
    RealSymMatrix one(1);
    one.set(0, 0, -4.0);
    EXPECT_EQ(eigh_full(one).eigenvalues, std::vector<double>{-4.0});
    EXPECT_EQ(eigh_full(RealSymMatrix(4)).eigenvalues, std::vector<double>(4, 0.0));
}

TEST(EighFull, CharacteristicPolynomialOracle) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto a = random_sym(8, seed);
        auto ev = eigh_full(a).eigenvalues;
        auto roots = charpoly_roots(a);
        for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(ev[i], roots[i], 1e-7);
    }
}

TEST(EighFull, AgreesWithEigenOnHeavyTails) {
    EnsembleSpec spec;
    spec.kind = EnsembleKind::wigner_real;
    spec.n = 120;
    spec.entry = TailSpec::cauchy();
    Rng rng(31, 0);
    auto a = std::get<RealSymMatrix>(build_wigner(spec, rng));
    Eigen::MatrixXd m(120, 120);
    for (int i = 0; i < 120; ++i)
        for (int j = 0; j < 120; ++j) m(i, j) = a(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    auto ev = eigh_full(a).eigenvalues;
    const double scale = std::abs(ev[0]) + std::abs(ev.back());
    for (int i = 0; i < 120; ++i) EXPECT_NEAR(ev[i], es.eigenvalues()[119 - i], 1e-12 * scale);
}

TEST(EighFull, HermitianMatchesComplexSolver) {
    EnsembleSpec spec;
    spec.kind = EnsembleKind::gue;
    spec.n = 40;
    spec.entry = GaussianEntries{};
    Rng rng(5, 0);
    auto a = std::get<HermitianMatrix>(build_wigner(spec, rng));
    Eigen::MatrixXcd m(40, 40);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j) m(i, j) = a(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    auto res = eigh_full(a);
    ASSERT_EQ(res.eigenvalues.size(), 40u);
    for (int i = 0; i < 40; ++i) EXPECT_NEAR(res.eigenvalues[i], es.eigenvalues()[39 - i], 1e-10);
}

TEST(EighFull, ShiftInvariance) {
    auto a = random_sym(30, 9);
    auto shifted = a;
    for (std::size_t i = 0; i < 30; ++i) shifted.set(i, i, a(i, i) + 5.0);
    auto e1 = eigh_full(a).eigenvalues, e2 = eigh_full(shifted).eigenvalues;
    for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(e2[i], e1[i] + 5.0, 1e-8);
}

TEST(EighFull, ConservationAndOrdering) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto a = random_sym(25 + seed, seed);
        auto r = eigh_full(a);
        EXPECT_TRUE(check_conservation(a, r));
        EXPECT_TRUE(std::is_sorted(r.eigenvalues.rbegin(), r.eigenvalues.rend()));
        EXPECT_TRUE(r.complete());
    }
}

TEST(TridiagonalEigenvalues, PathGraph) {
    // Path on n vertices: 2 cos(pi k / (n+1)).
    const std::size_t n = 12;
    auto ev = tridiagonal_eigenvalues(std::vector<double>(n, 0.0), std::vector<double>(n - 1, 1.0));
    for (std::size_t k = 1; k <= n; ++k) {
        EXPECT_NEAR(ev[k - 1], 2 * std::cos(std::numbers::pi * k / (n + 1)), 1e-13);
    }
}

TEST(TopK, RankOne) {
    RealSymMatrix a(8);
    const std::vector<double> u{1, 1, 1, 2, 0, 0, 0, 0}; // |u|^2 = 7
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j <= i; ++j) a.set(i, j, u[i] * u[j]);
    Rng rng(1, 0);
    EXPECT_NEAR(top_k(a, 1, rng)[0], 7.0, 1e-12);
}

TEST(TopK, Diagonal) {
    RealSymMatrix a(100);
    for (std::size_t i = 0; i < 100; ++i) a.set(i, i, static_cast<double>(i + 1));
    Rng rng(1, 0);
    auto top = top_k(a, 3, rng);
    EXPECT_NEAR(top[0], 100, 1e-9);
    EXPECT_NEAR(top[1], 99, 1e-9);
    EXPECT_NEAR(top[2], 98, 1e-9);
}

TEST(TopK, MatchesFullSolverOnCauchyWigner) {
    EnsembleSpec spec;
    spec.kind = EnsembleKind::wigner_real;
    spec.n = 500;
    spec.entry = TailSpec::cauchy();
    Rng rng(2, 0);
    auto a = build_wigner(spec, rng);
    auto full = eigh_full(a).eigenvalues;
    Rng start = Rng::substream(2, 0, Channel::lanczos_start);
    auto top = top_k(a, 5, start);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(top[i], full[i], 1e-8 * std::abs(full[i]));
}

TEST(TopK, HermitianMatchesFullSolver) {
    EnsembleSpec spec;
    spec.kind = EnsembleKind::wigner_hermitian;
    spec.n = 200;
    spec.entry = TailSpec::pareto(1.2);
    Rng rng(4, 0);
    auto a = build_wigner(spec, rng);
    auto full = eigh_full(a).eigenvalues;
    Rng start(4, 1);
    auto top = top_k(a, 4, start);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(top[i], full[i], 1e-8 * std::abs(full[i]));
}

TEST(TopK, LightTailedClusteredSpectrum) {
    EnsembleSpec spec;
    spec.kind = EnsembleKind::goe;
    spec.n = 300;
    spec.entry = GaussianEntries{};
    Rng rng(6, 0);
    auto a = build_wigner(spec, rng);
    auto full = eigh_full(a).eigenvalues;
    Rng start(6, 1);
    auto top = top_k(a, 6, start);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(top[i], full[i], 1e-8 * std::abs(full[i]));
}

TEST(TopK, PrefixMonotone) {
    EnsembleSpec spec;
    spec.kind = EnsembleKind::wigner_real;
    spec.n = 300;
    spec.entry = TailSpec::pareto(0.8);
    Rng rng(8, 0);
    auto a = build_wigner(spec, rng);
    Rng s1(8, 1), s2(8, 1);
    auto k4 = top_k(a, 4, s1);
    auto k5 = top_k(a, 5, s2);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(k4[i], k5[i], 1e-8 * std::abs(k5[i]));
}

TEST(TopK, RejectsLargeK) {
    RealSymMatrix a(8);
    Rng rng(1, 0);
    EXPECT_THROW(top_k(a, 3, rng), ConfigError);
    EXPECT_THROW(top_k(a, 0, rng), ConfigError);
}

TEST(TopK, HandlesInvariantSubspaceBreakdown) {
    // Block-diagonal: a start vector in one block alone would stall.
    RealSymMatrix a(80);
    for (std::size_t i = 0; i < 80; ++i) a.set(i, i, i < 40 ? 1.0 : 2.0);
    Rng rng(3, 0);
    auto top = top_k(a, 2, rng);
    EXPECT_NEAR(top[0], 2.0, 1e-10);
    EXPECT_NEAR(top[1], 2.0, 1e-10);
}

EnsembleSpec wig(std::size_t n, EntryLaw law) {
    EnsembleSpec s;
    s.kind = EnsembleKind::wigner_real;
    s.n = n;
    s.entry = law;
    return s;
}

TEST(Rescale, Examples) {
    SpectrumResult raw;
    raw.eigenvalues = {20.0};
    raw.dim = 4;
    auto bn = rescale(wig(4, TailSpec::pareto(1.0)), raw, RescaleMode::bn);
    EXPECT_DOUBLE_EQ(bn.normalization, 10.0);
    EXPECT_DOUBLE_EQ(bn.normalized(0), 2.0);

    EnsembleSpec goe = wig(1, GaussianEntries{});
    goe.kind = EnsembleKind::goe;
    raw.eigenvalues = {2.0};
    raw.dim = 1;
    EXPECT_DOUBLE_EQ(rescale(goe, raw, RescaleMode::goe_edge).normalized(0), 0.0);
    auto g8 = goe;
    g8.n = 8;
    raw.eigenvalues = {2 * std::sqrt(8.0) + 1.0};
    EXPECT_NEAR(rescale(g8, raw, RescaleMode::goe_edge).normalized(0), std::pow(8.0, 1.0 / 6), 1e-12);

    EnsembleSpec rect;
    rect.kind = EnsembleKind::gaussian_rect;
    rect.n = 4;
    rect.m = 4;
    rect.entry = GaussianEntries{};
    raw.eigenvalues = {16.0, 20.0};
    raw.dim = 4;
    auto j = rescale(rect, raw, RescaleMode::johnstone);
    EXPECT_DOUBLE_EQ(j.shift, 16.0);
    EXPECT_DOUBLE_EQ(j.normalization, 4.0);
    EXPECT_DOUBLE_EQ(j.normalized(0), 0.0);
    EXPECT_DOUBLE_EQ(j.normalized(1), 1.0);
}

TEST(Rescale, M2d2AndSqrtN) {
    EnsembleSpec sp;
    sp.kind = EnsembleKind::sparse_sample_cov;
    sp.n = 10;
    sp.m = 20;
    sp.d = 3;
    EXPECT_DOUBLE_EQ(rescale_map(sp, RescaleMode::m2d2).divisor, 900.0); // (n d)^2
    sp.kind = EnsembleKind::sample_cov;
    EXPECT_DOUBLE_EQ(rescale_map(sp, RescaleMode::m2d2).divisor, 400.0 * 100.0);
    EXPECT_DOUBLE_EQ(rescale_map(wig(16, TailSpec::cauchy()), RescaleMode::sqrt_n).divisor, 4.0);
}

TEST(Rescale, ModeKindMismatch) {
    EnsembleSpec rect;
    rect.kind = EnsembleKind::sample_cov;
    rect.n = 4;
    rect.m = 4;
    EXPECT_THROW(rescale_map(rect, RescaleMode::bn), ConfigError);
    EXPECT_THROW(rescale_map(wig(4, TailSpec::cauchy()), RescaleMode::johnstone), ConfigError);
    EXPECT_THROW(rescale_map(wig(4, GaussianEntries{}), RescaleMode::bn), ConfigError);
    EXPECT_THROW(rescale_map(wig(4, TailSpec::cauchy()), RescaleMode::m2d2), ConfigError);
    EXPECT_EQ(rescale_mode_from_string("johnstone"), RescaleMode::johnstone);
    EXPECT_FALSE(rescale_mode_from_string("edge").has_value());
}

} // namespace
} // namespace htrm

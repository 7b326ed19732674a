#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "htrm/config.hpp"
#include "htrm/experiments.hpp"

namespace htrm {
namespace {

namespace fs = std::filesystem;

const char* kSpectrum = R"(# minimal
experiment = spectrum
trials = 3
seed = 42

[ensemble]
kind = wigner_real
n = 40
family = pareto
alpha = 1.5
symmetric = true
)";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("htrm_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string expect_config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    ADD_FAILURE() << "no ConfigError for:\n" << text;
    return {};
}

std::string with_line(const std::string& base, const std::string& after, const std::string& line) {
    auto pos = base.find(after);
    EXPECT_NE(pos, std::string::npos);
    pos = base.find('\n', pos) + 1;
    return base.substr(0, pos) + line + "\n" + base.substr(pos);
}

TEST(Config, MinimalSpectrumEchoesInput) {
    const auto cfg = parse_config(kSpectrum);
    EXPECT_EQ(cfg.experiment, Experiment::spectrum);
    EXPECT_EQ(cfg.trials, 3u);
    EXPECT_EQ(cfg.seed, 42u);
    ASSERT_TRUE(cfg.ensemble);
    EXPECT_EQ(cfg.ensemble->kind, EnsembleKind::wigner_real);
    EXPECT_EQ(cfg.ensemble->n, 40u);
    EXPECT_EQ(cfg.ensemble->seed, 42u);
    EXPECT_EQ(*cfg.ensemble->tail(), TailSpec::pareto(1.5));
    const std::map<std::string, std::string> echo{
        {"experiment", "spectrum"},       {"trials", "3"},         {"seed", "42"},
        {"ensemble.kind", "wigner_real"}, {"ensemble.n", "40"},    {"ensemble.family", "pareto"},
        {"ensemble.alpha", "1.5"},        {"ensemble.symmetric", "true"}};
    EXPECT_EQ(cfg.echo, echo);
}

TEST(Config, AlphaOutOfRange) {
    std::string text = kSpectrum;
    text.replace(text.find("alpha = 1.5"), 11, "alpha = 2.5");
    EXPECT_NE(expect_config_error(text).find("alpha must lie in (0,2)"), std::string::npos);
}

TEST(Config, SparseDegreeAboveRows) {
    const std::string text = R"(experiment = det-functional
trials = 200
[ensemble]
kind = sparse_sample_cov
m = 20
n = 10
d = 30
family = cauchy
[params]
z = 1
)";
    EXPECT_NE(expect_config_error(text).find("1 <= d <= m"), std::string::npos);
}

TEST(Config, StrictKeys) {
    EXPECT_NE(expect_config_error(with_line(kSpectrum, "seed", "colour = red")).find("'colour'"),
              std::string::npos);
    EXPECT_NE(expect_config_error(with_line(kSpectrum, "kind", "size = 3")).find("ensemble.size"),
              std::string::npos);
    EXPECT_NE(expect_config_error(std::string(kSpectrum) + "[params]\npartition = (1,2)\n").find("params.partition"),
              std::string::npos);
    EXPECT_NE(expect_config_error(std::string(kSpectrum) + "[extras]\n").find("[extras]"), std::string::npos);
    EXPECT_NE(expect_config_error(with_line(kSpectrum, "seed", "trials = 4")).find("duplicate key"),
              std::string::npos);
}

TEST(Config, TypeAndRangeErrorsNameTheKey) {
    std::string text = kSpectrum;
    text.replace(text.find("n = 40"), 6, "n = forty");
    EXPECT_NE(expect_config_error(text).find("ensemble.n"), std::string::npos);
    text = kSpectrum;
    text.replace(text.find("trials = 3"), 10, "trials = -3");
    EXPECT_NE(expect_config_error(text).find("trials"), std::string::npos);
    text = kSpectrum;
    text.replace(text.find("symmetric = true"), 16, "symmetric = maybe");
    EXPECT_NE(expect_config_error(text).find("ensemble.symmetric"), std::string::npos);
    EXPECT_NE(expect_config_error(std::string(kSpectrum) + "[params]\nrescale = log\n").find("params.rescale"),
              std::string::npos);
    EXPECT_NE(expect_config_error(std::string(kSpectrum) + "[params]\nrescale = johnstone\n").find("rectangular"),
              std::string::npos);
}

TEST(Config, MissingRequiredFields) {
    EXPECT_NE(expect_config_error("trials = 3\n").find("'experiment'"), std::string::npos);
    std::string text = kSpectrum;
    text.erase(text.find("trials = 3\n"), 11);
    EXPECT_NE(expect_config_error(text).find("'trials'"), std::string::npos);
    text = kSpectrum;
    text.replace(text.find("experiment = spectrum"), 21, "experiment = poisson-test");
    text.replace(text.find("trials = 3"), 10, "trials = 60");
    EXPECT_NE(expect_config_error(text).find("params.partition"), std::string::npos);
    EXPECT_NE(expect_config_error("experiment = spectrum\ntrials = 1\n").find("[ensemble]"), std::string::npos);
    EXPECT_NE(expect_config_error("experiment = coupling\ntrials = 2\n[ensemble]\nkind = goe\nn = 10\n")
                  .find("heavy-tailed"),
              std::string::npos);
}

TEST(Config, SyntaxErrorsCarryLineNumbers) {
    EXPECT_NE(expect_config_error("experiment = spectrum\n[ensemble\n").find("line 2"), std::string::npos);
    EXPECT_NE(expect_config_error("experiment spectrum\n").find("line 1"), std::string::npos);
}

TEST(Config, ComplexList) {
    const auto cfg = parse_config(R"(experiment = det-functional
trials = 100
[ensemble]
kind = sample_cov
m = 12
n = 10
family = cauchy
[params]
z = 1, 4, 2+2i, 0.5-1.5i
)");
    ASSERT_EQ(cfg.z_list.size(), 4u);
    EXPECT_EQ(cfg.z_list[2], std::complex<double>(2, 2));
    EXPECT_EQ(cfg.z_list[3], std::complex<double>(0.5, -1.5));
    EXPECT_EQ(parse_complex("3i"), std::complex<double>(0, 3));
    EXPECT_EQ(parse_complex("1e-3+2i"), std::complex<double>(1e-3, 2));
    EXPECT_EQ(format_complex({2, -2}), "2-2i");
    EXPECT_THROW(parse_complex("2+2j"), ConfigError);
}

TEST(Config, GaussianDefaultsAndRestrictions) {
    const auto cfg = parse_config("experiment = esd-check\n[ensemble]\nkind = goe\nn = 10\n");
    EXPECT_TRUE(cfg.ensemble->gaussian());
    EXPECT_EQ(cfg.trials, 1u);
    EXPECT_NE(expect_config_error("experiment = esd-check\n[ensemble]\nkind = goe\nn = 10\nalpha = 1\n")
                  .find("ensemble.alpha"),
              std::string::npos);
    EXPECT_NE(expect_config_error("experiment = spectrum\ntrials = 1\n[ensemble]\nkind = goe\nn = 10\nfamily = cauchy\n")
                  .find("gaussian"),
              std::string::npos);
}

TEST(Trend, NonincreasingWithinNoise) {
    EXPECT_TRUE(nonincreasing_within_noise({0.5, 0.4, 0.3}, {200, 200, 200}).pass);
    EXPECT_TRUE(nonincreasing_within_noise({0.5, 0.52, 0.3}, {200, 200, 200}).pass);
    EXPECT_FALSE(nonincreasing_within_noise({0.2, 0.5, 0.3}, {200, 200, 200}).pass);
    EXPECT_FALSE(nonincreasing_within_noise({0.3, 0.31, 0.3, 0.31}, {200, 200, 200, 200}).pass);
}

TEST(Run, PoissonTestWritesArtifacts) {
    auto cfg = parse_config(R"(experiment = poisson-test
trials = 60
seed = 7
[ensemble]
kind = wigner_real
n = 120
family = cauchy
[params]
partition = (1,2) (2,inf)
)");
    const auto dir = scratch("poisson");
    const auto out = run_experiment(cfg, dir);
    EXPECT_TRUE(out.error.empty());
    for (const char* f : {"gof.json", "gof_negative_tail.json", "counts.csv", "count_histogram.csv",
                          "top_eigenvalues.csv", "summary.txt", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["seed"], 7);
    EXPECT_EQ(manifest["config"]["params.partition"], "(1,2) (2,inf)");
    EXPECT_TRUE(manifest.contains("version"));
    EXPECT_TRUE(manifest.contains("wall_time_seconds"));
    EXPECT_EQ(manifest["exit_code"], out.exit_code());
    const std::string spectrum = slurp(dir / "top_eigenvalues.csv");
    EXPECT_EQ(spectrum.rfind("trial,rank,eigenvalue,normalized_value\n", 0), 0u);
    const auto gof = nlohmann::json::parse(slurp(dir / "gof.json"));
    EXPECT_EQ(gof["intervals"].size(), 2u);
    EXPECT_TRUE(gof.contains("ks_lambda1"));
}

TEST(Run, ResultFilesIndependentOfWorkerCount) {
    auto cfg = parse_config(R"(experiment = poisson-test
trials = 60
seed = 11
[ensemble]
kind = wigner_real
n = 160
family = pareto
alpha = 0.8
[params]
partition = (0.5,1) (1,inf)
method = top_k
)");
    cfg.workers = 1;
    const auto a = scratch("workers_a");
    const auto ra = run_experiment(cfg, a);
    cfg.workers = 3;
    const auto b = scratch("workers_b");
    const auto rb = run_experiment(cfg, b);
    ASSERT_EQ(ra.files, rb.files);
    for (const auto& f : ra.files) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_EQ(slurp(a / "summary.txt"), slurp(b / "summary.txt"));
}

TEST(Run, FailedVerdictStillWritesManifest) {
    // Cauchy entries with the GOE edge map are far from F1, so demanding a
    // Tracy-Widom fit fails.
    auto cfg = parse_config(R"(experiment = tw-contrast
trials = 30
[ensemble]
kind = wigner_real
n = 60
family = cauchy
[params]
expect = tw
)");
    const auto dir = scratch("twfail");
    const auto out = run_experiment(cfg, dir);
    EXPECT_EQ(out.exit_code(), 1);
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_NE(slurp(dir / "summary.txt").find("FAIL "), std::string::npos);
}

TEST(Run, TwTableReachesOne) {
    const auto cfg = parse_config("experiment = tw-table\n");
    const auto dir = scratch("twtable");
    const auto out = run_experiment(cfg, dir);
    EXPECT_EQ(out.exit_code(), 0);
    std::ifstream in(dir / "tw_table.csv");
    std::string line, last;
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    const double f2 = std::stod(last.substr(last.rfind(',') + 1));
    EXPECT_GE(f2, 1.0 - 1e-6);
}

TEST(Run, DetFunctionalWarnsOnSlowRowGrowth) {
    auto cfg = parse_config(R"(experiment = det-functional
trials = 100
[ensemble]
kind = sparse_sample_cov
m = 200
n = 20
d = 5
family = cauchy
[params]
z = 1
)");
    const auto out = run_experiment(cfg, scratch("detwarn"));
    ASSERT_EQ(out.warnings.size(), 1u);
    EXPECT_NE(out.warnings[0].find("ln m"), std::string::npos);
}

} // namespace
} // namespace htrm

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "htrm/htrm.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw htrm::ConfigError("cannot read config file " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_outcome(const htrm::RunOutcome& out, const std::string& dir) {
    for (const auto& w : out.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    for (const auto& n : out.notes) {
        std::cout << n << '\n';
    }
    for (const auto& v : out.verdicts) {
        std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
    }
    if (!out.error.empty()) {
        std::cerr << "numerical failure: " << out.error << '\n';
    }
    std::cout << "results in " << dir << " (" << out.wall_seconds << " s)\n";
}

int quadcheck() {
    using htrm::Complex;
    bool ok = true;
    std::cout << "poisson-side quadrature vs -2 sqrt(z)/pi\n";
    for (Complex z : {Complex(1, 0), Complex(4, 0), Complex(2, 2), Complex(0.01, 0), Complex(100, -30)}) {
        const auto r = htrm::poisson_side_quadrature(z);
        const double err = std::abs(r.value + 2.0 / std::numbers::pi * std::sqrt(z));
        ok = ok && err < 1e-7;
        std::cout << "  z = " << htrm::format_complex(z) << "  value = " << htrm::format_complex(r.value)
                  << "  |diff| = " << err << "  est. error = " << r.error << '\n';
    }
    std::cout << "gaussian integral vs det(B)^(-1/2)\n";
    std::vector<htrm::RealSymMatrix> cases;
    cases.emplace_back(1);
    cases.back().set(0, 0, 1.0);
    cases.emplace_back(1);
    cases.back().set(0, 0, 2.0);
    cases.emplace_back(2);
    cases.back().set(0, 0, 2.0);
    cases.back().set(1, 0, 0.5);
    cases.back().set(1, 1, 1.0);
    cases.emplace_back(3);
    for (std::size_t i = 0; i < 3; ++i) {
        cases.back().set(i, i, 1.5 + static_cast<double>(i));
        for (std::size_t j = 0; j < i; ++j) {
            cases.back().set(i, j, 0.3);
        }
    }
    for (const auto& b : cases) {
        const auto g = htrm::gaussian_integral_check(b);
        const double err = std::abs(g.lhs - g.rhs);
        ok = ok && err < 1e-8;
        std::cout << "  N = " << b.dim() << "  det^(-1/2) = " << htrm::format_double(g.lhs)
                  << "  integral = " << htrm::format_double(g.rhs) << "  |diff| = " << err << '\n';
    }
    std::cout << (ok ? "all identities hold\n" : "identity check failed\n");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heavy-tailed random matrix experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::string out_dir;
    double smin = -8.0, smax = 8.0, step = 0.005;

    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--workers", workers, "Worker threads (0 = all cores)");
    run->add_option("--out", out_dir, "Override the output directory");

    auto* validate = app.add_subcommand("validate", "Parse and check a config file");
    validate->add_option("config", config_path, "Config file")->required();

    auto* tw = app.add_subcommand("tw-table", "Tabulate q, F1 and F2 on a grid");
    tw->add_option("--smin", smin, "Left end of the grid");
    tw->add_option("--smax", smax, "Right end of the grid");
    tw->add_option("--step", step, "Grid step");
    tw->add_option("--out", out_dir, "Output directory (default out/tw-table)");

    auto* quad = app.add_subcommand("quadcheck", "Check the quadrature identities");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*quad) {
            return quadcheck();
        }
        htrm::ExperimentConfig cfg;
        if (*tw) {
            std::ostringstream text;
            text << "experiment = tw-table\n[params]\ns_min = " << htrm::format_double(smin)
                 << "\ns_max = " << htrm::format_double(smax) << "\nstep = " << htrm::format_double(step)
                 << '\n';
            cfg = htrm::parse_config(text.str());
            cfg.output_dir = out_dir.empty() ? "out/tw-table" : out_dir;
        } else {
            cfg = htrm::parse_config(read_file(config_path));
            if (*validate) {
                std::cout << "ok: " << htrm::to_string(cfg.experiment) << '\n';
                for (const auto& [k, v] : cfg.echo) {
                    std::cout << "  " << k << " = " << v << '\n';
                }
                return 0;
            }
            if (seed) {
                cfg.seed = *seed;
                cfg.echo["seed"] = std::to_string(*seed);
                if (cfg.ensemble) {
                    cfg.ensemble->seed = *seed;
                }
            }
            if (workers) {
                cfg.workers = *workers;
            }
            if (!out_dir.empty()) {
                cfg.output_dir = out_dir;
            }
        }
        const auto outcome = htrm::run_experiment(cfg, cfg.output_dir);
        print_outcome(outcome, cfg.output_dir);
        return outcome.exit_code();
    } catch (const htrm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const htrm::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

#ifndef HTRM_CONFIG_HPP
#define HTRM_CONFIG_HPP

#include <charconv>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "htrm/ensembles.hpp"
#include "htrm/errors.hpp"
#include "htrm/pointproc.hpp"
#include "htrm/spectra.hpp"

namespace htrm {

enum class Experiment {
    spectrum,
    poisson_test,
    frechet_test,
    coupling,
    row_diagnostics,
    tw_contrast,
    esd_check,
    det_functional,
    tw_table,
};

inline std::string_view to_string(Experiment e) {
    switch (e) {
    case Experiment::spectrum: return "spectrum";
    case Experiment::poisson_test: return "poisson-test";
    case Experiment::frechet_test: return "frechet-test";
    case Experiment::coupling: return "coupling";
    case Experiment::row_diagnostics: return "row-diagnostics";
    case Experiment::tw_contrast: return "tw-contrast";
    case Experiment::esd_check: return "esd-check";
    case Experiment::det_functional: return "det-functional";
    case Experiment::tw_table: return "tw-table";
    }
    return "?";
}

inline std::optional<Experiment> experiment_from_string(std::string_view s) {
    for (auto e : {Experiment::spectrum, Experiment::poisson_test, Experiment::frechet_test,
                   Experiment::coupling, Experiment::row_diagnostics, Experiment::tw_contrast,
                   Experiment::esd_check, Experiment::det_functional, Experiment::tw_table}) {
        if (to_string(e) == s) {
            return e;
        }
    }
    return std::nullopt;
}

/// key = value lines grouped under [section] headers; "" is the top level.
/// '#' and ';' start comments.
struct ConfigDocument {
    std::map<std::string, std::map<std::string, std::string>> sections;

    static ConfigDocument parse(const std::string& text) {
        ConfigDocument doc;
        doc.sections[""];
        std::string section;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) {
                return std::string();
            }
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) {
                line = line.substr(0, hash);
            }
            line = trim(line);
            if (line.empty()) {
                continue;
            }
            const std::string where = "line " + std::to_string(lineno) + ": ";
            if (line.front() == '[') {
                require(line.back() == ']', where + "section header needs a closing ']'");
                section = trim(line.substr(1, line.size() - 2));
                require(!section.empty(), where + "empty section name");
                require(!doc.sections.count(section) || section.empty(),
                        where + "duplicate section [" + section + "]");
                doc.sections[section];
                continue;
            }
            const auto eq = line.find('=');
            require(eq != std::string::npos, where + "expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            require(!key.empty(), where + "missing key");
            auto& sec = doc.sections[section];
            require(!sec.count(key), where + "duplicate key '" + key + "'");
            sec[key] = value;
        }
        return doc;
    }
};

namespace detail {

inline std::string key_name(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

inline double parse_double(const std::string& name, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto res = std::from_chars(v.data(), end, out);
    if (v == "inf" || v == "+inf") {
        return infinity;
    }
    require(res.ec == std::errc() && res.ptr == end, name + ": expected a number, got \"" + v + "\"");
    return out;
}

inline std::uint64_t parse_uint(const std::string& name, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto res = std::from_chars(v.data(), end, out);
    require(res.ec == std::errc() && res.ptr == end,
            name + ": expected a non-negative integer, got \"" + v + "\"");
    return out;
}

inline bool parse_bool(const std::string& name, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") {
        return true;
    }
    if (v == "false" || v == "no" || v == "0") {
        return false;
    }
    throw ConfigError(name + ": expected true or false, got \"" + v + "\"");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ' && c != '\t') {
            cur += c;
        }
    }
    if (!cur.empty() || !out.empty()) {
        out.push_back(cur);
    }
    return out;
}

} // namespace detail

/// "1", "2.5", "2+2i", "1-0.5i", "3i".
inline std::complex<double> parse_complex(const std::string& text) {
    std::string s;
    for (char c : text) {
        if (c != ' ') s += c;
    }
    require(!s.empty(), "z: empty value");
    if (s.back() != 'i') {
        return {detail::parse_double("z", s), 0.0};
    }
    s.pop_back();
    std::size_t split = std::string::npos;
    for (std::size_t i = s.size(); i-- > 1;) {
        if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
            split = i;
            break;
        }
    }
    auto imag_part = [](const std::string& t) {
        if (t.empty() || t == "+") return 1.0;
        if (t == "-") return -1.0;
        return detail::parse_double("z", t.front() == '+' ? t.substr(1) : t);
    };
    if (split == std::string::npos) {
        return {0.0, imag_part(s)};
    }
    return {detail::parse_double("z", s.substr(0, split)), imag_part(s.substr(split))};
}

inline std::string format_complex(std::complex<double> z) {
    if (z.imag() == 0.0) {
        return format_double(z.real());
    }
    return format_double(z.real()) + (z.imag() < 0 ? "-" : "+") + format_double(std::abs(z.imag())) + "i";
}

/// A parsed, range-checked experiment description.
struct ExperimentConfig {
    Experiment experiment = Experiment::spectrum;
    std::optional<EnsembleSpec> ensemble;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    unsigned workers = 0; ///< 0 = available parallelism
    std::string output_dir = "out";

    // [params]
    std::optional<IntervalPartition> partition;
    std::size_t k = 1;
    std::vector<std::complex<double>> z_list;
    double delta = 0.05;
    std::optional<RescaleMode> rescale;
    std::vector<std::size_t> n_sweep;
    std::string method = "auto"; ///< full | top_k | auto
    double significance = 0.01;
    double ks_threshold = 0.12;
    double prob_tolerance = 0.08;
    double coupling_tolerance = 0.05;
    double contrast_threshold = 0.3;
    std::string expect = "auto"; ///< tw-contrast: tw | not_tw | auto
    double sigmas = 3.0;
    double max_stderr = 0.01;
    double s_min = -8.0, s_max = 8.0, step = 0.005;

    /// Canonical key = value text of the parsed configuration.
    std::map<std::string, std::string> echo;
};

namespace detail {

inline const std::set<std::string>& param_keys(Experiment e) {
    static const std::map<Experiment, std::set<std::string>> keys{
        {Experiment::spectrum, {"rescale", "method", "k"}},
        {Experiment::poisson_test, {"partition", "rescale", "method", "k", "significance", "ks_threshold"}},
        {Experiment::frechet_test, {"k", "rescale", "method", "ks_threshold", "prob_tolerance"}},
        {Experiment::coupling, {"k", "method", "coupling_tolerance"}},
        {Experiment::row_diagnostics, {"delta", "n_sweep"}},
        {Experiment::tw_contrast, {"rescale", "method", "ks_threshold", "contrast_threshold", "expect"}},
        {Experiment::esd_check, {"ks_threshold"}},
        {Experiment::det_functional, {"z", "sigmas", "max_stderr"}},
        {Experiment::tw_table, {"s_min", "s_max", "step"}},
    };
    return keys.at(e);
}

inline EnsembleSpec parse_ensemble(const std::map<std::string, std::string>& sec, std::uint64_t seed,
                                   std::map<std::string, std::string>& echo) {
    static const std::set<std::string> allowed{"kind",  "n",         "m",           "d",
                                               "family", "alpha",    "symmetric",   "stable_beta",
                                               "variance"};
    for (const auto& [key, value] : sec) {
        require(allowed.count(key), "unknown key 'ensemble." + key + "'");
        echo["ensemble." + key] = value;
    }
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        auto it = sec.find(key);
        return it == sec.end() ? std::nullopt : std::optional<std::string>(it->second);
    };
    EnsembleSpec spec;
    spec.seed = seed;
    auto kind = get("kind");
    require(kind.has_value(), "missing required key 'ensemble.kind'");
    auto parsed_kind = ensemble_kind_from_string(*kind);
    require(parsed_kind.has_value(), "ensemble.kind: unknown kind \"" + *kind + "\"");
    spec.kind = *parsed_kind;
    auto n = get("n");
    require(n.has_value(), "missing required key 'ensemble.n'");
    spec.n = parse_uint("ensemble.n", *n);
    if (auto m = get("m")) {
        require(is_rect_kind(spec.kind), "ensemble.m: only rectangular kinds take m");
        spec.m = parse_uint("ensemble.m", *m);
    } else if (is_rect_kind(spec.kind)) {
        throw ConfigError("missing required key 'ensemble.m' for kind " + *kind);
    }
    if (auto d = get("d")) {
        require(is_band_kind(spec.kind) || spec.kind == EnsembleKind::sparse_sample_cov,
                "ensemble.d: only band and sparse kinds take d");
        spec.d = parse_uint("ensemble.d", *d);
    } else if (is_band_kind(spec.kind) || spec.kind == EnsembleKind::sparse_sample_cov) {
        throw ConfigError("missing required key 'ensemble.d' for kind " + *kind);
    }
    const std::string family = get("family").value_or(
        (spec.kind == EnsembleKind::goe || spec.kind == EnsembleKind::gue ||
         spec.kind == EnsembleKind::gaussian_rect)
            ? "gaussian"
            : "");
    require(!family.empty(), "missing required key 'ensemble.family'");
    if (family == "gaussian") {
        for (const char* key : {"alpha", "symmetric", "stable_beta"}) {
            require(!get(key), std::string("ensemble.") + key + ": not used with gaussian entries");
        }
        GaussianEntries g;
        if (auto v = get("variance")) {
            g.variance = parse_double("ensemble.variance", *v);
        }
        spec.entry = g;
    } else {
        require(!get("variance"), "ensemble.variance: only gaussian entries take a variance");
        auto fam = tail_family_from_string(family);
        require(fam.has_value(), "ensemble.family: unknown family \"" + family + "\"");
        TailSpec t;
        t.family = *fam;
        t.alpha = *fam == TailFamily::cauchy ? 1.0 : 0.0;
        if (auto a = get("alpha")) {
            t.alpha = parse_double("ensemble.alpha", *a);
        } else {
            require(*fam == TailFamily::cauchy, "missing required key 'ensemble.alpha'");
        }
        if (auto s = get("symmetric")) {
            t.symmetric = parse_bool("ensemble.symmetric", *s);
        }
        if (auto b = get("stable_beta")) {
            require(*fam == TailFamily::stable, "ensemble.stable_beta: only the stable family takes a skewness");
            t.stable_beta = parse_double("ensemble.stable_beta", *b);
        }
        spec.entry = t;
    }
    try {
        spec.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("[ensemble] ") + e.what());
    }
    return spec;
}

} // namespace detail

/// Strict parse: unknown keys, missing required keys and out-of-range values
/// all raise ConfigError naming the key.
inline ExperimentConfig parse_config(const std::string& text) {
    const auto doc = ConfigDocument::parse(text);
    ExperimentConfig cfg;
    const auto& top = doc.sections.at("");
    static const std::set<std::string> top_keys{"experiment", "trials", "seed", "workers", "output_dir"};
    for (const auto& [key, value] : top) {
        require(top_keys.count(key), "unknown key '" + key + "'");
        cfg.echo[key] = value;
    }
    for (const auto& [name, sec] : doc.sections) {
        require(name.empty() || name == "ensemble" || name == "params",
                "unknown section [" + name + "]");
    }
    auto exp_it = top.find("experiment");
    require(exp_it != top.end(), "missing required key 'experiment'");
    auto exp = experiment_from_string(exp_it->second);
    require(exp.has_value(), "experiment: unknown experiment \"" + exp_it->second + "\"");
    cfg.experiment = *exp;
    if (auto it = top.find("seed"); it != top.end()) {
        cfg.seed = detail::parse_uint("seed", it->second);
    }
    if (auto it = top.find("workers"); it != top.end()) {
        cfg.workers = static_cast<unsigned>(detail::parse_uint("workers", it->second));
    }
    if (auto it = top.find("output_dir"); it != top.end()) {
        require(!it->second.empty(), "output_dir: must not be empty");
        cfg.output_dir = it->second;
    }
    const bool needs_ensemble = cfg.experiment != Experiment::tw_table;
    if (auto it = top.find("trials"); it != top.end()) {
        cfg.trials = detail::parse_uint("trials", it->second);
        require(cfg.trials >= 1, "trials: must be at least 1");
    } else {
        require(!needs_ensemble || cfg.experiment == Experiment::esd_check,
                "missing required key 'trials'");
    }
    auto ens_it = doc.sections.find("ensemble");
    if (needs_ensemble) {
        require(ens_it != doc.sections.end(), "missing required section [ensemble]");
        cfg.ensemble = detail::parse_ensemble(ens_it->second, cfg.seed, cfg.echo);
    } else {
        require(ens_it == doc.sections.end(), "tw-table takes no [ensemble] section");
    }

    std::map<std::string, std::string> params;
    if (auto it = doc.sections.find("params"); it != doc.sections.end()) {
        params = it->second;
    }
    const auto& allowed = detail::param_keys(cfg.experiment);
    for (const auto& [key, value] : params) {
        require(allowed.count(key), "unknown key 'params." + key + "' for experiment " +
                                        std::string(to_string(cfg.experiment)));
        cfg.echo["params." + key] = value;
    }
    auto param = [&](const std::string& key) -> std::optional<std::string> {
        auto it = params.find(key);
        return it == params.end() ? std::nullopt : std::optional<std::string>(it->second);
    };
    auto unit_interval = [&](const std::string& key, double& target) {
        if (auto v = param(key)) {
            target = detail::parse_double("params." + key, *v);
            require(target > 0.0 && target < 1.0, "params." + key + " must lie in (0, 1)");
        }
    };
    unit_interval("significance", cfg.significance);
    unit_interval("ks_threshold", cfg.ks_threshold);
    unit_interval("prob_tolerance", cfg.prob_tolerance);
    unit_interval("coupling_tolerance", cfg.coupling_tolerance);
    unit_interval("contrast_threshold", cfg.contrast_threshold);
    unit_interval("max_stderr", cfg.max_stderr);
    if (auto v = param("sigmas")) {
        cfg.sigmas = detail::parse_double("params.sigmas", *v);
        require(cfg.sigmas > 0.0, "params.sigmas must be positive");
    }
    if (auto v = param("k")) {
        cfg.k = detail::parse_uint("params.k", *v);
        require(cfg.k >= 1, "params.k must be at least 1");
        if (cfg.experiment == Experiment::coupling) {
            require(cfg.k <= 10, "params.k must be at most 10 for coupling");
        }
    }
    if (auto v = param("method")) {
        require(*v == "full" || *v == "top_k" || *v == "auto",
                "params.method must be full, top_k or auto");
        cfg.method = *v;
    }
    if (auto v = param("expect")) {
        require(*v == "tw" || *v == "not_tw" || *v == "auto", "params.expect must be tw, not_tw or auto");
        cfg.expect = *v;
    }
    if (auto v = param("rescale")) {
        cfg.rescale = rescale_mode_from_string(*v);
        require(cfg.rescale.has_value(), "params.rescale: unknown mode \"" + *v + "\"");
        if (cfg.ensemble) {
            rescale_map(*cfg.ensemble, *cfg.rescale);
        }
    }
    if (auto v = param("delta")) {
        cfg.delta = detail::parse_double("params.delta", *v);
        require(cfg.delta > 0.0 && cfg.delta < 0.25, "params.delta must lie in (0, 1/4)");
    }
    if (auto v = param("n_sweep")) {
        for (const auto& item : detail::split_list(*v)) {
            const auto n = detail::parse_uint("params.n_sweep", item);
            require(n >= 2, "params.n_sweep: sizes must be at least 2");
            cfg.n_sweep.push_back(n);
        }
        require(!cfg.n_sweep.empty(), "params.n_sweep: list is empty");
    }
    if (auto v = param("partition")) {
        cfg.partition = IntervalPartition::parse(*v);
    }
    if (auto v = param("z")) {
        for (const auto& item : detail::split_list(*v)) {
            const auto z = parse_complex(item);
            require(z.real() > 0.0, "params.z: every z needs a positive real part");
            cfg.z_list.push_back(z);
        }
    }
    if (auto v = param("s_min")) cfg.s_min = detail::parse_double("params.s_min", *v);
    if (auto v = param("s_max")) cfg.s_max = detail::parse_double("params.s_max", *v);
    if (auto v = param("step")) cfg.step = detail::parse_double("params.step", *v);

    // Per-experiment requirements.
    const EnsembleSpec* ens = cfg.ensemble ? &*cfg.ensemble : nullptr;
    auto heavy_symmetric = [&](const char* what) {
        require(is_symmetric_kind(ens->kind) && ens->tail() != nullptr,
                std::string(what) + " needs a symmetric kind with heavy-tailed entries");
    };
    switch (cfg.experiment) {
    case Experiment::poisson_test:
        heavy_symmetric("poisson-test");
        require(cfg.partition.has_value(), "missing required key 'params.partition'");
        require(cfg.trials >= 50, "trials: poisson-test needs at least 50 trials");
        break;
    case Experiment::frechet_test:
        heavy_symmetric("frechet-test");
        require(cfg.trials >= 20, "trials: frechet-test needs at least 20 trials");
        break;
    case Experiment::coupling:
        heavy_symmetric("coupling");
        break;
    case Experiment::row_diagnostics:
        heavy_symmetric("row-diagnostics");
        if (cfg.n_sweep.empty()) {
            cfg.n_sweep.push_back(ens->n);
        }
        for (auto n : cfg.n_sweep) {
            auto probe = *ens;
            probe.n = n;
            probe.validate();
        }
        break;
    case Experiment::tw_contrast:
        require(ens->kind == EnsembleKind::goe || ens->kind == EnsembleKind::gue ||
                    ens->kind == EnsembleKind::wigner_real || ens->kind == EnsembleKind::wigner_hermitian ||
                    is_rect_kind(ens->kind),
                "tw-contrast needs a Wigner-type or rectangular kind");
        require(cfg.trials >= 20, "trials: tw-contrast needs at least 20 trials");
        break;
    case Experiment::esd_check:
        require(ens->gaussian() && !is_band_kind(ens->kind) &&
                    ens->kind != EnsembleKind::sparse_sample_cov,
                "esd-check needs gaussian entries and a Wigner or dense rectangular kind");
        break;
    case Experiment::det_functional:
        require(ens->kind == EnsembleKind::sample_cov || ens->kind == EnsembleKind::sparse_sample_cov,
                "det-functional needs kind sample_cov or sparse_sample_cov");
        require(ens->tail() != nullptr && ens->tail()->family == TailFamily::cauchy,
                "det-functional needs cauchy entries");
        require(!cfg.z_list.empty(), "missing required key 'params.z'");
        require(cfg.trials >= 100, "trials: det-functional needs at least 100 trials");
        break;
    case Experiment::tw_table:
        require(cfg.s_max >= 6.0, "params.s_max must be at least 6");
        require(cfg.s_min <= -8.0, "params.s_min must be at most -8");
        require(cfg.step > 0.0 && cfg.step <= 0.01, "params.step must lie in (0, 0.01]");
        break;
    case Experiment::spectrum:
        break;
    }
    if (cfg.method == "top_k" && ens) {
        require(is_symmetric_kind(ens->kind), "params.method top_k needs a symmetric kind");
        require(4 * cfg.k <= ens->n, "params.k must not exceed n/4 for top_k");
    }
    return cfg;
}

} // namespace htrm

#endif

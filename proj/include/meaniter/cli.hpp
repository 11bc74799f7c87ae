#pragma once

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "meaniter/io.hpp"
#include "meaniter/meaniter.hpp"

// meaniter <command> --config FILE [flags]
//
// Exit codes: 0 success, 1 verify gap above --tol, 2 bad configuration,
// 3 domain / bracket / axiom violation, 4 fewer than three usable ratios,
// 5 other convergence failure.

namespace meaniter::cli {

using json = nlohmann::json;

enum exit_code : int {
    ok = 0,
    gap_exceeded = 1,
    config_failure = 2,
    domain_failure = 3,
    too_few_ratios = 4,
    no_convergence = 5,
};

struct Options
{
    std::string command;
    std::string config_path;
    std::string inline_json;
    std::optional<long> precision_bits;
    std::optional<int> digits;
    double tol = 1e-4;
    std::string out_dir = ".";
    int jobs = 1;
};

inline bool uses_iteration(const std::string& cmd) { return cmd == "iterate" || cmd == "verify"; }

/// --precision-bits, then the config's "precision_bits", then
/// MEANITER_DEFAULT_BITS, then the command default.
inline bits_t resolve_bits(const Options& o, const json& cfg)
{
    if (o.precision_bits)
        return *o.precision_bits;
    if (cfg.contains("precision_bits")) {
        const json& b = cfg.at("precision_bits");
        if (!b.is_number_integer())
            throw parse_error("precision_bits must be an integer");
        return b.get<long>();
    }
    if (const char* env = std::getenv("MEANITER_DEFAULT_BITS")) {
        try {
            std::size_t used = 0;
            long v = std::stol(env, &used);
            if (used == std::string(env).size())
                return v;
        } catch (const std::exception&) {
        }
        throw parse_error(std::string("MEANITER_DEFAULT_BITS='") + env + "' is not an integer");
    }
    return uses_iteration(o.command) ? PrecisionConfig::convergence_default_bits
                                     : PrecisionConfig::residuum_default_bits;
}

inline PrecisionConfig precision_for(bits_t bits)
{
    if (bits < 64 || bits > (1L << 24))
        throw parse_error("precision_bits must lie in [64, 16777216]");
    PrecisionConfig cfg{bits, std::min<bits_t>(32, bits / 4)};
    cfg.validate();
    return cfg;
}

inline int int_field(const json& cfg, const char* key, int fallback)
{
    if (!cfg.contains(key))
        return fallback;
    const json& v = cfg.at(key);
    if (!v.is_number_integer())
        throw parse_error(std::string("\"") + key + "\" must be an integer");
    return v.get<int>();
}

inline int digits_for(const Options& o, const json& cfg)
{
    return o.digits ? *o.digits : int_field(cfg, "digits", 0);
}

inline void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw parse_error("cannot write " + path.string());
    f << text;
}

namespace commands {

inline int eval(const Options& o, const json& cfg, const std::filesystem::path&, std::ostream& out)
{
    bits_t bits = resolve_bits(o, cfg);
    precision_for(bits);
    MeanSpec m = io::mean_from_json(io::require(cfg, "mean", "config"));
    auto x = io::vector_from_json(io::require(cfg, "x", "config"), bits, "x");
    Real v = eval_mean(m, x);
    out << io::decimal(v, digits_for(o, cfg)) << '\n';
    return ok;
}

inline int residuum(const Options& o, const json& cfg, const std::filesystem::path&,
                    std::ostream& out)
{
    bits_t bits = resolve_bits(o, cfg);
    precision_for(bits);
    MeanSpec m = io::mean_from_json(io::require(cfg, "mean", "config"));
    Real x = io::real_from_json(io::require(cfg, "x", "config"), bits, "x");
    int p = int_field(cfg, "p", 2);
    out << io::comparison_to_json(compare_residuum_estimators(m, p, x), digits_for(o, cfg)).dump(2) << '\n';
    return ok;
}

inline int probe(const Options& o, const json& cfg, const std::filesystem::path&, std::ostream& out)
{
    bits_t bits = resolve_bits(o, cfg);
    precision_for(bits);
    MeanSpec m = io::mean_from_json(io::require(cfg, "mean", "config"));
    Real x = io::real_from_json(io::require(cfg, "x", "config"), bits, "x");
    int p = int_field(cfg, "p", 3);
    std::vector<Real> radii = cfg.contains("radii")
                                  ? io::vector_from_json(cfg.at("radii"), bits, "radii")
                                  : default_probe_radii(x);
    out << io::residuality_to_json(residuality_probe(m, p, x, radii), digits_for(o, cfg)).dump(2) << '\n';
    return ok;
}

inline int p_independence(const Options& o, const json& cfg, const std::filesystem::path&,
                          std::ostream& out)
{
    bits_t bits = resolve_bits(o, cfg);
    precision_for(bits);
    MeanSpec m = io::mean_from_json(io::require(cfg, "mean", "config"));
    Real x = io::real_from_json(io::require(cfg, "x", "config"), bits, "x");
    std::vector<int> arities{2, 3, 5};
    if (cfg.contains("arities")) {
        const json& a = cfg.at("arities");
        if (!a.is_array() || a.size() < 2)
            throw parse_error("arities must be an array of at least two integers");
        arities.clear();
        for (const auto& v : a) {
            if (!v.is_number_integer())
                throw parse_error("arities must be integers");
            arities.push_back(v.get<int>());
        }
    }
    auto rep = p_independence_check(m, x, arities);
    out << io::p_independence_to_json(rep, digits_for(o, cfg)).dump(2) << '\n';
    return ok;
}

inline void summarize(const IterationTrace& tr, int digits, std::ostream& out)
{
    out << "reason: " << to_string(tr.terminated_reason) << '\n'
        << "steps: " << tr.states.size() - 1 << '\n'
        << "usable_ratios: " << tr.usable_ratio_indices().size() << '\n'
        << "K: " << io::decimal(tr.invariant_estimate, digits) << '\n';
}

inline int iterate_or_verify(const Options& o, const json& cfg, const std::filesystem::path& dir,
                             std::ostream& out)
{
    PrecisionConfig pc = precision_for(resolve_bits(o, cfg));
    MeanTypeMapping mapping = io::mapping_from_json(io::require(cfg, "mapping", "config"));
    auto x0 = io::vector_from_json(io::require(cfg, "x0", "config"), pc.working_bits, "x0");
    int max_iter = int_field(cfg, "max_iter", default_max_iterations);

    IterationTrace tr = iterate(mapping, x0, pc, max_iter);
    write_file(dir / "trace.csv", io::trace_to_csv(tr));
    const int digits = o.digits ? *o.digits : int_field(cfg, "digits", 20);
    summarize(tr, digits, out);

    if (o.command == "iterate") {
        if (tr.terminated_reason == TerminationReason::max_iterations)
            throw convergence_error("iteration did not converge within " + std::to_string(max_iter) +
                                    " steps; last diameter " + tr.diameters.back().to_string(12));
        return ok;
    }

    auto verdict = limit_verdict(mapping, tr);
    if (!verdict)
        return ok;
    write_file(dir / "verdict.json", io::verdict_to_json(*verdict).dump(2) + "\n");
    out << "empirical_limit: " << io::decimal(verdict->empirical_limit, digits) << '\n'
        << "predicted_limit: " << io::decimal(verdict->predicted_limit, digits) << '\n'
        << "relative_gap: " << verdict->relative_gap.to_string(6) << '\n';
    return compare(verdict->relative_gap, o.tol) < 0 ? ok : gap_exceeded;
}

} // namespace commands

/// Runs one experiment, mapping library errors onto exit codes.
inline int run_experiment(const Options& o, const json& cfg, const std::filesystem::path& dir,
                          std::ostream& out, std::ostream& err)
{
    try {
        if (!cfg.is_object())
            throw parse_error("configuration must be a JSON object");
        if (o.command == "eval")
            return commands::eval(o, cfg, dir, out);
        if (o.command == "residuum")
            return commands::residuum(o, cfg, dir, out);
        if (o.command == "probe-residuality")
            return commands::probe(o, cfg, dir, out);
        if (o.command == "p-independence")
            return commands::p_independence(o, cfg, dir, out);
        return commands::iterate_or_verify(o, cfg, dir, out);
    } catch (const insufficient_ratios_error& e) {
        err << "error: " << e.what() << '\n';
        return too_few_ratios;
    } catch (const convergence_error& e) {
        err << "error: " << e.what() << '\n';
        return no_convergence;
    } catch (const parse_error& e) {
        err << "config error: " << e.what() << '\n';
        return config_failure;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return config_failure;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return config_failure;
    } catch (const error& e) {
        err << "domain error: " << e.what() << '\n';
        return domain_failure;
    }
}

inline json load_config(const Options& o)
{
    if (!o.inline_json.empty())
        return json::parse(o.inline_json);
    std::ifstream f(o.config_path);
    if (!f)
        throw parse_error("cannot open config file '" + o.config_path + "'");
    return json::parse(f);
}

/// A config with an "experiments" array runs each entry (merged over the
/// top-level keys) into out/exp_<i>, up to --jobs at a time; output is
/// printed in experiment order and the worst exit code wins.
inline int run_all(const Options& o, const json& cfg, std::ostream& out, std::ostream& err)
{
    const std::filesystem::path root(o.out_dir);
    if (!cfg.is_object() || !cfg.contains("experiments"))
        return run_experiment(o, cfg, root, out, err);

    const json& list = cfg.at("experiments");
    if (!list.is_array() || list.empty())
        throw parse_error("\"experiments\" must be a non-empty array");
    json base = cfg;
    base.erase("experiments");

    const std::size_t n = list.size();
    std::vector<std::ostringstream> outs(n), errs(n);
    std::vector<int> codes(n, ok);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            json merged = base;
            if (list[i].is_object())
                merged.update(list[i]);
            else
                merged = list[i];
            codes[i] = run_experiment(o, merged, root / ("exp_" + std::to_string(i)), outs[i],
                                      errs[i]);
        }
    };
    const int jobs = std::clamp<int>(o.jobs, 1, static_cast<int>(n));
    std::vector<std::thread> pool;
    for (int t = 1; t < jobs; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    int worst = ok;
    for (std::size_t i = 0; i < n; ++i) {
        out << "# exp_" << i << " exit " << codes[i] << '\n' << outs[i].str();
        err << errs[i].str();
        worst = std::max(worst, codes[i]);
    }
    return worst;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Gaussian iteration of means: evaluation, residua and convergence limits",
                 "meaniter"};
    app.require_subcommand(1);
    Options o;
    long bits = 0;
    int digits = 0;

    const std::vector<std::pair<std::string, std::string>> subs = {
        {"eval", "evaluate a mean at a vector"},
        {"residuum", "residuum at a point by all three routes"},
        {"probe-residuality", "fit the order of the second-order expansion defect"},
        {"p-independence", "compare the residuum across arities"},
        {"iterate", "run the Gaussian iteration and write trace.csv"},
        {"verify", "iterate and compare the ratio limit with the prediction"},
    };
    for (const auto& [name, help] : subs) {
        CLI::App* sc = app.add_subcommand(name, help);
        auto* cfg_opt = sc->add_option("--config", o.config_path, "JSON experiment file");
        sc->add_option("--json", o.inline_json, "JSON experiment given inline")->excludes(cfg_opt);
        sc->add_option("--precision-bits", bits, "working precision in bits");
        sc->add_option("--digits", digits, "significant digits for printed values");
        sc->add_option("--tol", o.tol, "relative gap accepted by verify")->capture_default_str();
        sc->add_option("--out", o.out_dir, "output directory")->capture_default_str();
        sc->add_option("--jobs", o.jobs, "experiments run in parallel")->check(CLI::PositiveNumber);
        sc->callback([&o, name = name] { o.command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream cli_out, cli_err;
        int rc = app.exit(e, cli_out, cli_err);
        out << cli_out.str();
        err << cli_err.str();
        return rc == 0 ? ok : config_failure;
    }
    for (CLI::App* sc : app.get_subcommands()) {
        if (sc->count("--precision-bits"))
            o.precision_bits = bits;
        if (sc->count("--digits"))
            o.digits = digits;
    }
    if (o.config_path.empty() && o.inline_json.empty()) {
        err << "config error: one of --config or --json is required\n";
        return config_failure;
    }

    try {
        return run_all(o, load_config(o), out, err);
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << '\n';
    } catch (const parse_error& e) {
        err << "config error: " << e.what() << '\n';
    }
    return config_failure;
}

} // namespace meaniter::cli

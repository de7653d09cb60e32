#pragma once

// Command-line front end. Subcommands: enumerate, sample, run, theory,
// gen-signal. Exit codes: 0 success, 2 usage, 3 configuration, 4 i/o.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chaosmab/config.hpp"
#include "chaosmab/env.hpp"
#include "chaosmab/error.hpp"
#include "chaosmab/harness.hpp"
#include "chaosmab/parallel.hpp"
#include "chaosmab/signal.hpp"
#include "chaosmab/theory.hpp"

namespace chaosmab {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr std::uint64_t kFullScaleMeasurements = 12000;

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitConfig = 3, kExitIo = 4 };

/// Writes through a temporary sibling and renames it into place, so a reader
/// never sees a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

namespace detail {

inline std::string format_g(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::vector<double> parse_value_list(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--values", "not a number: '" + item + "'");
        }
        if (used != item.size()) throw CLI::ValidationError("--values", "not a number: '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw CLI::ValidationError("--values", "empty list");
    return out;
}

}  // namespace detail

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    unsigned jobs = default_jobs();
    std::string out_dir;
};

/// Output target: explicit file, else <out-dir>/<default_name> when an
/// out-dir was given, else stdout (empty path).
inline std::filesystem::path output_path(const GlobalOptions& g, const std::string& explicit_path,
                                         const char* default_name)
{
    if (!explicit_path.empty()) return explicit_path;
    if (!g.out_dir.empty()) return std::filesystem::path(g.out_dir) / default_name;
    return {};
}

inline void emit(const std::filesystem::path& path, const std::string& content, std::ostream& out)
{
    if (path.empty()) out << content;
    else write_file_atomic(path, content);
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Chaos-signal multi-armed bandit simulator and benchmark harness", "chaosmab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Seed (sample: environment draw; run: master seed; theory/gen-signal: stream)");
    app.add_option("--jobs", g.jobs, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "Directory for output files");

    // enumerate
    std::size_t enum_k = 4;
    std::string enum_values;
    double enum_gap = 0.3;
    std::string enum_output;
    auto* enumerate = app.add_subcommand("enumerate", "All environments whose largest gap equals --gap");
    enumerate->add_option("--k", enum_k, "Number of arms (power of two)")->required();
    enumerate->add_option("--values", enum_values, "Comma-separated ascending value grid (default 0.1,...,0.9)");
    enumerate->add_option("--gap", enum_gap, "Exact largest pairwise gap")->required();
    enumerate->add_option("-o,--output", enum_output, "Output CSV (default: stdout or <out-dir>/environments.csv)");

    // sample
    std::size_t sample_k = 8;
    std::size_t sample_count = 100;
    std::string sample_values;
    std::string sample_output;
    auto* sample = app.add_subcommand("sample", "Uniformly sampled environments over a value grid");
    sample->add_option("--k", sample_k, "Number of arms (power of two)")->required();
    sample->add_option("--count", sample_count, "Number of environments")->required();
    sample->add_option("--values", sample_values, "Comma-separated ascending value grid (default 0.1,...,0.9)");
    sample->add_option("-o,--output", sample_output, "Output CSV (default: stdout or <out-dir>/environments.csv)");

    // run
    std::string config_path;
    bool full_scale = false;
    auto* run = app.add_subcommand("run", "Run an experiment ensemble from a JSON config");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_flag("--full-scale", full_scale, "Use 12000 measurements per environment instead of the config's l_m");

    // theory
    TwoArmModel model;
    std::uint64_t theory_n = 50;
    std::uint64_t mc_trials = 0;
    bool trajectory = false;
    std::string theory_output;
    auto* theory = app.add_subcommand("theory", "Expected threshold of two-arm Chaos under a uniform signal");
    theory->add_option("--mu0", model.mu0, "Reward mean of arm 0")->required();
    theory->add_option("--mu1", model.mu1, "Reward mean of arm 1")->required();
    theory->add_option("--lambda", model.lambda, "Reward magnitude Lambda")->capture_default_str();
    theory->add_option("--omega", model.omega, "No-reward magnitude Omega")->capture_default_str();
    theory->add_option("--alpha", model.alpha, "Threshold decay alpha")->capture_default_str();
    theory->add_option("--w1", model.w1, "Initial threshold")->capture_default_str();
    theory->add_option("--n", theory_n, "Trajectory length")->capture_default_str()->check(CLI::PositiveNumber);
    theory->add_option("--mc-trials", mc_trials, "Monte-Carlo trials (0: closed form only)");
    theory->add_flag("--trajectory", trajectory, "Write the trajectory CSV even without Monte-Carlo");
    theory->add_option("-o,--output", theory_output, "Trajectory CSV (default: stdout or <out-dir>/theory.csv)");

    // gen-signal
    std::string gen_kind = "uniform";
    std::size_t gen_len = 0;
    std::optional<double> gen_x0;
    std::string gen_output;
    auto* gen = app.add_subcommand("gen-signal", "Synthetic signal as float text, one sample per line");
    gen->add_option("--kind", gen_kind, "uniform or logistic")->check(CLI::IsMember({"uniform", "logistic"}));
    gen->add_option("--len", gen_len, "Number of samples")->required()->check(CLI::PositiveNumber);
    gen->add_option("--x0", gen_x0, "Forced logistic start point in [0, 1]")->check(CLI::Range(0.0, 1.0));
    gen->add_option("-o,--output", gen_output, "Output file (default: stdout or <out-dir>/signal.txt)");

    for (auto* sub : {enumerate, sample, run, theory, gen}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*enumerate || *sample) {
            const bool is_enum = static_cast<bool>(*enumerate);
            const std::string& value_text = is_enum ? enum_values : sample_values;
            const std::vector<double> values =
                value_text.empty() ? default_value_grid() : detail::parse_value_list(value_text);
            const std::size_t k = is_enum ? enum_k : sample_k;
            std::vector<RewardEnvironment> envs;
            try {
                envs = is_enum ? enumerate_envs(k, values, enum_gap)
                               : sample_envs(k, sample_count, values, g.seed.value_or(0));
            } catch (const std::invalid_argument& e) {
                err << "error: " << e.what() << '\n';
                return kExitUsage;
            }
            std::ostringstream csv;
            write_envs_csv(csv, k, envs);
            emit(output_path(g, is_enum ? enum_output : sample_output, "environments.csv"), csv.str(), out);
            return kExitOk;
        }

        if (*run) {
            const auto started = std::chrono::steady_clock::now();
            ExperimentConfig cfg = load_config(config_path);
            if (g.seed) cfg.master_seed = *g.seed;
            if (full_scale) cfg.l_m = kFullScaleMeasurements;
            const auto envs = build_environments(cfg);
            const auto signal = build_signal(cfg);
            const EnsembleResult result = run_ensemble(cfg, envs, signal ? &*signal : nullptr, g.jobs);

            namespace fs = std::filesystem;
            const fs::path dir = g.out_dir.empty() ? fs::path(".") : fs::path(g.out_dir);
            std::ostringstream curves, scatter, variance, ensemble;
            write_curves_csv(curves, result);
            write_scatter_csv(scatter, result);
            write_variance_csv(variance, result);
            write_ensemble_csv(ensemble, result);
            const std::vector<std::pair<const char*, std::string>> files = {
                {"curves.csv", curves.str()},
                {"scatter.csv", scatter.str()},
                {"variance.csv", variance.str()},
                {"ensemble.csv", ensemble.str()},
            };
            nlohmann::json outputs = nlohmann::json::array();
            for (const auto& [name, content] : files) {
                write_file_atomic(dir / name, content);
                outputs.push_back((dir / name).string());
            }
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            nlohmann::json manifest = {
                {"tool", "chaosmab"},
                {"version", kToolVersion},
                {"command", "run"},
                {"config_path", config_path},
                {"config", to_json(cfg)},
                {"master_seed", cfg.master_seed},
                {"environment_count", envs.size()},
                {"outputs", outputs},
                {"jobs", g.jobs},
                {"wall_clock_seconds", seconds},
            };
            write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
            out << "wrote " << files.size() << " CSV files and manifest.json to " << dir.string() << '\n';
            return kExitOk;
        }

        if (*theory) {
            try {
                model.validate();
            } catch (const std::invalid_argument& e) {
                err << "error: " << e.what() << '\n';
                return kExitUsage;
            }
            const auto [p, q] = pq_of(model);
            out << "P = " << detail::format_g(p) << '\n';
            out << "Q = " << detail::format_g(q) << '\n';
            if (q != 1.0) out << "fixed_point = " << detail::format_g(p / (1.0 - q)) << '\n';
            out << "regime = " << to_string(classify_regime(model)) << '\n';

            if (mc_trials > 0 || trajectory) {
                ThresholdTrajectory mc;
                if (mc_trials > 0) mc = mc_two_arm(model, theory_n, mc_trials, g.seed.value_or(0), g.jobs);
                std::ostringstream csv;
                csv << (CsvRow() << "step" << "closed_form" << "mc_mean" << "mc_stderr");
                for (std::uint64_t n = 1; n <= theory_n; ++n) {
                    CsvRow row;
                    row << n << expected_threshold(model, n);
                    if (mc_trials > 0) row << mc.mean[n - 1] << mc.std_error[n - 1];
                    else row << "" << "";
                    csv << row;
                }
                emit(output_path(g, theory_output, "theory.csv"), csv.str(), out);
            }
            return kExitOk;
        }

        if (*gen) {
            const SyntheticKind kind = gen_kind == "logistic" ? SyntheticKind::logistic_map : SyntheticKind::uniform_iid;
            if (gen_x0 && kind != SyntheticKind::logistic_map) {
                err << "error: --x0 applies to --kind logistic only\n";
                return kExitUsage;
            }
            if (gen_x0 && (*gen_x0 == 0.75 || *gen_x0 == 0.5 || *gen_x0 == 0.0 || *gen_x0 == 1.0))
                err << "warning: logistic start " << *gen_x0 << " is degenerate (fixed point or absorbing orbit)\n";
            const SignalSource source = gen_synthetic(kind, gen_len, g.seed.value_or(0), gen_x0);
            std::ostringstream text;
            write_float_text(text, source);
            emit(output_path(g, gen_output, "signal.txt"), text.str(), out);
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace chaosmab

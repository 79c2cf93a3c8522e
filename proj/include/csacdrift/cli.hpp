#ifndef CSACDRIFT_CLI_HPP
#define CSACDRIFT_CLI_HPP

// Command implementations behind the `csacdrift` tool. Kept in the header so
// tests can drive the commands in-process through run_cli().

#include "csacdrift/error.hpp"
#include "csacdrift/geometry.hpp"
#include "csacdrift/models.hpp"
#include "csacdrift/quality.hpp"
#include "csacdrift/random.hpp"
#include "csacdrift/simulator.hpp"
#include "csacdrift/timeseries.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace csacdrift::cli {

inline constexpr std::string_view kToolVersion = "0.3.0";
inline constexpr const char* kOutDirEnv = "CSACDRIFT_OUT_DIR";
inline constexpr std::size_t kDefaultFitCount = 10801;

enum ExitCode : int { ok = 0, usage = 2, io = 3, data = 4 };

namespace fs = std::filesystem;

/// Failure carrying the exit code it maps to.
struct Failure : std::runtime_error {
    Failure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
    int code;
};

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument:
    case ErrorKind::bounds:
        return usage;
    default:
        return data;
    }
}

inline fs::path default_out_dir() {
    if (const char* env = std::getenv(kOutDirEnv); env && *env) {
        return env;
    }
    return ".";
}

inline std::string read_file(const fs::path& path, int missing_code) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Failure(missing_code, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_config(const fs::path& path) {
    const auto text = read_file(path, usage);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // e.byte is 1-based; report the line it falls on as well
        const auto upto = text.substr(0, std::min<std::size_t>(e.byte, text.size()));
        const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
        throw Failure(usage, path.string() + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
    }
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw Failure(io, "cannot create output directory " + dir.string());
    }
}

inline void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Failure(io, "cannot write " + path.string());
    }
    out << content;
    out.close();
    if (!out) {
        throw Failure(io, "error while writing " + path.string());
    }
}

inline MeasurementSeries load_series(const fs::path& path, std::optional<double> cadence_s) {
    const auto text = read_file(path, io);
    try {
        return parse_series(std::string_view(text), cadence_s, path.filename().string());
    } catch (const Error& e) {
        throw Failure(data, path.string() + (e.line() ? ":" + std::to_string(*e.line()) : std::string()) + ": " +
                                e.what());
    }
}

/// What was run, with which inputs, and what it produced. Written next to
/// the outputs of every command.
struct RunManifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::optional<std::uint64_t> seed;
    double wall_clock_s = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j{{"command", command},
                         {"config", config},
                         {"inputs", inputs},
                         {"outputs", outputs},
                         {"tool_version", std::string(kToolVersion)},
                         {"rng", std::string(kRngName)},
                         {"wall_clock_s", wall_clock_s}};
        j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
        return j;
    }
};

class Timer {
public:
    double elapsed_s() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void write_manifest(const fs::path& dir, RunManifest m, const Timer& timer) {
    m.wall_clock_s = timer.elapsed_s();
    write_file(dir / ("manifest_" + m.command + ".json"), m.to_json().dump(2) + "\n");
}

inline SimulationConfig load_simulation_config(const std::optional<fs::path>& config_path, std::optional<int> preset) {
    nlohmann::json j;
    if (config_path) {
        j = read_config(*config_path);
    } else if (preset) {
        j = {{"scenario", {{"preset", *preset}}}};
    } else {
        throw Failure(usage, "either --config or --preset is required");
    }
    try {
        return simulation_config_from_json(j);
    } catch (const Error& e) {
        throw Failure(usage, (config_path ? config_path->string() + ": " : std::string()) + e.what());
    }
}

inline std::string dataset_file_name(const std::string& label) {
    std::string out = label;
    std::replace(out.begin(), out.end(), '/', '_');
    return out + ".csv";
}

// ---------------------------------------------------------------------------

struct SimulateOptions {
    std::optional<fs::path> config;
    std::optional<int> preset;
    std::optional<std::size_t> replicates;
    std::optional<std::uint64_t> seed;
    fs::path out;
};

inline int cmd_simulate(const SimulateOptions& opt) {
    const Timer timer;
    auto cfg = load_simulation_config(opt.config, opt.preset);
    if (opt.replicates) {
        if (*opt.replicates < 1) {
            throw Failure(usage, "--replicates must be at least 1");
        }
        cfg.replicates = *opt.replicates;
    }
    if (opt.seed) {
        cfg.scenario.seed = *opt.seed;
    }

    const auto datasets = replicate(cfg.scenario, cfg.clock, cfg.constellation, cfg.replicates);
    ensure_dir(opt.out);
    RunManifest m{"simulate", to_json(cfg), {}, {}, cfg.scenario.seed, 0.0};
    if (opt.config) {
        m.inputs.push_back(opt.config->string());
    }
    for (const auto& ds : datasets) {
        const auto path = opt.out / dataset_file_name(ds.label());
        write_file(path, emit_series(ds));
        m.outputs.push_back(path.string());
    }
    write_manifest(opt.out, std::move(m), timer);
    return ok;
}

struct QualityOptions {
    std::vector<fs::path> datasets;
    std::string mode = "tdop";
    std::vector<double> thresholds{1.25, 2.0};
    double cadence_s = 2.0;
    fs::path out;
};

inline int cmd_quality(const QualityOptions& opt) {
    const Timer timer;
    if (opt.datasets.size() < 2) {
        throw Failure(usage, "quality needs at least 2 datasets, got " + std::to_string(opt.datasets.size()));
    }
    QualityBinSpec spec;
    if (opt.mode == "tdop") {
        spec.mode = QualityBinSpec::Mode::by_tdop;
    } else if (opt.mode == "n_vis" || opt.mode == "nvis") {
        spec.mode = QualityBinSpec::Mode::by_n_vis;
    } else {
        throw Failure(usage, "--mode must be tdop or n_vis");
    }
    spec.tdop_thresholds = opt.thresholds;

    std::vector<MeasurementSeries> series;
    for (const auto& p : opt.datasets) {
        series.push_back(load_series(p, opt.cadence_s));
    }
    const auto report = stratified_quality(series, spec);

    ensure_dir(opt.out);
    std::ostringstream csv;
    write_csv(report, csv);
    const auto csv_path = opt.out / "quality_report.csv";
    const auto json_path = opt.out / "quality_report.json";
    write_file(csv_path, csv.str());
    write_file(json_path, to_json(report).dump(2) + "\n");

    RunManifest m{"quality",
                  {{"mode", std::string(to_string(spec.mode))}, {"thresholds", spec.tdop_thresholds},
                   {"cadence_s", opt.cadence_s}},
                  {},
                  {csv_path.string(), json_path.string()},
                  std::nullopt,
                  0.0};
    for (const auto& p : opt.datasets) {
        m.inputs.push_back(p.string());
    }
    write_manifest(opt.out, std::move(m), timer);
    return ok;
}

struct CoastOptions {
    fs::path dataset;
    std::size_t fit_count = kDefaultFitCount;
    std::vector<int> degrees{1, 2, 3, 4};
    std::vector<std::string> schemes{"uniform", "visnum_ratio", "inverse_tdop"};
    std::optional<int> n_max;
    double cadence_s = 2.0;
    fs::path out;
};

/// Per-epoch truth vs. the best model over both windows, for plotting.
inline std::string prediction_csv(const MeasurementSeries& series, std::size_t fit_count, const DriftModel& model) {
    std::ostringstream out;
    out << "t_rel_s,offset_ns,predicted_ns,residual_ns,window\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const double p = predict(model, s.epoch.t_rel_s);
        out << detail::format_shortest(s.epoch.t_rel_s) << ',' << detail::format_fixed(s.offset_ns, 6) << ','
            << detail::format_fixed(p, 6) << ',' << detail::format_fixed(s.offset_ns - p, 6) << ','
            << (i < fit_count ? "fit" : "coast") << '\n';
    }
    return out.str();
}

inline int cmd_coast(const CoastOptions& opt) {
    const Timer timer;
    if (opt.degrees.empty()) {
        throw Failure(usage, "--degrees must list at least one degree");
    }
    for (int d : opt.degrees) {
        if (d < 1 || d > kMaxModelDegree) {
            throw Failure(usage, "--degrees: degree " + std::to_string(d) + " outside 1.." +
                                     std::to_string(kMaxModelDegree));
        }
    }
    std::vector<WeightScheme::Kind> kinds;
    for (const auto& name : opt.schemes) {
        const auto k = parse_scheme_kind(name);
        if (!k) {
            throw Failure(usage, "--schemes: unknown scheme '" + name + "'");
        }
        kinds.push_back(*k);
    }
    if (kinds.empty()) {
        throw Failure(usage, "--schemes must list at least one scheme");
    }

    const auto series = load_series(opt.dataset, opt.cadence_s);
    if (opt.fit_count == 0 || opt.fit_count >= series.size()) {
        throw Failure(usage, "--fit-count " + std::to_string(opt.fit_count) + " out of range for a dataset of " +
                                 std::to_string(series.size()) + " samples");
    }

    // n_max defaults to the largest count seen anywhere in the dataset
    int observed_max = 0;
    for (const auto& s : series) {
        observed_max = std::max(observed_max, s.n_vis);
    }
    const int n_max = opt.n_max.value_or(observed_max);
    std::vector<WeightScheme> schemes;
    for (auto k : kinds) {
        schemes.push_back(k == WeightScheme::Kind::visnum_ratio ? WeightScheme{k, n_max} : WeightScheme{k, std::nullopt});
    }

    const auto [fit_window, coast_window] = split_at(series, opt.fit_count);
    const auto report = model_select(fit_window, coast_window, opt.degrees, schemes);

    ensure_dir(opt.out);
    std::ostringstream csv;
    write_csv(report, csv);
    const auto csv_path = opt.out / "coast_report.csv";
    const auto json_path = opt.out / "coast_report.json";
    const auto pred_path = opt.out / "coast_prediction.csv";
    write_file(csv_path, csv.str());
    write_file(json_path, to_json(report).dump(2) + "\n");
    write_file(pred_path, prediction_csv(series, opt.fit_count, *report.rows.front().model));

    nlohmann::json scheme_json = nlohmann::json::array();
    for (const auto& s : schemes) {
        scheme_json.push_back(to_json(s));
    }
    RunManifest m{"coast",
                  {{"fit_count", opt.fit_count}, {"degrees", opt.degrees}, {"schemes", scheme_json},
                   {"cadence_s", opt.cadence_s}},
                  {opt.dataset.string()},
                  {csv_path.string(), json_path.string(), pred_path.string()},
                  std::nullopt,
                  0.0};
    write_manifest(opt.out, std::move(m), timer);
    return ok;
}

struct DopOptions {
    std::optional<fs::path> config;
    std::optional<int> preset;
    fs::path out;
};

inline std::string dop_csv(const std::vector<EpochQuality>& timeline) {
    std::ostringstream out;
    out << "t_rel_s,n_vis,tdop,gdop,pdop,hdop,vdop\n";
    for (const auto& q : timeline) {
        out << detail::format_shortest(q.t_rel_s) << ',' << q.n_vis;
        if (q.dops) {
            for (double v : {q.dops->tdop, q.dops->gdop, q.dops->pdop, q.dops->hdop, q.dops->vdop}) {
                out << ',' << detail::format_fixed(v, 6);
            }
        } else {
            out << ",,,,,";
        }
        out << '\n';
    }
    return out.str();
}

inline int cmd_dop(const DopOptions& opt) {
    const Timer timer;
    const auto cfg = load_simulation_config(opt.config, opt.preset);
    const auto timeline = sky_timeline(cfg.scenario, cfg.constellation);
    ensure_dir(opt.out);
    const auto path = opt.out / "dop_timeline.csv";
    write_file(path, dop_csv(timeline));
    RunManifest m{"dop",
                  {{"scenario", to_json(cfg.scenario)}, {"constellation", constellation_to_json(cfg.constellation)}},
                  {},
                  {path.string()},
                  std::nullopt,
                  0.0};
    if (opt.config) {
        m.inputs.push_back(opt.config->string());
    }
    write_manifest(opt.out, std::move(m), timer);
    return ok;
}

// ---------------------------------------------------------------------------

/// Parses `args` (without the program name) and runs the chosen command.
/// Diagnostics go to `err`; nothing is written to stdout.
inline int run_cli(const std::vector<std::string>& args, std::ostream& err = std::cerr) {
    CLI::App app{"Clock drift modelling for GPS-disciplined chip-scale atomic clocks", "csacdrift"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    const auto out_dir = default_out_dir();

    SimulateOptions sim;
    std::string sim_config, sim_out = out_dir.string();
    auto* simulate = app.add_subcommand("simulate", "simulate replicate datasets for a scenario");
    simulate->add_option("-c,--config", sim_config, "JSON simulation config");
    simulate->add_option("--preset", sim.preset, "preset scenario 1-3 (instead of --config)")->check(CLI::Range(1, 3));
    simulate->add_option("-k,--replicates", sim.replicates, "number of datasets");
    simulate->add_option("--seed", sim.seed, "override the scenario seed");
    simulate->add_option("-o,--out", sim_out, "output directory (default $" + std::string(kOutDirEnv) + " or .)");

    QualityOptions qual;
    std::vector<std::string> qual_paths;
    std::string qual_out = out_dir.string();
    auto* quality = app.add_subcommand("quality", "stratified noise variance over aligned datasets");
    quality->add_option("datasets", qual_paths, "dataset CSVs (at least 2)")->required();
    quality->add_option("--mode", qual.mode, "tdop or n_vis")->capture_default_str();
    quality->add_option("--thresholds", qual.thresholds, "TDOP bin edges")->delimiter(',')->capture_default_str();
    quality->add_option("--cadence", qual.cadence_s, "expected sample spacing in s")->capture_default_str();
    quality->add_option("-o,--out", qual_out, "output directory");

    CoastOptions coast;
    std::string coast_path, coast_out = out_dir.string();
    auto* coast_cmd = app.add_subcommand("coast", "fit drift models and score them over the coasting window");
    coast_cmd->add_option("dataset", coast_path, "dataset CSV")->required();
    coast_cmd->add_option("--fit-count", coast.fit_count, "samples in the fit window")->capture_default_str();
    coast_cmd->add_option("--degrees", coast.degrees, "polynomial degrees")->delimiter(',')->capture_default_str();
    coast_cmd->add_option("--schemes", coast.schemes, "uniform, visnum_ratio (visnum), inverse_tdop (inv_tdop)")
        ->delimiter(',')
        ->capture_default_str();
    coast_cmd->add_option("--n-max", coast.n_max, "n_max for visnum_ratio (default: largest n_vis in the dataset)");
    coast_cmd->add_option("--cadence", coast.cadence_s, "expected sample spacing in s")->capture_default_str();
    coast_cmd->add_option("-o,--out", coast_out, "output directory");

    DopOptions dop;
    std::string dop_config, dop_out = out_dir.string();
    auto* dop_cmd = app.add_subcommand("dop", "per-epoch satellite count and DOP timeline for a scenario");
    dop_cmd->add_option("-c,--config", dop_config, "JSON config with a scenario");
    dop_cmd->add_option("--preset", dop.preset, "preset scenario 1-3 (instead of --config)")->check(CLI::Range(1, 3));
    dop_cmd->add_option("-o,--out", dop_out, "output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream sink;
        const int rc = app.exit(e, sink, err);
        if (rc == 0) {
            err << sink.str(); // help and version text
            return ok;
        }
        return usage;
    }

    try {
        if (*simulate) {
            if (!sim_config.empty()) {
                sim.config = sim_config;
            }
            sim.out = sim_out;
            return cmd_simulate(sim);
        }
        if (*quality) {
            qual.datasets.assign(qual_paths.begin(), qual_paths.end());
            qual.out = qual_out;
            return cmd_quality(qual);
        }
        if (*coast_cmd) {
            coast.dataset = coast_path;
            coast.out = coast_out;
            return cmd_coast(coast);
        }
        if (!dop_config.empty()) {
            dop.config = dop_config;
        }
        dop.out = dop_out;
        return cmd_dop(dop);
    } catch (const Failure& f) {
        err << "csacdrift: " << f.what() << '\n';
        return f.code;
    } catch (const Error& e) {
        err << "csacdrift: " << to_string(e.kind()) << " error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::bad_alloc&) {
        err << "csacdrift: out of memory\n";
        return data;
    }
}

} // namespace csacdrift::cli

#endif

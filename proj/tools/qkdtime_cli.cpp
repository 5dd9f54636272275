// qkdtime: command-line front end.
//
//   qkdtime keygen      write mock key material (file or KMS directory)
//   qkdtime run         one encrypted round-trip experiment
//   qkdtime sweep       every noise model, with and without the phase bound
//   qkdtime adev        Allan deviation of a CSV column
//   qkdtime linkbudget  quantum channel feasibility report
//   qkdtime session     a standalone White Rabbit sync session
//
// Exit codes: 0 ok, 2 configuration error, 3 key exhaustion, 4 I/O error.

#include "qkdtime/config.hpp"
#include "qkdtime/errors.hpp"
#include "qkdtime/experiment.hpp"
#include "qkdtime/keystream.hpp"
#include "qkdtime/qkdlink.hpp"
#include "qkdtime/stability.hpp"
#include "qkdtime/wrptp.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/os.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace qkdtime;

enum ExitCode : int { kOk = 0, kConfig = 2, kKeyExhausted = 3, kIo = 4 };

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> model;
    std::optional<double> steps;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config_file, "Config file (section.key = value lines)");
    cmd->add_option("-s,--set", o.overrides, "Override a config key, e.g. --set model.C=8")->allow_extra_args(false);
    cmd->add_option("--seed", o.seed, "Base seed for key and noise");
    cmd->add_option("--model", o.model, "Noise model: white, rw, rw_m, rw_s");
    cmd->add_option("--steps", o.steps, "Encrypted dwell steps (sets duration_s)");
    cmd->add_option("-o,--out", o.out, "Output directory");
}

Config load_config(const CommonOptions& o) {
    Config config = o.config_file.empty() ? Config{} : Config::from_file(o.config_file);
    for (const auto& assignment : o.overrides) config.apply_override(assignment);
    if (o.seed) {
        config.set("seed", std::to_string(*o.seed));
        if (!config.has("key.seed")) config.set("key.seed", std::to_string(*o.seed));
    }
    if (o.model) config.set("model.kind", *o.model);
    if (o.out) config.set("output.dir", *o.out);
    return config;
}

experiment::ExperimentConfig experiment_config(const CommonOptions& o) {
    Config config = load_config(o);
    auto e = experiment::ExperimentConfig::from_config(config);
    config.require_all_used();
    if (o.steps) e.duration_s = *o.steps * e.dwell_s;
    e.validate();
    return e;
}

int cmd_keygen(std::uint64_t seed, std::size_t digits, const std::string& out, const std::string& kms_dir,
               const std::string& key_id) {
    if (out.empty() == kms_dir.empty()) throw ConfigError("keygen needs exactly one of --out or --kms");
    const std::string id = key_id.empty() ? fmt::format("key-{}", seed) : key_id;
    const auto stream = keystream::mock_qkd_source(seed, digits, id);
    if (!out.empty()) {
        keystream::save_keys(stream, out);
        fmt::print("wrote {} digits to {}\n", digits, out);
    } else {
        auto store = keystream::KmsStore::open(kms_dir);
        store.deposit(stream);
        fmt::print("deposited key '{}' ({} digits) in {}\n", id, digits, kms_dir);
    }
    return kOk;
}

int cmd_run(const CommonOptions& o) {
    const auto config = experiment_config(o);
    const auto result = experiment::run_experiment(config);
    experiment::emit_outputs(result, config.output_dir);
    fmt::print("{}", experiment::format_summary(result));
    fmt::print("outputs in {}\n", config.output_dir.string());
    return kOk;
}

int cmd_sweep(const CommonOptions& o, const std::vector<std::string>& kinds_text, double bound, unsigned jobs) {
    const auto config = experiment_config(o);
    std::vector<phasecodec::NoiseKind> kinds;
    for (const auto& k : kinds_text) kinds.push_back(phasecodec::parse_noise_kind(k));
    const auto entries = experiment::sweep_noise_models(config, kinds, {false, true}, bound, jobs);

    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", config.output_dir.string(), ec.message()));
    const auto table_path = config.output_dir / "sweep.csv";
    try {
        auto table = fmt::output_file(table_path.string());
        table.print("model,bounded,tic2_std_ns,adev2_tau0,slope_tic2,class_tic2,decorrelation_steps\n");
        fmt::print("{:<6} {:<8} {:>12} {:>10} {:>8}  {}\n", "model", "bounded", "tic2 std ns", "slope", "decor", "class");
        for (const auto& entry : entries) {
            const auto name = phasecodec::noise_kind_name(entry.kind);
            const auto dir = config.output_dir / fmt::format("{}{}", name, entry.bounded ? "_bounded" : "");
            experiment::emit_outputs(entry.result, dir);
            const auto& s = entry.result.summary;
            const auto segment = entry.result.encrypted_segment(entry.result.tic2);
            const std::size_t decor = segment.size() >= 100 ? stability::decorrelation_steps(segment) : 0;
            table.print("{},{},{:.6f},{:.9e},{:.4f},{},{}\n", name, entry.bounded ? 1 : 0, s.tic2_std_ns,
                        entry.result.adev2.points.front().adev, s.slope2, stability::noise_class_name(s.class2), decor);
            fmt::print("{:<6} {:<8} {:>12.4f} {:>10.3f} {:>8}  {}\n", name, entry.bounded ? "yes" : "no",
                       s.tic2_std_ns, s.slope2, decor, stability::noise_class_name(s.class2));
        }
    } catch (const std::system_error& e) {
        throw IoError(fmt::format("cannot write '{}': {}", table_path.string(), e.what()));
    }
    fmt::print("outputs in {}\n", config.output_dir.string());
    return kOk;
}

int cmd_adev(const std::string& input, const std::string& column, double tau0, const std::string& out) {
    stability::TimeErrorSeries series;
    series.samples_ns = experiment::read_csv_column(input, column);
    series.tau0_s = tau0;
    const auto curve = stability::overlapping_adev(series);
    if (!out.empty()) experiment::write_adev_csv(curve, out);
    else {
        fmt::print("tau_s,adev,sigma_adev\n");
        for (const auto& p : curve.points) fmt::print("{:.6g},{:.9e},{:.9e}\n", p.tau_s, p.adev, p.sigma_adev);
    }
    if (curve.points.size() >= 3) {
        const double slope = stability::fit_loglog_slope(curve);
        fmt::print(stderr, "slope {:.3f} ({})\n", slope, stability::noise_class_name(stability::classify_noise(slope)));
    }
    if (series.size() >= 100) {
        fmt::print(stderr, "decorrelation steps {}\n", stability::decorrelation_steps(series));
    }
    return kOk;
}

int cmd_linkbudget(const qkdlink::ChannelParams& params, const std::string& csv_path) {
    const auto report = qkdlink::feasibility_report(params);
    qkdlink::print_report(std::cout, params, report);
    const std::string csv = qkdlink::report_csv(params, report);
    if (csv_path.empty()) {
        std::cout << '\n' << csv;
    } else {
        std::ofstream out(csv_path);
        if (!(out << csv)) throw IoError(fmt::format("cannot write '{}'", csv_path));
    }
    return kOk;
}

int cmd_session(const CommonOptions& o) {
    Config config = load_config(o);
    wrptp::LinkModel link;
    link.delay_forward_ns = config.get_int("link.delay_fwd_ns", 0);
    link.delay_backward_ns = config.get_int("link.delay_bwd_ns", 0);
    link.jitter_ns_rms = config.get_double("link.jitter_ns", 0.0);
    link.quantization_ns = config.get_int("link.quantization_ns", 0);
    link.turnaround_ns = config.get_int("link.turnaround_ns", 1000);
    const auto seed = config.get_uint("seed", 1);
    link.rng_seed = derive_seed(seed, 3);

    wrptp::SimClock master;
    master.rng_seed = derive_seed(seed, 1);
    master.jitter_ns_rms = config.get_double("master.jitter_ns", 0.0);
    master.drift_ppb = config.get_double("master.drift_ppb", 0.0);
    wrptp::SimClock slave;
    slave.rng_seed = derive_seed(seed, 2);
    slave.true_offset_ns = config.get_int("slave.offset_ns", 0);
    slave.jitter_ns_rms = config.get_double("slave.jitter_ns", 0.0);
    slave.drift_ppb = config.get_double("slave.drift_ppb", 0.0);

    wrptp::SessionConfig session;
    session.rounds = config.get_uint("session.rounds", 100);
    session.interval_s = config.get_double("session.interval_s", 1.0);
    session.servo_gain = config.get_double("servo.gain", 1.0);
    session.calibration_bias_ns = config.get_double("calib.bias_ns", 0.0);
    session.synce_locked = config.get_bool("synce", true);
    const std::string out = config.get_string("output.dir", "");
    config.require_all_used();

    const auto result = wrptp::run_sync_session(master, slave, link, session);
    if (out.empty()) {
        const auto path = std::filesystem::path("session.csv");
        wrptp::write_session_csv(result, path);
        fmt::print("wrote {}\n", path.string());
    } else {
        std::filesystem::create_directories(out);
        wrptp::write_session_csv(result, std::filesystem::path(out) / "session.csv");
        fmt::print("wrote {}\n", (std::filesystem::path(out) / "session.csv").string());
    }
    const auto residuals = result.residual_series();
    fmt::print("residual mean {:.3f} ns, std {:.3f} ns over {} rounds\n", stability::mean(residuals.samples_ns),
               stability::stddev(residuals.samples_ns), residuals.size());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"QKD-protected White Rabbit time dissemination simulator"};
    app.require_subcommand(1);

    std::uint64_t keygen_seed = 1;
    std::size_t keygen_digits = 30000;
    std::string keygen_out, keygen_kms, keygen_id;
    auto* keygen = app.add_subcommand("keygen", "Write mock QKD key material");
    keygen->add_option("--seed", keygen_seed, "Generator seed");
    keygen->add_option("-n,--digits", keygen_digits, "Number of hex digits")->check(CLI::PositiveNumber);
    keygen->add_option("-o,--out", keygen_out, "Key file to write");
    keygen->add_option("--kms", keygen_kms, "KMS directory to deposit into");
    keygen->add_option("--id", keygen_id, "Key id (default key-<seed>)");

    CommonOptions run_opts;
    auto* run = app.add_subcommand("run", "Run one encrypted round-trip experiment");
    add_common(run, run_opts);

    CommonOptions sweep_opts;
    std::vector<std::string> sweep_kinds{"white", "rw", "rw_m", "rw_s"};
    double sweep_bound = 360.0;
    unsigned sweep_jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "Run every noise model with and without the phase bound");
    add_common(sweep, sweep_opts);
    sweep->add_option("--kinds", sweep_kinds, "Noise models to include");
    sweep->add_option("--bound", sweep_bound, "Bound amplitude R in degrees for the bounded runs");
    sweep->add_option("-j,--jobs", sweep_jobs, "Parallel runs");

    std::string adev_input, adev_column, adev_out;
    double adev_tau0 = 1.0;
    auto* adev = app.add_subcommand("adev", "Overlapping Allan deviation of a CSV column (ns)");
    adev->add_option("input", adev_input, "CSV file")->required();
    adev->add_option("--column", adev_column, "Column name or index (default: last)");
    adev->add_option("--tau0", adev_tau0, "Sampling interval in seconds");
    adev->add_option("-o,--out", adev_out, "Write the curve here instead of stdout");

    qkdlink::ChannelParams channel;
    std::string linkbudget_csv;
    auto* linkbudget = app.add_subcommand("linkbudget", "Quantum channel feasibility report");
    linkbudget->add_option("--loss-db", channel.loss_db, "Channel loss (dB)");
    linkbudget->add_option("--efficiency", channel.det_efficiency, "Detector efficiency");
    linkbudget->add_option("--dark-cps", channel.dark_rate_cps, "Dark count rate");
    linkbudget->add_option("--background-cps", channel.background_rate_cps, "Stray background rate");
    linkbudget->add_option("--rep-rate", channel.rep_rate_hz, "Pulse repetition rate (Hz)");
    linkbudget->add_option("--mu", channel.mean_photon_mu, "Mean photon number per pulse");
    linkbudget->add_option("--dead-time", channel.dead_time_s, "Detector dead time (s)");
    linkbudget->add_option("--csv", linkbudget_csv, "Write the CSV report here");

    CommonOptions session_opts;
    auto* session = app.add_subcommand("session", "Standalone White Rabbit sync session");
    add_common(session, session_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*keygen) return cmd_keygen(keygen_seed, keygen_digits, keygen_out, keygen_kms, keygen_id);
        if (*run) return cmd_run(run_opts);
        if (*sweep) return cmd_sweep(sweep_opts, sweep_kinds, sweep_bound, sweep_jobs);
        if (*adev) return cmd_adev(adev_input, adev_column, adev_tau0, adev_out);
        if (*linkbudget) return cmd_linkbudget(channel, linkbudget_csv);
        if (*session) return cmd_session(session_opts);
    } catch (const KeyExhaustedError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kKeyExhausted;
    } catch (const IoError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kConfig;
    }
    return kOk;
}

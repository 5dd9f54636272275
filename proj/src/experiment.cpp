#include "qkdtime/experiment.hpp"

#include "qkdtime/errors.hpp"
#include "qkdtime/keystream.hpp"
#include "qkdtime/random.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace qkdtime::experiment {

namespace {

using keystream::HexKeyStream;
using keystream::KmsStore;
using keystream::Party;
using phasecodec::Direction;
using phasecodec::NoiseKind;
using phasecodec::PhaseSchedule;
using stability::TimeErrorSeries;

// Independent random streams carved out of the run seed.
enum SeedStream : std::uint64_t {
    kHopBaMaster = 1,
    kHopBaSlave,
    kHopBaLink,
    kHopAbMaster,
    kHopAbSlave,
    kHopAbLink,
    kCounterJitter,
};

HopConfig read_hop(const Config& c, const std::string& prefix) {
    HopConfig hop;
    auto& link = hop.link;
    link.delay_forward_ns = c.get_int(prefix + "link.delay_fwd_ns", "link.delay_fwd_ns", 0);
    link.delay_backward_ns = c.get_int(prefix + "link.delay_bwd_ns", "link.delay_bwd_ns", 0);
    link.jitter_ns_rms = c.get_double(prefix + "link.jitter_ns", "link.jitter_ns", 0.0);
    link.quantization_ns = c.get_int(prefix + "link.quantization_ns", "link.quantization_ns", 0);
    link.turnaround_ns = c.get_int(prefix + "link.turnaround_ns", "link.turnaround_ns", 1000);
    hop.servo_gain = c.get_double(prefix + "servo.gain", "servo.gain", 1.0);
    hop.calibration_bias_ns = c.get_double(prefix + "calib.bias_ns", "calib.bias_ns", 0.0);
    hop.slave_initial_offset_ns = c.get_int(prefix + "slave.offset_ns", 0);
    hop.slave_drift_ppb = c.get_double(prefix + "slave.drift_ppb", 0.0);
    hop.slave_jitter_ns = c.get_double(prefix + "slave.jitter_ns", 0.0);
    hop.synce_locked = c.get_bool(prefix + "synce", true);
    return hop;
}

wrptp::SessionResult run_hop(const HopConfig& hop, const wrptp::SimClock& master, std::size_t rounds,
                             double interval_s, std::uint64_t slave_seed, std::uint64_t link_seed) {
    wrptp::SimClock slave;
    slave.true_offset_ns = hop.slave_initial_offset_ns;
    slave.drift_ppb = hop.slave_drift_ppb;
    slave.jitter_ns_rms = hop.slave_jitter_ns;
    slave.rng_seed = slave_seed;

    wrptp::LinkModel link = hop.link;
    link.rng_seed = link_seed;

    wrptp::SessionConfig session;
    session.rounds = rounds;
    session.interval_s = interval_s;
    session.servo_gain = hop.servo_gain;
    session.calibration_bias_ns = hop.calibration_bias_ns;
    session.synce_locked = hop.synce_locked;
    return wrptp::run_sync_session(master, slave, link, session);
}

std::vector<std::int64_t> to_picoseconds(const wrptp::SessionResult& session) {
    std::vector<std::int64_t> out;
    out.reserve(session.rounds.size());
    for (const auto& r : session.rounds) out.push_back(std::llround(r.residual_ns * 1000.0));
    return out;
}

TimeErrorSeries from_picoseconds(const std::vector<std::int64_t>& ps, double tau0_s) {
    TimeErrorSeries series;
    series.tau0_s = tau0_s;
    series.samples_ns.reserve(ps.size());
    for (const auto v : ps) series.samples_ns.push_back(static_cast<double>(v) * 1e-3);
    return series;
}

PhaseSchedule full_schedule(HexKeyStream& key, const ExperimentConfig& config) {
    PhaseSchedule encrypted = phasecodec::generate_schedule(key, config.model, config.encrypted_steps(),
                                                            config.dwell_s, config.carrier_hz);
    PhaseSchedule full;
    full.dwell_s = config.dwell_s;
    full.carrier_hz = config.carrier_hz;
    full.phases_deg.assign(config.calibration_steps, 0.0);
    full.phases_deg.insert(full.phases_deg.end(), encrypted.phases_deg.begin(), encrypted.phases_deg.end());
    return full;
}

KmsStore provision_store(const KeyConfig& key, std::string& key_id, std::size_t needed) {
    switch (key.source) {
        case KeySource::Mock: {
            KmsStore store;
            key_id = key.key_id.empty() ? fmt::format("mock-{}", key.seed) : key.key_id;
            const std::size_t digits = key.digits == 0 ? std::max<std::size_t>(needed, 1) : key.digits;
            store.deposit(keystream::mock_qkd_source(key.seed, digits, key_id));
            return store;
        }
        case KeySource::File: {
            KmsStore store;
            HexKeyStream stream = keystream::load_keys(key.file);
            key_id = stream.key_id();
            store.deposit(stream);
            return store;
        }
        case KeySource::Kms: {
            if (key.key_id.empty()) throw ConfigError("key.source = kms needs key.id");
            key_id = key.key_id;
            return KmsStore::open(key.kms_dir);
        }
    }
    throw ConfigError("unknown key source");
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& body) {
    try {
        auto out = fmt::output_file(path.string());
        body(out);
    } catch (const std::system_error& e) {
        throw IoError(fmt::format("cannot write '{}': {}", path.string(), e.what()));
    }
}

}  // namespace

std::size_t ExperimentConfig::encrypted_steps() const {
    if (!(dwell_s > 0.0)) throw ConfigError(fmt::format("dwell_s must be positive, got {}", dwell_s));
    const double ratio = duration_s / dwell_s;
    const double rounded = std::round(ratio);
    if (rounded < 0.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded)) {
        throw ConfigError(fmt::format("duration_s {} is not a whole number of {} s dwells", duration_s, dwell_s));
    }
    return static_cast<std::size_t>(rounded);
}

void ExperimentConfig::validate() const {
    model.validate();
    if (!(carrier_hz > 0.0)) throw ConfigError(fmt::format("carrier_hz must be positive, got {}", carrier_hz));
    if (encrypted_steps() < 3) throw ConfigError("need at least 3 encrypted dwell steps for ADEV");
    if (decrypted_jitter_ns < 0.0) throw ConfigError("tic.jitter_ns must be non-negative");
    for (const HopConfig* hop : {&hop_ba, &hop_ab}) {
        if (!(hop->servo_gain > 0.0 && hop->servo_gain <= 1.0)) {
            throw ConfigError(fmt::format("servo gain must be in (0, 1], got {}", hop->servo_gain));
        }
    }
}

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
    ExperimentConfig e;

    const std::string source = c.get_string("key.source", "mock");
    if (source == "mock") e.key.source = KeySource::Mock;
    else if (source == "file") e.key.source = KeySource::File;
    else if (source == "kms") e.key.source = KeySource::Kms;
    else throw ConfigError(fmt::format("key.source must be mock, file or kms, got '{}'", source));
    e.key.seed = c.get_uint("key.seed", e.key.seed);
    e.key.digits = c.get_uint("key.digits", 0);
    e.key.file = c.get_string("key.file", "");
    e.key.kms_dir = c.get_string("key.kms_dir", "");
    e.key.key_id = c.get_string("key.id", "");
    if (c.has("decoder.key_seed")) e.key.decoder_seed = c.get_uint("decoder.key_seed", 0);

    auto& m = e.model;
    m.kind = phasecodec::parse_noise_kind(c.get_string("model.kind", "white"));
    m.scale_c = c.get_double("model.C", m.scale_c);
    const auto threshold = c.get_int("model.T", m.threshold);
    if (threshold < 0 || threshold > 15) throw ConfigError(fmt::format("model.T must be in [0, 15], got {}", threshold));
    m.threshold = static_cast<std::uint8_t>(threshold);
    m.lag_m = c.get_uint("model.M", m.lag_m);
    m.memory_s = c.get_uint("model.S", m.memory_s);
    m.bias_deg = c.get_double("model.bias_deg", m.bias_deg);
    m.bound_deg = c.get_optional_double("model.bound_deg");
    const std::string mode = c.get_string("model.bound_mode", "raw");
    if (mode == "raw") m.bound_mode = phasecodec::BoundMode::RawState;
    else if (mode == "bounded") m.bound_mode = phasecodec::BoundMode::BoundedState;
    else throw ConfigError(fmt::format("model.bound_mode must be raw or bounded, got '{}'", mode));

    e.dwell_s = c.get_double("dwell_s", e.dwell_s);
    e.carrier_hz = c.get_double("carrier_hz", e.carrier_hz);
    e.duration_s = c.get_double("duration_s", e.duration_s);
    e.calibration_steps = c.get_uint("calib.steps", e.calibration_steps);
    e.hop_ba = read_hop(c, "hop1.");
    e.hop_ab = read_hop(c, "hop2.");
    e.decrypted_jitter_ns = c.get_double("tic.jitter_ns", e.decrypted_jitter_ns);
    e.reference_drift_ppb = c.get_double("reference.drift_ppb", e.reference_drift_ppb);
    e.seed = c.get_uint("seed", e.seed);
    e.output_dir = c.get_string("output.dir", e.output_dir.string());
    return e;
}

TimeErrorSeries ExperimentResult::encrypted_segment(const TimeErrorSeries& series) const {
    TimeErrorSeries out;
    out.tau0_s = series.tau0_s;
    const auto skip = std::min(calibration_steps, series.size());
    out.samples_ns.assign(series.samples_ns.begin() + static_cast<std::ptrdiff_t>(skip), series.samples_ns.end());
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::size_t total = config.total_steps();
    const std::size_t needed = phasecodec::key_digits_needed(config.model.kind, config.encrypted_steps());

    std::string key_id;
    KmsStore store = provision_store(config.key, key_id, needed);
    HexKeyStream key_a = keystream::kms_get(store, key_id, Party::A);
    HexKeyStream key_b = config.key.decoder_seed
        ? keystream::mock_qkd_source(*config.key.decoder_seed, std::max<std::size_t>(needed, 1), "decoder")
        : keystream::kms_get(store, key_id, Party::B);

    ExperimentResult result;
    result.calibration_steps = config.calibration_steps;
    result.schedule = full_schedule(key_a, config);
    const PhaseSchedule decoder_schedule = full_schedule(key_b, config);

    wrptp::SimClock reference;
    reference.drift_ppb = config.reference_drift_ppb;
    reference.rng_seed = derive_seed(config.seed, kHopBaMaster);
    result.hop_ba = run_hop(config.hop_ba, reference, total, config.dwell_s,
                            derive_seed(config.seed, kHopBaSlave), derive_seed(config.seed, kHopBaLink));

    wrptp::SimClock site_a_master;
    site_a_master.drift_ppb = config.reference_drift_ppb;
    site_a_master.rng_seed = derive_seed(config.seed, kHopAbMaster);
    result.hop_ab = run_hop(config.hop_ab, site_a_master, total, config.dwell_s,
                            derive_seed(config.seed, kHopAbSlave), derive_seed(config.seed, kHopAbLink));

    // Phase-time (ps, positive = early) of the signal at each stage. A counter
    // reads the edge delay against the reference, i.e. the negated phase-time.
    const auto at_a = to_picoseconds(result.hop_ba);
    auto encrypted = phasecodec::apply_schedule_ps(at_a, config.dwell_s, result.schedule, Direction::Encode);
    const auto hop_ab = to_picoseconds(result.hop_ab);
    for (std::size_t k = 0; k < total; ++k) encrypted[k] += hop_ab[k];
    const auto decrypted = phasecodec::apply_schedule_ps(encrypted, config.dwell_s, decoder_schedule, Direction::Decode);

    Rng counter_rng(derive_seed(config.seed, kCounterJitter));
    std::vector<std::int64_t> tic1_ps(total), tic2_ps(total);
    for (std::size_t k = 0; k < total; ++k) {
        const double jitter_ps = config.decrypted_jitter_ns * 1000.0 * counter_rng.gaussian();
        tic1_ps[k] = -decrypted[k] + std::llround(jitter_ps);
        tic2_ps[k] = -encrypted[k];
    }
    result.tic1 = from_picoseconds(tic1_ps, config.dwell_s);
    result.tic2 = from_picoseconds(tic2_ps, config.dwell_s);

    const TimeErrorSeries seg1 = result.encrypted_segment(result.tic1);
    const TimeErrorSeries seg2 = result.encrypted_segment(result.tic2);
    result.adev1 = stability::overlapping_adev(seg1);
    result.adev2 = stability::overlapping_adev(seg2);

    auto& s = result.summary;
    s.tic1_mean_ns = stability::mean(seg1.samples_ns);
    s.tic1_std_ns = stability::stddev(seg1.samples_ns);
    s.tic2_mean_ns = stability::mean(seg2.samples_ns);
    s.tic2_std_ns = stability::stddev(seg2.samples_ns);
    if (config.calibration_steps > 0) s.calibration_bias_ns = calibration_window(result, config.calibration_steps);
    const double a1 = result.adev1.points.front().adev;
    const double a2 = result.adev2.points.front().adev;
    s.adev_ratio_tau0 = a1 > 0.0 ? a2 / a1 : std::numeric_limits<double>::infinity();
    if (result.adev1.points.size() >= 3) {
        if (a1 > 0.0) {
            s.slope1 = stability::fit_loglog_slope(result.adev1);
            s.class1 = stability::classify_noise(s.slope1);
        }
        if (a2 > 0.0) {
            s.slope2 = stability::fit_loglog_slope(result.adev2);
            s.class2 = stability::classify_noise(s.slope2);
        }
    }
    return result;
}

double calibration_window(const ExperimentResult& result, std::size_t n_steps) {
    if (n_steps == 0) throw ConfigError("calibration window must cover at least one step");
    if (n_steps > result.tic2.size()) {
        throw ConfigError(fmt::format("calibration window of {} steps exceeds series of {}", n_steps, result.tic2.size()));
    }
    if (n_steps > result.calibration_steps) {
        throw ConfigError(fmt::format("calibration window of {} steps exceeds the {} unencrypted steps",
                                      n_steps, result.calibration_steps));
    }
    const std::span<const double> window(result.tic2.samples_ns.data(), n_steps);
    return stability::mean(window);
}

std::vector<SweepEntry> sweep_noise_models(const ExperimentConfig& base, const std::vector<NoiseKind>& kinds,
                                           const std::vector<bool>& bounded, double bound_deg, unsigned jobs) {
    std::vector<SweepEntry> entries;
    std::vector<ExperimentConfig> configs;
    for (const auto kind : kinds) {
        for (const bool b : bounded) {
            ExperimentConfig c = base;
            c.model.kind = kind;
            c.model.bound_deg = b ? std::optional<double>(bound_deg) : std::nullopt;
            configs.push_back(c);
            entries.push_back({kind, b, {}});
        }
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(configs.size());
    const auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                entries[i].result = run_experiment(configs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return entries;
}

void write_series_csv(const TimeErrorSeries& series, const std::filesystem::path& path) {
    write_file(path, [&](auto& out) {
        out.print("step_index,time_s,delay_ns\n");
        for (std::size_t k = 0; k < series.size(); ++k) {
            out.print("{},{:.3f},{:.3f}\n", k, static_cast<double>(k) * series.tau0_s, series.samples_ns[k]);
        }
    });
}

void write_adev_csv(const stability::AdevCurve& curve, const std::filesystem::path& path) {
    write_file(path, [&](auto& out) {
        out.print("tau_s,adev,sigma_adev\n");
        for (const auto& p : curve.points) out.print("{:.6g},{:.9e},{:.9e}\n", p.tau_s, p.adev, p.sigma_adev);
    });
}

std::string format_summary(const ExperimentResult& result) {
    const auto& s = result.summary;
    std::string out;
    out += fmt::format("samples                  {}\n", result.tic1.size());
    out += fmt::format("calibration_steps        {}\n", result.calibration_steps);
    out += fmt::format("tau0_s                   {}\n", result.tic1.tau0_s);
    out += fmt::format("tic1_mean_ns             {:.4f}\n", s.tic1_mean_ns);
    out += fmt::format("tic1_std_ns              {:.4f}\n", s.tic1_std_ns);
    out += fmt::format("tic2_mean_ns             {:.4f}\n", s.tic2_mean_ns);
    out += fmt::format("tic2_std_ns              {:.4f}\n", s.tic2_std_ns);
    if (s.calibration_bias_ns) {
        out += fmt::format("calibration_bias_ns      {:.4f}\n", *s.calibration_bias_ns);
        out += fmt::format("tic2_mean_minus_bias_ns  {:.4f}\n", s.tic2_mean_ns - *s.calibration_bias_ns);
    }
    out += fmt::format("adev_ratio_tau0          {:.3g}\n", s.adev_ratio_tau0);
    out += fmt::format("slope_tic1               {:.3f} ({})\n", s.slope1, stability::noise_class_name(s.class1));
    out += fmt::format("slope_tic2               {:.3f} ({})\n", s.slope2, stability::noise_class_name(s.class2));
    return out;
}

void emit_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));

    write_series_csv(result.tic1, dir / "tic1.csv");
    write_series_csv(result.tic2, dir / "tic2.csv");
    write_adev_csv(result.adev1, dir / "adev1.csv");
    write_adev_csv(result.adev2, dir / "adev2.csv");
    phasecodec::write_schedule_csv(result.schedule, dir / "schedule.csv");
    wrptp::write_session_csv(result.hop_ba, dir / "hop_ba.csv");
    wrptp::write_session_csv(result.hop_ab, dir / "hop_ab.csv");
    write_file(dir / "summary.txt", [&](auto& out) { out.print("{}", format_summary(result)); });

    const auto delay_plot = [&](const char* name, const char* title) {
        write_file(dir / fmt::format("{}.gp", name), [&](auto& out) {
            out.print("set datafile separator ','\n"
                      "set terminal pngcairo size 900,500\n"
                      "set output '{0}.png'\n"
                      "set xlabel 'time (s)'\n"
                      "set ylabel 'delay (ns)'\n"
                      "stats '{0}.csv' using 3 skip 1 nooutput\n"
                      "plot '{0}.csv' using 2:3 skip 1 with points pt 7 ps 0.3 title '{1}', \\\n"
                      "     STATS_mean with lines dt 2 lw 2 title 'mean'\n",
                      name, title);
        });
    };
    delay_plot("tic1", "decrypted (TIC1)");
    delay_plot("tic2", "encrypted (TIC2)");
    write_file(dir / "adev.gp", [&](auto& out) {
        out.print("set datafile separator ','\n"
                  "set terminal pngcairo size 900,600\n"
                  "set output 'adev.png'\n"
                  "set logscale xy\n"
                  "set format y '10^{{%L}}'\n"
                  "set xlabel 'averaging time (s)'\n"
                  "set ylabel 'Allan deviation (x 1e9)'\n"
                  "plot 'adev1.csv' using 1:2:3 skip 1 with yerrorbars pt 7 title 'TIC1 decrypted', \\\n"
                  "     'adev2.csv' using 1:2:3 skip 1 with yerrorbars pt 7 title 'TIC2 encrypted'\n");
    });
}

std::vector<double> read_csv_column(const std::filesystem::path& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));

    const auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.pop_back();
            while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.erase(field.begin());
            fields.push_back(field);
        }
        return fields;
    };
    const auto to_double = [](const std::string& s, double& v) {
        if (s.empty()) return false;
        char* end = nullptr;
        v = std::strtod(s.c_str(), &end);
        return end == s.c_str() + s.size();
    };

    std::vector<double> values;
    std::string line;
    std::optional<std::size_t> index;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line);
        if (first) {
            first = false;
            double probe = 0.0;
            const bool header = !fields.empty() && !to_double(fields.back(), probe);
            if (header) {
                if (column.empty()) {
                    index = fields.size() - 1;
                } else {
                    for (std::size_t i = 0; i < fields.size(); ++i) {
                        if (fields[i] == column) index = i;
                    }
                    if (!index && std::all_of(column.begin(), column.end(), ::isdigit)) index = std::stoul(column);
                    if (!index) throw ConfigError(fmt::format("column '{}' not in header of '{}'", column, path.string()));
                }
                continue;
            }
        }
        if (!index) {
            if (column.empty()) index = fields.size() - 1;
            else if (std::all_of(column.begin(), column.end(), ::isdigit)) index = std::stoul(column);
            else throw ConfigError(fmt::format("'{}' has no header; select the column by index", path.string()));
        }
        double v = 0.0;
        if (*index >= fields.size() || !to_double(fields[*index], v)) {
            throw ConfigError(fmt::format("{}:{}: no numeric value in column {}", path.string(), line_no, *index));
        }
        values.push_back(v);
    }
    return values;
}

}  // namespace qkdtime::experiment

#pragma once

#include "qkdtime/config.hpp"
#include "qkdtime/phasecodec.hpp"
#include "qkdtime/stability.hpp"
#include "qkdtime/wrptp.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qkdtime::experiment {

enum class KeySource { Mock, File, Kms };

struct KeyConfig {
    KeySource source = KeySource::Mock;
    std::uint64_t seed = 1;
    /// Mock key length; 0 means exactly what the run consumes.
    std::size_t digits = 0;
    std::filesystem::path file;
    std::filesystem::path kms_dir;
    std::string key_id;
    /// When set, the decoder uses an independent mock key with this seed
    /// instead of the shared one (eavesdropper / wrong-key scenario).
    std::optional<std::uint64_t> decoder_seed;
};

/// One White Rabbit hop: its link, servo and the slave's starting state.
struct HopConfig {
    wrptp::LinkModel link;
    double servo_gain = 1.0;
    double calibration_bias_ns = 0.0;
    wrptp::Nanoseconds slave_initial_offset_ns = 0;
    double slave_drift_ppb = 0.0;
    double slave_jitter_ns = 0.0;
    bool synce_locked = true;
};

struct ExperimentConfig {
    KeyConfig key;
    phasecodec::NoiseModelSpec model;
    double dwell_s = 5.0;
    double carrier_hz = 10e6;
    /// Encrypted duration; must be a whole number of dwell intervals.
    double duration_s = 2000 * 5.0;
    /// Leading dwell intervals sent without encryption to calibrate the bias.
    std::size_t calibration_steps = 180;
    HopConfig hop_ba;  // reference site B -> site A
    HopConfig hop_ab;  // site A -> site B, carries the encrypted signal
    /// White timestamping noise on the decrypted counter path, ns rms.
    double decrypted_jitter_ns = 0.045;
    double reference_drift_ppb = 0.0;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";

    std::size_t encrypted_steps() const;
    std::size_t total_steps() const { return calibration_steps + encrypted_steps(); }

    /// Throws ConfigError when the duration is not a whole number of dwells
    /// or a parameter is out of range.
    void validate() const;

    /// Reads every experiment key from `config`; missing keys keep defaults.
    static ExperimentConfig from_config(const Config& config);
};

struct ExperimentSummary {
    double tic1_mean_ns = 0.0;
    double tic1_std_ns = 0.0;
    double tic2_mean_ns = 0.0;  // encrypted segment only
    double tic2_std_ns = 0.0;
    std::optional<double> calibration_bias_ns;  // TIC2 mean over the unencrypted window
    double adev_ratio_tau0 = 0.0;                // adev2 / adev1 at tau0
    double slope1 = 0.0;
    double slope2 = 0.0;
    stability::NoiseClass class1 = stability::NoiseClass::Indeterminate;
    stability::NoiseClass class2 = stability::NoiseClass::Indeterminate;
};

struct ExperimentResult {
    stability::TimeErrorSeries tic1;  // decrypted path, full run
    stability::TimeErrorSeries tic2;  // encrypted path, full run
    std::size_t calibration_steps = 0;
    stability::AdevCurve adev1;  // encrypted segment only
    stability::AdevCurve adev2;
    phasecodec::PhaseSchedule schedule;  // encoder program, including the zero-phase window
    wrptp::SessionResult hop_ba;
    wrptp::SessionResult hop_ab;
    ExperimentSummary summary;

    /// Samples after the calibration window.
    stability::TimeErrorSeries encrypted_segment(const stability::TimeErrorSeries& series) const;
};

/// Reference -> WR hop B->A -> encoder (sign -1) -> WR hop A->B -> decoder
/// (sign +1) on the TIC1 path, nothing on the TIC2 path. Both counters read
/// the delay of their signal's edge against the reference.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Mean of TIC2 over the first `n_steps` samples. The window must be non-empty
/// and lie inside the unencrypted calibration window.
double calibration_window(const ExperimentResult& result, std::size_t n_steps);

struct SweepEntry {
    phasecodec::NoiseKind kind = phasecodec::NoiseKind::White;
    bool bounded = false;
    ExperimentResult result;
};

/// One run per (kind, bounded) pair. Every run uses the base seeds so the
/// panels are comparable; `bound_deg` applies to the bounded runs. Runs are
/// spread over `jobs` threads and returned in (kind, bounded) order.
std::vector<SweepEntry> sweep_noise_models(const ExperimentConfig& base, const std::vector<phasecodec::NoiseKind>& kinds,
                                           const std::vector<bool>& bounded, double bound_deg = 360.0,
                                           unsigned jobs = 1);

/// tic1.csv, tic2.csv, adev1.csv, adev2.csv, schedule.csv, hop_ba.csv,
/// hop_ab.csv, summary.txt and gnuplot scripts for the delay and ADEV plots.
void emit_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

/// Writes series as step_index,time_s,delay_ns.
void write_series_csv(const stability::TimeErrorSeries& series, const std::filesystem::path& path);

/// Writes tau_s,adev,sigma_adev.
void write_adev_csv(const stability::AdevCurve& curve, const std::filesystem::path& path);

/// Loads one numeric column of a CSV (header row optional). `column` is a
/// header name or zero-based index; empty selects the last column.
std::vector<double> read_csv_column(const std::filesystem::path& path, const std::string& column);

std::string format_summary(const ExperimentResult& result);

}  // namespace qkdtime::experiment

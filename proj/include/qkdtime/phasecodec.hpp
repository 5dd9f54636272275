#pragma once

#include "qkdtime/keystream.hpp"
#include "qkdtime/stability.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace qkdtime::phasecodec {

using keystream::DigitPair;
using keystream::DigitTriplet;
using keystream::HexKeyStream;
using stability::TimeErrorSeries;

enum class NoiseKind { White, RandomWalk, RandomWalkM, RandomWalkS };

std::string_view noise_kind_name(NoiseKind kind) noexcept;

/// Accepts "white", "rw", "rw_m", "rw_s" (case-insensitive). Throws ConfigError.
NoiseKind parse_noise_kind(std::string_view text);

/// How a phase-bound interacts with the recursion when `bound_deg` is set.
enum class BoundMode {
    /// The walk evolves unbounded; only the emitted phase is mapped through R sin().
    RawState,
    /// The emitted (bounded) phase is fed back as the walk state.
    BoundedState,
};

struct NoiseModelSpec {
    NoiseKind kind = NoiseKind::White;
    double scale_c = 4.0;         // divides the two-digit magnitude
    std::uint8_t threshold = 8;   // sign digit >= threshold steps upward
    std::size_t lag_m = 100;      // RandomWalkM only
    std::size_t memory_s = 10;    // RandomWalkS only
    double bias_deg = 0.0;        // phase before the first step
    std::optional<double> bound_deg;
    BoundMode bound_mode = BoundMode::RawState;

    /// Throws ConfigError on C <= 0, threshold > 15, non-positive bound, M or S < 2.
    void validate() const;
};

/// A step-wise constant phase program, one value per dwell interval.
struct PhaseSchedule {
    std::vector<double> phases_deg;
    double dwell_s = 5.0;
    double carrier_hz = 10e6;

    std::size_t size() const noexcept { return phases_deg.size(); }
};

/// Two hex digits read big-endian: 16 * high + low.
constexpr int magnitude(std::uint8_t high, std::uint8_t low) noexcept { return 16 * high + low; }

/// Phase for one key pair: (16 k_a + k_b) / C, in [0, 255 / C] degrees.
double white_phase(const DigitPair& pair, double scale_c);

/// One random-walk step: the first digit picks the sign (>= threshold is up),
/// the other two give the magnitude / C.
double rw_step(double prev_phase_deg, const DigitTriplet& triplet, double scale_c, std::uint8_t threshold);

/// R sin(phase), with the phase taken in degrees.
double bound_phase(double phase_deg, double bound_deg);

/// Step `index` of the walk that repeats (or flips) the sign of the increment
/// `lag` steps back. `history` holds phases 0..index-1; `bias_deg` stands in
/// for phase -1. Indices up to and including `lag` use the plain walk.
double rw_m_step(std::span<const double> history, std::size_t index, const DigitTriplet& triplet,
                 double scale_c, std::uint8_t threshold, std::size_t lag, double bias_deg = 0.0);

/// Step `index` of the walk whose increment is the mean of the previous
/// `memory` increments plus a signed key term, all divided by `memory`.
/// Indices below `memory` use the plain walk.
double rw_s_step(std::span<const double> history, std::size_t index, const DigitTriplet& triplet,
                 double scale_c, std::uint8_t threshold, std::size_t memory, double bias_deg = 0.0);

/// Consumes 2 * n_steps digits (white) or 3 * n_steps (walks) and returns the
/// phase program. n_steps == 0 consumes nothing.
PhaseSchedule generate_schedule(HexKeyStream& stream, const NoiseModelSpec& model, std::size_t n_steps,
                                double dwell_s = 5.0, double carrier_hz = 10e6);

/// Digits `generate_schedule` will consume for `n_steps`.
std::size_t key_digits_needed(NoiseKind kind, std::size_t n_steps) noexcept;

/// Time shift of a carrier phase: (phase / 360) / carrier, in nanoseconds.
double phase_to_delay(double phase_deg, double carrier_hz);

/// Delay rounded to the nearest picosecond; the codec's exact representation.
std::int64_t phase_to_delay_ps(double phase_deg, double carrier_hz);

enum class Direction : int { Encode = -1, Decode = +1 };

/// Adds sign * delay(phases[floor(t / dwell)]) to each sample, where t is the
/// sample time and sign is -1 to encode and +1 to decode. The delay is the
/// picosecond-rounded one, so encode followed by decode is exact in the
/// integer overload.
TimeErrorSeries apply_schedule(const TimeErrorSeries& series, const PhaseSchedule& schedule, Direction direction);

/// Integer-picosecond version of apply_schedule; exact.
std::vector<std::int64_t> apply_schedule_ps(std::span<const std::int64_t> samples_ps, double tau0_s,
                                            const PhaseSchedule& schedule, Direction direction);

/// CSV with columns step_index,phase_deg,delay_ns.
void write_schedule_csv(const PhaseSchedule& schedule, const std::filesystem::path& path);

}  // namespace qkdtime::phasecodec

#include "qkdtime/phasecodec.hpp"

#include "qkdtime/errors.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

namespace qkdtime::phasecodec {

namespace {

double signed_magnitude(const DigitTriplet& triplet, double scale_c, std::uint8_t threshold) {
    const double m = magnitude(triplet[1], triplet[2]) / scale_c;
    return triplet[0] >= threshold ? m : -m;
}

double previous_phase(std::span<const double> history, std::size_t index, double bias_deg) {
    return index == 0 ? bias_deg : history[index - 1];
}

void require_history(std::span<const double> history, std::size_t index) {
    if (history.size() < index) {
        throw ContractViolation(fmt::format("step {} needs {} prior phases, history holds {}",
                                            index, index, history.size()));
    }
}

int sign_of(double v) noexcept { return (v > 0.0) - (v < 0.0); }

std::size_t samples_per_dwell(double tau0_s, double dwell_s) {
    if (!(tau0_s > 0.0) || !(dwell_s > 0.0)) {
        throw ConfigError(fmt::format("sampling interval {} s and dwell {} s must be positive", tau0_s, dwell_s));
    }
    const double ratio = dwell_s / tau0_s;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
        throw ConfigError(fmt::format("sampling interval {} s does not divide dwell {} s", tau0_s, dwell_s));
    }
    return static_cast<std::size_t>(rounded);
}

}  // namespace

std::string_view noise_kind_name(NoiseKind kind) noexcept {
    switch (kind) {
        case NoiseKind::White: return "white";
        case NoiseKind::RandomWalk: return "rw";
        case NoiseKind::RandomWalkM: return "rw_m";
        case NoiseKind::RandomWalkS: return "rw_s";
    }
    return "white";
}

NoiseKind parse_noise_kind(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "white") return NoiseKind::White;
    if (lower == "rw" || lower == "randomwalk") return NoiseKind::RandomWalk;
    if (lower == "rw_m" || lower == "randomwalkm") return NoiseKind::RandomWalkM;
    if (lower == "rw_s" || lower == "randomwalks") return NoiseKind::RandomWalkS;
    throw ConfigError(fmt::format("unknown noise model '{}' (expected white, rw, rw_m, rw_s)", text));
}

void NoiseModelSpec::validate() const {
    if (!(scale_c > 0.0)) throw ConfigError(fmt::format("model.C must be positive, got {}", scale_c));
    if (threshold > 15) throw ConfigError(fmt::format("model.T must be a hex digit, got {}", threshold));
    if (bound_deg && !(*bound_deg > 0.0)) {
        throw ConfigError(fmt::format("model.bound_deg must be positive, got {}", *bound_deg));
    }
    if (kind == NoiseKind::RandomWalkM && lag_m < 2) {
        throw ConfigError(fmt::format("model.M must be greater than 1, got {}", lag_m));
    }
    if (kind == NoiseKind::RandomWalkS && memory_s < 2) {
        throw ConfigError(fmt::format("model.S must be greater than 1, got {}", memory_s));
    }
}

double white_phase(const DigitPair& pair, double scale_c) {
    return magnitude(pair[0], pair[1]) / scale_c;
}

double rw_step(double prev_phase_deg, const DigitTriplet& triplet, double scale_c, std::uint8_t threshold) {
    return prev_phase_deg + signed_magnitude(triplet, scale_c, threshold);
}

double bound_phase(double phase_deg, double bound_deg) {
    return bound_deg * std::sin(phase_deg * (std::numbers::pi / 180.0));
}

double rw_m_step(std::span<const double> history, std::size_t index, const DigitTriplet& triplet,
                 double scale_c, std::uint8_t threshold, std::size_t lag, double bias_deg) {
    require_history(history, index);
    const double prev = previous_phase(history, index, bias_deg);
    // index == lag sits between the two branches; it stays on the plain walk.
    if (index <= lag) return rw_step(prev, triplet, scale_c, threshold);
    const double old_increment = history[index - lag] - history[index - lag - 1];
    return prev + sign_of(old_increment) * signed_magnitude(triplet, scale_c, threshold);
}

double rw_s_step(std::span<const double> history, std::size_t index, const DigitTriplet& triplet,
                 double scale_c, std::uint8_t threshold, std::size_t memory, double bias_deg) {
    require_history(history, index);
    const double prev = previous_phase(history, index, bias_deg);
    if (index < memory) return rw_step(prev, triplet, scale_c, threshold);
    // The last `memory` increments telescope to prev - phase[index - memory - 1].
    const double oldest = previous_phase(history, index - memory, bias_deg);
    const double increments = prev - oldest;
    return prev + (increments + signed_magnitude(triplet, scale_c, threshold)) / static_cast<double>(memory);
}

std::size_t key_digits_needed(NoiseKind kind, std::size_t n_steps) noexcept {
    return (kind == NoiseKind::White ? 2 : 3) * n_steps;
}

PhaseSchedule generate_schedule(HexKeyStream& stream, const NoiseModelSpec& model, std::size_t n_steps,
                                double dwell_s, double carrier_hz) {
    model.validate();
    if (!(dwell_s > 0.0)) throw ConfigError(fmt::format("dwell_s must be positive, got {}", dwell_s));
    if (!(carrier_hz > 0.0)) throw ConfigError(fmt::format("carrier_hz must be positive, got {}", carrier_hz));

    PhaseSchedule schedule;
    schedule.dwell_s = dwell_s;
    schedule.carrier_hz = carrier_hz;
    if (n_steps == 0) return schedule;
    schedule.phases_deg.reserve(n_steps);

    const auto emit = [&](double raw) {
        return model.bound_deg ? bound_phase(raw, *model.bound_deg) : raw;
    };

    if (model.kind == NoiseKind::White) {
        for (const auto& pair : stream.take_pairs(n_steps)) {
            schedule.phases_deg.push_back(emit(white_phase(pair, model.scale_c)));
        }
        return schedule;
    }

    const auto triplets = stream.take_triplets(n_steps);
    const bool feed_back_bounded = model.bound_deg && model.bound_mode == BoundMode::BoundedState;
    std::vector<double> state;
    state.reserve(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        double next = 0.0;
        switch (model.kind) {
            case NoiseKind::RandomWalk:
                next = rw_step(i == 0 ? model.bias_deg : state.back(), triplets[i], model.scale_c, model.threshold);
                break;
            case NoiseKind::RandomWalkM:
                next = rw_m_step(state, i, triplets[i], model.scale_c, model.threshold, model.lag_m, model.bias_deg);
                break;
            case NoiseKind::RandomWalkS:
                next = rw_s_step(state, i, triplets[i], model.scale_c, model.threshold, model.memory_s, model.bias_deg);
                break;
            case NoiseKind::White:
                break;
        }
        const double out = emit(next);
        state.push_back(feed_back_bounded ? out : next);
        schedule.phases_deg.push_back(out);
    }
    return schedule;
}

double phase_to_delay(double phase_deg, double carrier_hz) {
    if (!(carrier_hz > 0.0)) throw ConfigError(fmt::format("carrier_hz must be positive, got {}", carrier_hz));
    return phase_deg * 1e9 / (360.0 * carrier_hz);
}

std::int64_t phase_to_delay_ps(double phase_deg, double carrier_hz) {
    if (!(carrier_hz > 0.0)) throw ConfigError(fmt::format("carrier_hz must be positive, got {}", carrier_hz));
    return std::llround(phase_deg * 1e12 / (360.0 * carrier_hz));
}

std::vector<std::int64_t> apply_schedule_ps(std::span<const std::int64_t> samples_ps, double tau0_s,
                                            const PhaseSchedule& schedule, Direction direction) {
    const std::size_t per_dwell = samples_per_dwell(tau0_s, schedule.dwell_s);
    const std::size_t steps_needed = samples_ps.empty() ? 0 : (samples_ps.size() - 1) / per_dwell + 1;
    if (steps_needed > schedule.size()) {
        throw ConfigError(fmt::format("schedule has {} steps, series needs {}", schedule.size(), steps_needed));
    }
    std::vector<std::int64_t> delays(steps_needed);
    for (std::size_t s = 0; s < steps_needed; ++s) {
        delays[s] = phase_to_delay_ps(schedule.phases_deg[s], schedule.carrier_hz);
    }
    const std::int64_t sign = static_cast<int>(direction);
    std::vector<std::int64_t> out(samples_ps.begin(), samples_ps.end());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += sign * delays[k / per_dwell];
    return out;
}

TimeErrorSeries apply_schedule(const TimeErrorSeries& series, const PhaseSchedule& schedule, Direction direction) {
    const std::size_t per_dwell = samples_per_dwell(series.tau0_s, schedule.dwell_s);
    const std::size_t steps_needed = series.size() == 0 ? 0 : (series.size() - 1) / per_dwell + 1;
    if (steps_needed > schedule.size()) {
        throw ConfigError(fmt::format("schedule has {} steps, series needs {}", schedule.size(), steps_needed));
    }
    const double sign = static_cast<int>(direction);
    TimeErrorSeries out = series;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto ps = phase_to_delay_ps(schedule.phases_deg[k / per_dwell], schedule.carrier_hz);
        out.samples_ns[k] += sign * (static_cast<double>(ps) * 1e-3);
    }
    return out;
}

void write_schedule_csv(const PhaseSchedule& schedule, const std::filesystem::path& path) {
    try {
        auto out = fmt::output_file(path.string());
        out.print("step_index,phase_deg,delay_ns\n");
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            const double phase = schedule.phases_deg[i];
            out.print("{},{:.6f},{:.6f}\n", i, phase, phase_to_delay(phase, schedule.carrier_hz));
        }
    } catch (const std::system_error& e) {
        throw IoError(fmt::format("cannot write '{}': {}", path.string(), e.what()));
    }
}

}  // namespace qkdtime::phasecodec

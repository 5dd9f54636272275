#pragma once

#include "qkdtime/random.hpp"
#include "qkdtime/stability.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace qkdtime::wrptp {

using Nanoseconds = std::int64_t;

/// A clock's state relative to the reference timebase.
struct SimClock {
    Nanoseconds true_offset_ns = 0;  // reading minus reference time
    double drift_ppb = 0.0;
    double jitter_ns_rms = 0.0;      // white timestamping noise
    std::uint64_t rng_seed = 0;
};

struct LinkModel {
    Nanoseconds delay_forward_ns = 0;   // master -> slave
    Nanoseconds delay_backward_ns = 0;  // slave -> master
    double jitter_ns_rms = 0.0;         // per message
    Nanoseconds quantization_ns = 0;    // 0 = ideal phase detector, 8 = plain 125 MHz counter
    Nanoseconds turnaround_ns = 1000;   // t3 - t2 before noise
    std::uint64_t rng_seed = 0;
};

struct WrTimestampQuartet {
    Nanoseconds t1 = 0;  // master sends (master timebase)
    Nanoseconds t2 = 0;  // slave receives (slave timebase)
    Nanoseconds t3 = 0;  // slave sends (slave timebase)
    Nanoseconds t4 = 0;  // master receives (master timebase)
};

struct DelayOffset {
    double delay_ns = 0.0;
    double offset_ns = 0.0;
};

/// Noise sources for one exchange. Draws come in a fixed order so a seeded
/// session is reproducible.
class ExchangeNoise {
public:
    ExchangeNoise(const SimClock& master, const SimClock& slave, const LinkModel& link);

    struct Draw {
        double master_t1 = 0.0;
        double slave_t2 = 0.0;
        double slave_t3 = 0.0;
        double master_t4 = 0.0;
        double link_forward = 0.0;
        double link_backward = 0.0;
    };

    Draw draw(const SimClock& master, const SimClock& slave, const LinkModel& link);

private:
    Rng master_rng_;
    Rng slave_rng_;
    Rng link_rng_;
};

/// One Sync / Delay_Req exchange started at master time `epoch_ns`.
///
///   t1 = epoch
///   t2 = t1 + delay_forward + (slave - master offset)
///   t3 = t2 + turnaround
///   t4 = t3 - (slave - master offset) + delay_backward
///
/// Noise, when `noise` is given, is added before rounding; every timestamp is
/// then floored to a multiple of the link quantization.
WrTimestampQuartet exchange(const SimClock& master, const SimClock& slave, const LinkModel& link,
                            Nanoseconds epoch_ns, ExchangeNoise* noise = nullptr);

/// Line delay and offset from one quartet:
///   D = ((t4 - t1) - (t3 - t2)) / 2,   O = (t2 - t1) - D.
/// A negative D is returned as is.
DelayOffset compute_delay_offset(const WrTimestampQuartet& q) noexcept;

/// Proportional servo: offset -= round(gain * O).
SimClock servo_step(const SimClock& slave, double offset_ns, double gain = 1.0);

struct SessionConfig {
    std::size_t rounds = 1;
    double interval_s = 5.0;
    double servo_gain = 1.0;
    /// Uncalibrated internal delay: the slave output lags by this much, ns.
    double calibration_bias_ns = 0.0;
    /// SyncE keeps the slave frequency locked to the master.
    bool synce_locked = true;
};

struct SessionRound {
    std::size_t round_index = 0;
    double epoch_s = 0.0;
    WrTimestampQuartet quartet;
    DelayOffset estimate;
    double residual_ns = 0.0;
};

struct SessionResult {
    std::vector<SessionRound> rounds;
    SimClock final_slave;

    /// Residual time error (slave minus master, less the calibration delay)
    /// sampled every interval. Positive means the slave is early.
    stability::TimeErrorSeries residual_series() const;
};

/// Runs `rounds` exchange -> estimate -> servo cycles. The residual recorded for
/// a round is the slave error after that round's correction. A noiseless link
/// leaves a residual of (delay_backward - delay_forward) / 2.
SessionResult run_sync_session(const SimClock& master, const SimClock& slave, const LinkModel& link,
                               const SessionConfig& session);

/// CSV columns round_index,epoch_s,t1,t2,t3,t4,D_ns,O_ns,residual_ns.
void write_session_csv(const SessionResult& result, const std::filesystem::path& path);

}  // namespace qkdtime::wrptp

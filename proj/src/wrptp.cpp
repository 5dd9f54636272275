#include "qkdtime/wrptp.hpp"

#include "qkdtime/errors.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <cmath>

namespace qkdtime::wrptp {

namespace {

Nanoseconds quantize(double t_ns, Nanoseconds quantum) {
    const auto t = static_cast<Nanoseconds>(std::llround(t_ns));
    if (quantum <= 0) return t;
    const Nanoseconds rem = ((t % quantum) + quantum) % quantum;
    return t - rem;
}

void validate(const LinkModel& link) {
    if (link.delay_forward_ns < 0 || link.delay_backward_ns < 0) {
        throw ConfigError(fmt::format("link delays must be non-negative, got {} / {}",
                                      link.delay_forward_ns, link.delay_backward_ns));
    }
    if (link.quantization_ns < 0) throw ConfigError("link quantization must be non-negative");
    if (link.jitter_ns_rms < 0.0) throw ConfigError("link jitter must be non-negative");
    if (link.turnaround_ns < 0) throw ConfigError("turnaround must be non-negative");
}

void validate(const SimClock& clock, const char* role) {
    if (clock.jitter_ns_rms < 0.0) throw ConfigError(fmt::format("{} clock jitter must be non-negative", role));
}

}  // namespace

ExchangeNoise::ExchangeNoise(const SimClock& master, const SimClock& slave, const LinkModel& link)
    : master_rng_(master.rng_seed), slave_rng_(slave.rng_seed), link_rng_(link.rng_seed) {}

ExchangeNoise::Draw ExchangeNoise::draw(const SimClock& master, const SimClock& slave, const LinkModel& link) {
    Draw d;
    d.master_t1 = master.jitter_ns_rms * master_rng_.gaussian();
    d.master_t4 = master.jitter_ns_rms * master_rng_.gaussian();
    d.slave_t2 = slave.jitter_ns_rms * slave_rng_.gaussian();
    d.slave_t3 = slave.jitter_ns_rms * slave_rng_.gaussian();
    d.link_forward = link.jitter_ns_rms * link_rng_.gaussian();
    d.link_backward = link.jitter_ns_rms * link_rng_.gaussian();
    return d;
}

WrTimestampQuartet exchange(const SimClock& master, const SimClock& slave, const LinkModel& link,
                            Nanoseconds epoch_ns, ExchangeNoise* noise) {
    if (epoch_ns < 0) throw ConfigError(fmt::format("epoch must be non-negative, got {}", epoch_ns));
    validate(link);
    validate(master, "master");
    validate(slave, "slave");

    const ExchangeNoise::Draw d = noise ? noise->draw(master, slave, link) : ExchangeNoise::Draw{};
    const double relative = static_cast<double>(slave.true_offset_ns - master.true_offset_ns);

    // Event times in each clock's own timebase; timestamp noise only touches the readings.
    const double sent = static_cast<double>(epoch_ns);
    const double arrived = sent + static_cast<double>(link.delay_forward_ns) + d.link_forward + relative;
    const double replied = arrived + static_cast<double>(link.turnaround_ns);
    const double returned = replied - relative + static_cast<double>(link.delay_backward_ns) + d.link_backward;

    WrTimestampQuartet q;
    q.t1 = quantize(sent + d.master_t1, link.quantization_ns);
    q.t2 = quantize(arrived + d.slave_t2, link.quantization_ns);
    q.t3 = quantize(replied + d.slave_t3, link.quantization_ns);
    q.t4 = quantize(returned + d.master_t4, link.quantization_ns);
    return q;
}

DelayOffset compute_delay_offset(const WrTimestampQuartet& q) noexcept {
    // Integer differences first; halving is the only inexact step and is exact in binary.
    const Nanoseconds round_trip = (q.t4 - q.t1) - (q.t3 - q.t2);
    const double delay = static_cast<double>(round_trip) / 2.0;
    const double offset = static_cast<double>(q.t2 - q.t1) - delay;
    return {delay, offset};
}

SimClock servo_step(const SimClock& slave, double offset_ns, double gain) {
    SimClock next = slave;
    next.true_offset_ns -= static_cast<Nanoseconds>(std::llround(gain * offset_ns));
    return next;
}

stability::TimeErrorSeries SessionResult::residual_series() const {
    stability::TimeErrorSeries series;
    series.samples_ns.reserve(rounds.size());
    for (const auto& r : rounds) series.samples_ns.push_back(r.residual_ns);
    series.tau0_s = rounds.size() >= 2 ? rounds[1].epoch_s - rounds[0].epoch_s : 1.0;
    return series;
}

SessionResult run_sync_session(const SimClock& master, const SimClock& slave, const LinkModel& link,
                               const SessionConfig& session) {
    if (session.rounds < 1) throw ConfigError("session needs at least one round");
    if (!(session.interval_s > 0.0)) throw ConfigError("session interval must be positive");
    if (!(session.servo_gain > 0.0 && session.servo_gain <= 1.0)) {
        throw ConfigError(fmt::format("servo gain must be in (0, 1], got {}", session.servo_gain));
    }

    SimClock current = slave;
    if (session.synce_locked) current.drift_ppb = master.drift_ppb;
    ExchangeNoise noise(master, current, link);

    SessionResult result;
    result.rounds.reserve(session.rounds);
    const double step_drift_ns = (current.drift_ppb - master.drift_ppb) * session.interval_s;
    double drift_carry = 0.0;

    for (std::size_t k = 0; k < session.rounds; ++k) {
        if (k > 0) {
            drift_carry += step_drift_ns;
            const double whole = std::trunc(drift_carry);
            current.true_offset_ns += static_cast<Nanoseconds>(whole);
            drift_carry -= whole;
        }
        const double epoch_s = static_cast<double>(k) * session.interval_s;
        const auto epoch_ns = static_cast<Nanoseconds>(std::llround(epoch_s * 1e9));

        SessionRound round;
        round.round_index = k;
        round.epoch_s = epoch_s;
        round.quartet = exchange(master, current, link, epoch_ns, &noise);
        round.estimate = compute_delay_offset(round.quartet);
        current = servo_step(current, round.estimate.offset_ns, session.servo_gain);
        round.residual_ns = static_cast<double>(current.true_offset_ns - master.true_offset_ns)
                            - session.calibration_bias_ns;
        result.rounds.push_back(round);
    }
    result.final_slave = current;
    return result;
}

void write_session_csv(const SessionResult& result, const std::filesystem::path& path) {
    try {
        auto out = fmt::output_file(path.string());
        out.print("round_index,epoch_s,t1,t2,t3,t4,D_ns,O_ns,residual_ns\n");
        for (const auto& r : result.rounds) {
            out.print("{},{:.3f},{},{},{},{},{:.1f},{:.1f},{:.3f}\n", r.round_index, r.epoch_s,
                      r.quartet.t1, r.quartet.t2, r.quartet.t3, r.quartet.t4,
                      r.estimate.delay_ns, r.estimate.offset_ns, r.residual_ns);
        }
    } catch (const std::system_error& e) {
        throw IoError(fmt::format("cannot write '{}': {}", path.string(), e.what()));
    }
}

}  // namespace qkdtime::wrptp

#include "qkdtime/qkdlink.hpp"

#include "qkdtime/errors.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace qkdtime::qkdlink {

void ChannelParams::validate() const {
    if (!(loss_db >= 0.0)) throw ConfigError(fmt::format("loss_db must be >= 0, got {}", loss_db));
    if (!(det_efficiency > 0.0 && det_efficiency <= 1.0)) {
        throw ConfigError(fmt::format("detector efficiency must be in (0, 1], got {}", det_efficiency));
    }
    if (!(dark_rate_cps >= 0.0)) throw ConfigError("dark count rate must be >= 0");
    if (!(background_rate_cps >= 0.0)) throw ConfigError("background rate must be >= 0");
    if (!(rep_rate_hz > 0.0)) throw ConfigError("repetition rate must be positive");
    if (!(mean_photon_mu > 0.0)) throw ConfigError("mean photon number must be positive");
    if (!(dead_time_s > 0.0)) throw ConfigError("dead time must be positive");
}

double counts_per_pulse(double rate_cps, double rep_rate_hz) {
    if (!(rep_rate_hz > 0.0)) throw ConfigError("repetition rate must be positive");
    return rate_cps / rep_rate_hz;
}

double signal_counts_per_pulse(double mu, double loss_db, double det_efficiency) {
    if (!(mu > 0.0)) throw ConfigError("mean photon number must be positive");
    return mu * std::pow(10.0, -loss_db / 10.0) * det_efficiency;
}

double saturation_limit(double dead_time_s) {
    if (!(dead_time_s > 0.0)) throw ConfigError("dead time must be positive");
    return 1.0 / dead_time_s;
}

LinkBudgetReport feasibility_report(const ChannelParams& params) {
    params.validate();
    LinkBudgetReport r;
    r.background_per_pulse = counts_per_pulse(params.background_rate_cps, params.rep_rate_hz);
    r.dark_per_pulse = counts_per_pulse(params.dark_rate_cps, params.rep_rate_hz);
    r.signal_per_pulse = signal_counts_per_pulse(params.mean_photon_mu, params.loss_db, params.det_efficiency);
    r.saturation_cps = saturation_limit(params.dead_time_s);

    const double arming_rate = std::min(params.rep_rate_hz, r.saturation_cps);
    const double zero_loss_per_pulse = std::min(1.0, params.mean_photon_mu * params.det_efficiency);
    r.signal_rate_cps = zero_loss_per_pulse * arming_rate;
    r.total_rate_cps = r.signal_rate_cps + params.background_rate_cps + params.dark_rate_cps;

    r.below_saturation = r.total_rate_cps < r.saturation_cps;
    r.signal_above_background = r.signal_per_pulse > r.background_per_pulse;
    r.feasible = r.below_saturation && r.signal_above_background;
    return r;
}

void print_report(std::ostream& out, const ChannelParams& p, const LinkBudgetReport& r) {
    const auto row = [&](std::string_view name, const std::string& value) {
        fmt::print(out, "{:<28} {}\n", name, value);
    };
    row("channel loss", fmt::format("{:g} dB", p.loss_db));
    row("detector efficiency", fmt::format("{:g}", p.det_efficiency));
    row("repetition rate", fmt::format("{:g} Hz", p.rep_rate_hz));
    row("mean photon number", fmt::format("{:g}", p.mean_photon_mu));
    row("dead time", fmt::format("{:g} s", p.dead_time_s));
    row("background", fmt::format("{:g} counts/s = {:.3e} counts/pulse", p.background_rate_cps, r.background_per_pulse));
    row("dark counts", fmt::format("{:g} counts/s = {:.3e} counts/pulse", p.dark_rate_cps, r.dark_per_pulse));
    row("signal", fmt::format("{:.4g} counts/pulse", r.signal_per_pulse));
    row("signal click rate (0 dB)", fmt::format("{:.6g} counts/s", r.signal_rate_cps));
    row("total detector rate", fmt::format("{:.6g} counts/s", r.total_rate_cps));
    row("saturation limit", fmt::format("{:.6g} counts/s", r.saturation_cps));
    row("below saturation", r.below_saturation ? "yes" : "no");
    row("signal above background", r.signal_above_background ? "yes" : "no");
    row("feasible", r.feasible ? "yes" : "no");
}

std::string report_csv(const ChannelParams& p, const LinkBudgetReport& r) {
    std::string out =
        "loss_db,det_efficiency,dark_rate_cps,background_rate_cps,rep_rate_hz,mean_photon_mu,dead_time_s,"
        "background_per_pulse,dark_per_pulse,signal_per_pulse,signal_rate_cps,total_rate_cps,saturation_cps,feasible\n";
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", p.loss_db, p.det_efficiency, p.dark_rate_cps,
                       p.background_rate_cps, p.rep_rate_hz, p.mean_photon_mu, p.dead_time_s,
                       r.background_per_pulse, r.dark_per_pulse, r.signal_per_pulse, r.signal_rate_cps,
                       r.total_rate_cps, r.saturation_cps, r.feasible ? 1 : 0);
    return out;
}

}  // namespace qkdtime::qkdlink

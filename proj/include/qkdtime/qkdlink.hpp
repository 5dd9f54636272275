#pragma once

#include <iosfwd>
#include <string>

namespace qkdtime::qkdlink {

/// Quantum-channel operating point. Defaults are the measured field values:
/// 10 dB loss, 20 % detector efficiency, 353 counts/s dark rate, up to
/// 6500 counts/s stray background, 1 GHz pulse rate and 25 us dead time.
/// A mean photon number of 1.5 gives 0.03 counts/pulse at the receiver.
struct ChannelParams {
    double loss_db = 10.0;
    double det_efficiency = 0.2;
    double dark_rate_cps = 353.0;
    double background_rate_cps = 6500.0;
    double rep_rate_hz = 1e9;
    double mean_photon_mu = 1.5;
    double dead_time_s = 25e-6;

    /// Throws ConfigError when a field is outside its physical domain.
    void validate() const;
};

struct LinkBudgetReport {
    double background_per_pulse = 0.0;
    double dark_per_pulse = 0.0;
    double signal_per_pulse = 0.0;
    /// Detector click rate for the saturation check, counts/s.
    double signal_rate_cps = 0.0;
    double total_rate_cps = 0.0;
    double saturation_cps = 0.0;
    bool below_saturation = false;
    bool signal_above_background = false;
    bool feasible = false;
};

double counts_per_pulse(double rate_cps, double rep_rate_hz);

/// mu * 10^(-loss/10) * efficiency; linear in the small-signal regime.
double signal_counts_per_pulse(double mu, double loss_db, double det_efficiency);

/// 1 / dead time.
double saturation_limit(double dead_time_s);

/// Feasible when the detector stays below saturation and the signal per pulse
/// beats the stray background per pulse.
///
/// A free-running detector can re-arm at most once per dead time, so the
/// signal click rate is the per-pulse detection probability times
/// min(rep rate, 1 / dead time). The saturation check evaluates that rate at
/// zero channel loss (worst case) and adds background and dark counts.
LinkBudgetReport feasibility_report(const ChannelParams& params);

/// Two-column aligned text.
void print_report(std::ostream& out, const ChannelParams& params, const LinkBudgetReport& report);

/// Header line plus one data line.
std::string report_csv(const ChannelParams& params, const LinkBudgetReport& report);

}  // namespace qkdtime::qkdlink

#include "qkdtime/stability.hpp"

#include "qkdtime/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>

namespace qkdtime::stability {

std::vector<std::size_t> octave_factors(std::size_t n_samples) {
    std::vector<std::size_t> factors;
    if (n_samples < 3) return factors;
    const std::size_t max_m = (n_samples - 1) / 2;
    for (std::size_t m = 1; m <= max_m; m *= 2) factors.push_back(m);
    return factors;
}

AdevCurve overlapping_adev(const TimeErrorSeries& series, std::span<const std::size_t> m_values) {
    const auto& x = series.samples_ns;
    const std::size_t n = x.size();
    if (n < 3) throw ConfigError(fmt::format("ADEV needs at least 3 samples, got {}", n));
    if (!(series.tau0_s > 0.0)) throw ConfigError(fmt::format("tau0 must be positive, got {}", series.tau0_s));

    const std::size_t max_m = (n - 1) / 2;
    AdevCurve curve;
    curve.estimator = Estimator::Overlapping;
    curve.points.reserve(m_values.size());

    std::size_t previous = 0;
    for (const std::size_t m : m_values) {
        if (m < 1 || m > max_m) {
            throw ConfigError(fmt::format("averaging factor {} outside [1, {}] for {} samples", m, max_m, n));
        }
        if (m <= previous) throw ConfigError("averaging factors must be strictly increasing");
        previous = m;

        const std::size_t terms = n - 2 * m;
        double sum = 0.0;
        for (std::size_t i = 0; i < terms; ++i) {
            const double d = x[i + 2 * m] - 2.0 * x[i + m] + x[i];
            sum += d * d;
        }
        const double tau = static_cast<double>(m) * series.tau0_s;
        const double variance = sum / (2.0 * tau * tau * static_cast<double>(terms));
        const double adev = std::sqrt(variance);
        curve.points.push_back({tau, adev, adev / std::sqrt(static_cast<double>(terms))});
    }
    return curve;
}

AdevCurve overlapping_adev(const TimeErrorSeries& series) {
    const auto factors = octave_factors(series.size());
    return overlapping_adev(series, factors);
}

double fit_loglog_slope(const AdevCurve& curve, double tau_min, double tau_max) {
    std::vector<double> lx, ly;
    for (const auto& p : curve.points) {
        if (p.tau_s < tau_min || p.tau_s > tau_max) continue;
        if (!(p.adev > 0.0)) throw ConfigError(fmt::format("cannot fit log-log slope through adev {} at tau {}", p.adev, p.tau_s));
        lx.push_back(std::log(p.tau_s));
        ly.push_back(std::log(p.adev));
    }
    if (lx.size() < 3) {
        throw ConfigError(fmt::format("slope fit needs at least 3 points in range, have {}", lx.size()));
    }
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    return sxy / sxx;
}

std::string_view noise_class_name(NoiseClass kind) noexcept {
    switch (kind) {
        case NoiseClass::WhitePhase: return "white-phase";
        case NoiseClass::RandomWalkPhase: return "random-walk-phase";
        case NoiseClass::Indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

NoiseClass classify_noise(double slope) noexcept {
    if (slope >= -1.15 && slope <= -0.85) return NoiseClass::WhitePhase;
    if (slope >= -0.65 && slope <= -0.35) return NoiseClass::RandomWalkPhase;
    return NoiseClass::Indeterminate;
}

double mean(std::span<const double> samples) {
    if (samples.empty()) return 0.0;
    return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
}

double stddev(std::span<const double> samples) {
    if (samples.size() < 2) return 0.0;
    const double mu = mean(samples);
    double ss = 0.0;
    for (const double v : samples) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(samples.size() - 1));
}

double autocorrelation(std::span<const double> samples, std::size_t lag) {
    const std::size_t n = samples.size();
    if (lag >= n) throw ContractViolation(fmt::format("lag {} not below series length {}", lag, n));
    const double mu = mean(samples);
    double denom = 0.0;
    for (const double v : samples) denom += (v - mu) * (v - mu);
    if (denom == 0.0) return 1.0;
    double num = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) num += (samples[i] - mu) * (samples[i + lag] - mu);
    return num / denom;
}

std::size_t decorrelation_steps(const TimeErrorSeries& series, double threshold) {
    const auto& x = series.samples_ns;
    if (x.size() < 100) throw ConfigError(fmt::format("decorrelation needs at least 100 samples, got {}", x.size()));
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError(fmt::format("threshold must be in (0, 1), got {}", threshold));
    }
    const double mu = mean(x);
    std::vector<double> centered(x.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        centered[i] = x[i] - mu;
        denom += centered[i] * centered[i];
    }
    if (denom == 0.0) return x.size();
    for (std::size_t lag = 1; lag < x.size(); ++lag) {
        double num = 0.0;
        for (std::size_t i = 0; i + lag < x.size(); ++i) num += centered[i] * centered[i + lag];
        if (num / denom < threshold) return lag;
    }
    return x.size();
}

}  // namespace qkdtime::stability

#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace qkdtime::stability {

/// Uniformly sampled time error against the reference, in nanoseconds.
struct TimeErrorSeries {
    std::vector<double> samples_ns;
    double tau0_s = 1.0;

    std::size_t size() const noexcept { return samples_ns.size(); }
};

struct AdevPoint {
    double tau_s = 0.0;
    double adev = 0.0;
    double sigma_adev = 0.0;
};

enum class Estimator { Overlapping, NonOverlapping };

struct AdevCurve {
    std::vector<AdevPoint> points;
    Estimator estimator = Estimator::Overlapping;
};

/// Octave-spaced averaging factors 1, 2, 4, ... up to (n_samples - 1) / 2.
std::vector<std::size_t> octave_factors(std::size_t n_samples);

/// Overlapping Allan deviation from phase (time-error) data.
///
///   sigma_y^2(m tau0) = sum_{i=0}^{N-1-2m} (x[i+2m] - 2 x[i+m] + x[i])^2 / (2 (m tau0)^2 (N - 2m))
///
/// Samples are in ns, so the result is the fractional frequency deviation
/// scaled by 1e9 (tau is in seconds). The uncertainty is adev / sqrt(N - 2m).
/// Factors must be strictly increasing and lie in [1, (N-1)/2].
AdevCurve overlapping_adev(const TimeErrorSeries& series, std::span<const std::size_t> m_values);

/// Same, on the default octave grid.
AdevCurve overlapping_adev(const TimeErrorSeries& series);

/// Least-squares slope of log(adev) against log(tau) for points with
/// tau_min <= tau <= tau_max. Needs at least three such points.
double fit_loglog_slope(const AdevCurve& curve, double tau_min = 0.0,
                        double tau_max = std::numeric_limits<double>::infinity());

enum class NoiseClass { WhitePhase, RandomWalkPhase, Indeterminate };

std::string_view noise_class_name(NoiseClass kind) noexcept;

/// WhitePhase for slopes in [-1.15, -0.85], RandomWalkPhase for [-0.65, -0.35].
NoiseClass classify_noise(double slope) noexcept;

/// Normalized sample autocorrelation at `lag` (biased estimator, mean removed).
double autocorrelation(std::span<const double> samples, std::size_t lag);

/// First lag at which the normalized autocorrelation drops below `threshold`.
/// Returns the series length when it never does (including a constant series).
std::size_t decorrelation_steps(const TimeErrorSeries& series, double threshold = 0.36787944117144233);

double mean(std::span<const double> samples);
double stddev(std::span<const double> samples);

}  // namespace qkdtime::stability

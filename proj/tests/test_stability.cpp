#include <doctest.h>

#include "qkdtime/errors.hpp"
#include "qkdtime/random.hpp"
#include "qkdtime/stability.hpp"

#include <cmath>
#include <cstring>
#include <random>

using namespace qkdtime;
using namespace qkdtime::stability;

namespace {

TimeErrorSeries white_series(std::uint64_t seed, std::size_t n, double sigma, double tau0 = 1.0) {
    Rng rng(seed);
    TimeErrorSeries s{std::vector<double>(n), tau0};
    for (auto& v : s.samples_ns) v = sigma * rng.gaussian();
    return s;
}

TimeErrorSeries walk_series(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    TimeErrorSeries s{std::vector<double>(n), 1.0};
    double x = 0.0;
    for (auto& v : s.samples_ns) v = (x += rng.gaussian());
    return s;
}

AdevCurve power_law(double k, double exponent) {
    AdevCurve c;
    for (double tau = 1.0; tau <= 4096.0; tau *= 2.0) c.points.push_back({tau, k * std::pow(tau, exponent), 0.0});
    return c;
}

std::int64_t ulp_distance(double a, double b) {
    std::int64_t ia, ib;
    std::memcpy(&ia, &a, sizeof a);
    std::memcpy(&ib, &b, sizeof b);
    return ia > ib ? ia - ib : ib - ia;
}

}  // namespace

TEST_CASE("octave factors") {
    CHECK(octave_factors(2).empty());
    CHECK(octave_factors(3) == std::vector<std::size_t>{1});
    CHECK(octave_factors(10) == std::vector<std::size_t>{1, 2, 4});
    CHECK(octave_factors(2000).back() == 512);
}

TEST_CASE("constant and ramp series have zero deviation") {
    const TimeErrorSeries flat{std::vector<double>(100, 3.25), 5.0};
    for (const auto& p : overlapping_adev(flat).points) CHECK(p.adev == 0.0);

    TimeErrorSeries ramp{std::vector<double>(100), 5.0};
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp.samples_ns[i] = 0.5 * static_cast<double>(i) * 5.0;
    for (const auto& p : overlapping_adev(ramp).points) CHECK(p.adev == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
}

TEST_CASE("white phase noise level") {
    // For white PM the second difference has variance 6 sigma^2, so adev = sqrt(3) sigma / tau.
    const auto s = white_series(8, 100000, 2.0);
    const auto c = overlapping_adev(s);
    CHECK(c.points[0].adev == doctest::Approx(std::sqrt(3.0) * 2.0).epsilon(0.01));
    CHECK(c.points[3].adev == doctest::Approx(std::sqrt(3.0) * 2.0 / 8.0).epsilon(0.1));
    CHECK(fit_loglog_slope(c) == doctest::Approx(-1.0).epsilon(0.05));
}

TEST_CASE("white PM ensemble slopes") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const double slope = fit_loglog_slope(overlapping_adev(white_series(seed, 2000, 1.0)));
        CHECK(slope >= -1.1);
        CHECK(slope <= -0.9);
    }
}

TEST_CASE("random walk phase slope") {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) total += fit_loglog_slope(overlapping_adev(walk_series(seed, 10000)));
    CHECK(total / 10.0 == doctest::Approx(-0.5).epsilon(0.1));
}

TEST_CASE("slope fit on exact power laws") {
    CHECK(std::abs(fit_loglog_slope(power_law(3.0, -1.0)) + 1.0) < 1e-9);
    CHECK(std::abs(fit_loglog_slope(power_law(0.2, -0.5)) + 0.5) < 1e-9);
    CHECK(std::abs(fit_loglog_slope(power_law(0.2, -0.5), 10.0, 100.0) + 0.5) < 1e-9);
    CHECK_THROWS_AS(fit_loglog_slope(power_law(1.0, -1.0), 10.0, 20.0), ConfigError);
}

TEST_CASE("classification bands") {
    CHECK(classify_noise(-1.0) == NoiseClass::WhitePhase);
    CHECK(classify_noise(-0.5) == NoiseClass::RandomWalkPhase);
    CHECK(classify_noise(-0.75) == NoiseClass::Indeterminate);
    CHECK(classify_noise(-1.15) == NoiseClass::WhitePhase);
    CHECK(classify_noise(-1.16) == NoiseClass::Indeterminate);
    CHECK(classify_noise(-0.35) == NoiseClass::RandomWalkPhase);
    CHECK(classify_noise(0.2) == NoiseClass::Indeterminate);
    CHECK(noise_class_name(NoiseClass::WhitePhase) == "white-phase");
}

TEST_CASE("decorrelation length") {
    CHECK(decorrelation_steps(white_series(1, 5000, 1.0)) == 1);
    CHECK(decorrelation_steps(walk_series(1, 10000)) > 100);

    // AR(1) with coefficient a has autocorrelation a^k; 1/e is crossed at k > 1 / -ln(a).
    Rng rng(4);
    TimeErrorSeries ar{std::vector<double>(200000), 1.0};
    double x = 0.0;
    const double a = 0.8;
    for (auto& v : ar.samples_ns) v = (x = a * x + rng.gaussian());
    CHECK(decorrelation_steps(ar) == 5);

    const TimeErrorSeries flat{std::vector<double>(200, 1.0), 1.0};
    CHECK(decorrelation_steps(flat) == 200);
    CHECK_THROWS_AS(decorrelation_steps(TimeErrorSeries{std::vector<double>(50, 1.0), 1.0}), ConfigError);
    CHECK_THROWS_AS(decorrelation_steps(white_series(1, 200, 1.0), 1.5), ConfigError);
}

TEST_CASE("autocorrelation") {
    const std::vector<double> alternating{1, -1, 1, -1, 1, -1};
    CHECK(autocorrelation(alternating, 0) == 1.0);
    CHECK(autocorrelation(alternating, 1) == doctest::Approx(-5.0 / 6.0));
    CHECK_THROWS_AS(autocorrelation(alternating, 6), ContractViolation);
}

TEST_CASE("scale equivariance and translation invariance") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = white_series(rng(), 16 + rng() % 500, 1.0 + (rng() % 100));
        const auto base = overlapping_adev(s);

        // Powers of two scale without rounding.
        TimeErrorSeries scaled = s;
        for (auto& v : scaled.samples_ns) v *= 4.0;
        const auto sc = overlapping_adev(scaled);
        for (std::size_t i = 0; i < base.points.size(); ++i) REQUIRE(sc.points[i].adev == 4.0 * base.points[i].adev);

        const double c = 0.1 + static_cast<double>(rng() % 1000);
        TimeErrorSeries scaled_any = s;
        for (auto& v : scaled_any.samples_ns) v *= c;
        const auto sa = overlapping_adev(scaled_any);
        for (std::size_t i = 0; i < base.points.size(); ++i) {
            REQUIRE(sa.points[i].adev == doctest::Approx(c * base.points[i].adev).epsilon(1e-12));
        }

        TimeErrorSeries shifted = s;
        for (auto& v : shifted.samples_ns) v += 1000.0;
        const auto sh = overlapping_adev(shifted);
        for (std::size_t i = 0; i < base.points.size(); ++i) {
            REQUIRE(sh.points[i].adev == doctest::Approx(base.points[i].adev).epsilon(1e-9));
        }
    }
}

TEST_CASE("matches a brute-force evaluation within one ulp") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> value(-1000.0, 1000.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 3 + rng() % 62;
        TimeErrorSeries s{std::vector<double>(n), 0.5 + static_cast<double>(rng() % 10)};
        for (auto& v : s.samples_ns) v = value(rng);
        std::vector<std::size_t> all_m;
        for (std::size_t m = 1; m <= (n - 1) / 2; ++m) all_m.push_back(m);
        const auto curve = overlapping_adev(s, all_m);
        for (std::size_t m = 1; m <= (n - 1) / 2; ++m) {
            double sum = 0.0;
            for (std::size_t i = 0; i + 2 * m < n; ++i) {
                const double d = s.samples_ns[i + 2 * m] - 2.0 * s.samples_ns[i + m] + s.samples_ns[i];
                sum += d * d;
            }
            const double tau = static_cast<double>(m) * s.tau0_s;
            const double want = std::sqrt(sum / (2.0 * tau * tau * static_cast<double>(n - 2 * m)));
            REQUIRE(ulp_distance(curve.points[m - 1].adev, want) <= 1);
        }
    }
}

TEST_CASE("relative uncertainty grows with m") {
    const auto c = overlapping_adev(white_series(3, 1000, 1.0));
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        CHECK(c.points[i].sigma_adev / c.points[i].adev > c.points[i - 1].sigma_adev / c.points[i - 1].adev);
    }
}

TEST_CASE("invalid inputs") {
    const TimeErrorSeries tiny{{1.0, 2.0}, 1.0};
    CHECK_THROWS_AS(overlapping_adev(tiny), ConfigError);
    const TimeErrorSeries bad_tau{{1.0, 2.0, 3.0}, 0.0};
    CHECK_THROWS_AS(overlapping_adev(bad_tau), ConfigError);
    const auto s = white_series(1, 20, 1.0);
    const std::vector<std::size_t> too_big{10};
    CHECK_THROWS_AS(overlapping_adev(s, too_big), ConfigError);
    const std::vector<std::size_t> zero{0};
    CHECK_THROWS_AS(overlapping_adev(s, zero), ConfigError);
    const std::vector<std::size_t> unordered{2, 1};
    CHECK_THROWS_AS(overlapping_adev(s, unordered), ConfigError);
}

#include <doctest.h>

#include "qkdtime/errors.hpp"
#include "qkdtime/qkdlink.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace qkdtime;
using namespace qkdtime::qkdlink;

TEST_CASE("counts_per_pulse") {
    CHECK(counts_per_pulse(6500, 1e9) == 6.5e-6);
    CHECK(counts_per_pulse(3500, 1e9) == 3.5e-6);
    CHECK(counts_per_pulse(0, 1e9) == 0.0);
    CHECK_THROWS_AS(counts_per_pulse(1, 0), ConfigError);
}

TEST_CASE("signal_counts_per_pulse") {
    CHECK(signal_counts_per_pulse(1.5, 10.0, 0.2) == doctest::Approx(0.03).epsilon(1e-14));
    CHECK(signal_counts_per_pulse(0.1, 0.0, 1.0) == 0.1);
    CHECK(signal_counts_per_pulse(1.0, 1e6, 1.0) == 0.0);
    CHECK(signal_counts_per_pulse(1.0, 400.0, 1.0) < 1e-39);
}

TEST_CASE("saturation_limit") {
    CHECK(saturation_limit(25e-6) == doctest::Approx(40000.0).epsilon(1e-15));
    CHECK(saturation_limit(1.0) == 1.0);
    CHECK(saturation_limit(1e-3) == 1000.0);
    CHECK_THROWS_AS(saturation_limit(0.0), ConfigError);
}

TEST_CASE("field operating point is feasible") {
    const ChannelParams p;
    const auto r = feasibility_report(p);
    CHECK(r.background_per_pulse <= 6.5e-6);
    CHECK(r.saturation_cps == doctest::Approx(40000.0));
    CHECK(r.signal_per_pulse == doctest::Approx(0.03));
    CHECK(r.total_rate_cps == doctest::Approx(12000.0 + 6500.0 + 353.0));
    CHECK(r.feasible);
}

TEST_CASE("verdict rules") {
    ChannelParams slow;
    slow.dead_time_s = 1.0;
    CHECK_FALSE(feasibility_report(slow).feasible);

    ChannelParams dim;
    dim.loss_db = 60.0;  // signal 3e-7 per pulse, below the 6.5e-6 background
    const auto r = feasibility_report(dim);
    CHECK(r.background_per_pulse > r.signal_per_pulse);
    CHECK_FALSE(r.feasible);

    ChannelParams bad;
    bad.det_efficiency = 1.5;
    CHECK_THROWS_AS(feasibility_report(bad), ConfigError);
}

TEST_CASE("verdict is monotone in loss and background") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
        ChannelParams p;
        p.loss_db = 80.0 * u(rng);
        p.det_efficiency = 0.01 + 0.99 * u(rng);
        p.dark_rate_cps = 2000.0 * u(rng);
        p.background_rate_cps = 50000.0 * u(rng);
        p.rep_rate_hz = std::pow(10.0, 5.0 + 5.0 * u(rng));
        p.mean_photon_mu = 0.01 + 3.0 * u(rng);
        p.dead_time_s = std::pow(10.0, -7.0 + 4.0 * u(rng));
        const bool before = feasibility_report(p).feasible;

        ChannelParams lossier = p;
        lossier.loss_db += 30.0 * u(rng);
        ChannelParams brighter = p;
        brighter.background_rate_cps += 20000.0 * u(rng);
        if (!before) {
            REQUIRE_FALSE(feasibility_report(lossier).feasible);
            REQUIRE_FALSE(feasibility_report(brighter).feasible);
        }
        if (feasibility_report(lossier).feasible) REQUIRE(before);
    }
}

TEST_CASE("report consistency on random inputs") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
        ChannelParams p;
        p.loss_db = 40.0 * u(rng);
        p.background_rate_cps = 1e5 * u(rng);
        p.dark_rate_cps = 1e3 * u(rng);
        p.dead_time_s = std::pow(10.0, -8.0 + 5.0 * u(rng));
        const auto r = feasibility_report(p);
        if (r.feasible) {
            REQUIRE(r.total_rate_cps < r.saturation_cps);
            REQUIRE(r.signal_per_pulse > r.background_per_pulse);
        }
        REQUIRE(r.feasible == (r.below_saturation && r.signal_above_background));
    }
}

TEST_CASE("counts per pulse reproduce the rate") {
    std::mt19937_64 rng(10);
    for (int i = 0; i < 100000; ++i) {
        const double rate = static_cast<double>(rng() % 1'000'000);
        const double rep = std::pow(10.0, 3 + static_cast<int>(rng() % 7));
        const double back = counts_per_pulse(rate, rep) * rep;
        REQUIRE(std::abs(back - rate) <= std::nextafter(rate, INFINITY) - rate);
    }
}

TEST_CASE("text and CSV report") {
    const ChannelParams p;
    const auto r = feasibility_report(p);
    std::ostringstream text;
    print_report(text, p, r);
    CHECK(text.str().find("feasible") != std::string::npos);
    CHECK(text.str().find("40000") != std::string::npos);

    const auto csv = report_csv(p, r);
    CHECK(csv.rfind("loss_db,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.substr(csv.size() - 3) == ",1\n");
}

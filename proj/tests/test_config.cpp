#include <doctest.h>

#include "qkdtime/config.hpp"
#include "qkdtime/errors.hpp"
#include "qkdtime/experiment.hpp"

#include <filesystem>
#include <fstream>

using namespace qkdtime;

TEST_CASE("parse key-value text") {
    const auto c = Config::parse(
        "# header\n"
        "model.kind = rw_s   # trailing comment\n"
        "\n"
        "  link.delay_fwd_ns=50\n"
        "model.kind = white\n");
    CHECK(c.get_string("model.kind", "") == "white");
    CHECK(c.get_int("link.delay_fwd_ns", 0) == 50);
    CHECK(c.get_double("missing", 2.5) == 2.5);
    CHECK_FALSE(c.has("header"));
}

TEST_CASE("malformed lines name their location") {
    try {
        Config::parse("a = 1\nnot a pair\n", "test.cfg");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("test.cfg:2") != std::string::npos);
    }
    CHECK_THROWS_AS(Config::parse(" = 3"), ConfigError);
}

TEST_CASE("typed getters") {
    auto c = Config::parse("x = 1e-3\nn = -4\nu = 18446744073709551615\nb = yes\nbad = 1.5x\nnone = none\n");
    CHECK(c.get_double("x", 0) == 1e-3);
    CHECK(c.get_int("n", 0) == -4);
    CHECK(c.get_uint("u", 0) == 18446744073709551615ull);
    CHECK(c.get_bool("b", false));
    CHECK_THROWS_AS(c.get_double("bad", 0), ConfigError);
    CHECK_THROWS_AS(c.get_int("x", 0), ConfigError);
    CHECK_FALSE(c.get_optional_double("none").has_value());
    CHECK_FALSE(c.get_optional_double("absent").has_value());
}

TEST_CASE("overrides and fallback keys") {
    auto c = Config::parse("link.jitter_ns = 1\nhop2.link.jitter_ns = 2\n");
    c.apply_override("seed = 9");
    CHECK(c.get_uint("seed", 0) == 9);
    CHECK(c.get_double("hop1.link.jitter_ns", "link.jitter_ns", 0) == 1.0);
    CHECK(c.get_double("hop2.link.jitter_ns", "link.jitter_ns", 0) == 2.0);
    CHECK_NOTHROW(c.require_all_used());
    CHECK_THROWS_AS(c.apply_override("novalue"), ConfigError);
}

TEST_CASE("unknown keys are reported") {
    const auto c = Config::parse("model.kind = rw\nmodel.kidn = rw\n");
    c.get_string("model.kind", "");
    try {
        c.require_all_used();
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("model.kidn") != std::string::npos);
    }
}

TEST_CASE("missing file is an I/O error") {
    CHECK_THROWS_AS(Config::from_file("/nonexistent/qkdtime.cfg"), IoError);
}

TEST_CASE("experiment config from text") {
    const auto path = std::filesystem::temp_directory_path() / "qkdtime_exp.cfg";
    std::ofstream(path) << "model.kind = rw_m\nmodel.M = 50\nmodel.bound_deg = 360\nduration_s = 500\n"
                           "calib.steps = 20\nhop2.calib.bias_ns = 129.188\nlink.delay_fwd_ns = 20000\n"
                           "link.delay_bwd_ns = 20000\ntic.jitter_ns = 0.01\nseed = 4\n";
    const auto c = Config::from_file(path);
    const auto e = experiment::ExperimentConfig::from_config(c);
    c.require_all_used();
    CHECK(e.model.kind == phasecodec::NoiseKind::RandomWalkM);
    CHECK(e.model.lag_m == 50);
    CHECK(e.model.bound_deg == 360.0);
    CHECK(e.encrypted_steps() == 100);
    CHECK(e.total_steps() == 120);
    CHECK(e.hop_ab.calibration_bias_ns == 129.188);
    CHECK(e.hop_ba.calibration_bias_ns == 0.0);
    CHECK(e.hop_ab.link.delay_forward_ns == 20000);
    CHECK(e.hop_ba.link.delay_backward_ns == 20000);
    CHECK(e.decrypted_jitter_ns == 0.01);
    CHECK(e.seed == 4);

    auto fractional = Config::parse("duration_s = 7\n");
    CHECK_THROWS_AS(experiment::ExperimentConfig::from_config(fractional).validate(), ConfigError);
}

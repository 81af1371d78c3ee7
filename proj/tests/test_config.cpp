#include "sfi/config.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace sfi;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "run.cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults") {
    const auto c = parse_config("");
    CHECK(c.pulse.peak_field == 0.05);
    CHECK(c.pulse.omega == 0.02);
    CHECK(c.pulse.n_cycles == 1);
    CHECK_FALSE(c.pulse.signal.has_value());
    CHECK(c.dr == 0.05);
    CHECK(c.r_max == 700.0);
    CHECK(c.plan.dt == 0.02);
    CHECK(c.plan.l_max == 70);
    CHECK(c.l_b == 12);
    CHECK(c.n_max == 15);
    CHECK(c.scan.alpha == 0.001);
    CHECK(c.scan.epsilon == doctest::Approx(c.pulse.period() / 1000.0));
    CHECK(c.workers == 1);
    CHECK(c.grid().size() == 14000);
    CHECK(c.fingerprint() == default_config().fingerprint());
}

TEST_CASE("period shorthand") {
    const double t = 2.0 * kPi / 0.02;
    CHECK(parse_quantity("T", t, 2 * t) == t);
    CHECK(parse_quantity("T1", t, 2 * t) == 2 * t);
    CHECK(parse_quantity("T/1000", t, t) == doctest::Approx(t / 1000.0));
    CHECK(parse_quantity("0.25*T", t, t) == doctest::Approx(t / 4.0));
    CHECK(parse_quantity(" T1 / 2 ", t, t) == doctest::Approx(t / 2.0));
    CHECK(parse_quantity("1e-3", t, t) == 0.001);
    CHECK_THROWS_AS(parse_quantity("T/0", t, t), ConfigError);
    CHECK_THROWS_AS(parse_quantity("T*2/3", t, t), ConfigError);
    CHECK_THROWS_AS(parse_quantity("x", t, t), ConfigError);

    const auto c = parse_config("omega = 0.05\nn_cycles = 2\nsignal.tau = T1/2\nsignal.epsilon = T/30\n");
    const double period = 2.0 * kPi / 0.05;
    REQUIRE(c.pulse.signal.has_value());
    CHECK(c.pulse.signal->tau == doctest::Approx(period));
    CHECK(c.pulse.signal->epsilon == doctest::Approx(period / 30.0));
    CHECK(c.scan.epsilon == doctest::Approx(period / 30.0));
}

TEST_CASE("lists, comments and the scan tau window") {
    const auto c = parse_config(
        "# a comment\n"
        "scan.e0 = 0.04, 0.05 , 0.06   # trailing\n"
        "scan.tau_count = 5\n"
        "scan.tau_window = T/8\n"
        "scan.levels = 0.5\n");
    CHECK(c.scan.e0 == std::vector<double>{0.04, 0.05, 0.06});
    const auto taus = c.scan_taus();
    REQUIRE(taus.size() == 5);
    const double peak = field_peak_time(c.fundamental());
    CHECK(taus[2] == doctest::Approx(peak));
    CHECK(taus[4] - taus[0] == doctest::Approx(c.pulse.period() / 4.0));
    CHECK(c.scan.levels == std::vector<double>{0.5});
}

TEST_CASE("errors carry source and line") {
    CHECK(error_of("omega = 0.02\nbogus = 1\n") == "run.cfg:2: unknown key 'bogus'");
    CHECK(error_of("omega = 0.02\nomega = 0.03\n") == "run.cfg:2: duplicate key 'omega'");
    CHECK(error_of("\n\njust words\n") == "run.cfg:3: expected 'key = value'");
    CHECK(error_of("peak_field = abc\n") == "run.cfg:1: peak_field: not a number: 'abc'");
    CHECK(error_of("\npeak_field = -0.05\n") == "run.cfg:2: peak_field: must be > 0");
    CHECK(error_of("propagation.l_max = 200\n") == "run.cfg:1: propagation.l_max: must be in [1, 127]");
    CHECK(error_of("scan.e0 = 0.06, 0.05\n") == "run.cfg:1: scan.e0: values must be strictly ascending");
    CHECK(error_of("potential.kind = morse\n") == "run.cfg:1: potential.kind: expected coulomb or yukawa");
    CHECK(error_of("signal.tau = 2*T1\n") == "run.cfg:1: signal.tau: must lie inside (0, T1)");
    CHECK(error_of("projector.l_b = 9\npropagation.l_max = 8\n") ==
          "run.cfg:1: projector.l_b: must not exceed propagation.l_max");
    CHECK(error_of("workers = 0\n") == "run.cfg:1: workers: must be >= 1");
    CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("fingerprint ignores workers and output directory only") {
    const auto a = parse_config("workers = 1\n");
    const auto b = parse_config("workers = 8\noutput.dir = /tmp/x\n");
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint().size() == 16);
    CHECK(a.fingerprint() != parse_config("peak_field = 0.06\n").fingerprint());
    CHECK(a.fingerprint() != parse_config("grid.r_max = 400\n").fingerprint());
    CHECK(a.fingerprint() != parse_config("scan.alpha = -0.001\n").fingerprint());
    // Equal values written differently are the same configuration.
    CHECK(parse_config("scan.epsilon = T/1000\n").fingerprint() == a.fingerprint());
}

TEST_CASE("setup resolves the potential") {
    double amp = 0.0;
    auto c = parse_config("potential.kind = yukawa\npotential.screening = 2\ngrid.r_max = 100\n");
    const auto s = make_setup(c, &amp);
    CHECK(s.potential.kind == Potential::Kind::Yukawa);
    CHECK(amp > 1.0);
    CHECK(s.potential.amplitude == amp);
    CHECK(std::abs(lowest_eigenvalue(s.grid, s.potential, 0) + 0.5) < 1e-6);

    c = parse_config("potential.kind = yukawa\npotential.calibrate = false\npotential.amplitude = 1.5\n");
    const auto u = make_setup(c, &amp);
    CHECK(u.potential.amplitude == 1.5);
    CHECK(amp == 1.5);
    CHECK(make_setup(parse_config("")).potential.kind == Potential::Kind::Coulomb);
}

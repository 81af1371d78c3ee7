#include "sfi/fields.hpp"

#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

using namespace sfi;

namespace {

PulseSpec pulse(double e0 = 0.05, double omega = 0.02, int n = 1) {
    PulseSpec p;
    p.peak_field = e0;
    p.omega = omega;
    p.n_cycles = n;
    return p;
}

}  // namespace

TEST_CASE("vector potential vanishes at the pulse edges") {
    const auto p = pulse();
    CHECK(vector_potential(0.0, p) == 0.0);
    CHECK(std::abs(vector_potential(p.duration(), p)) < 1e-15);
    CHECK(vector_potential(-1.0, p) == 0.0);
    CHECK(vector_potential(p.duration() + 1.0, p) == 0.0);
}

TEST_CASE("vector potential at a quarter of the pulse") {
    const auto p = pulse();
    CHECK(vector_potential(p.duration() / 4.0, p) == doctest::Approx(-1.25).epsilon(1e-14));
}

TEST_CASE("field values at the edges and the midpoint") {
    const auto p = pulse();
    CHECK(fundamental_field(0.0, p) == 0.0);
    CHECK(fundamental_field(p.duration() / 2.0, p) == doctest::Approx(-0.05).epsilon(1e-14));
    CHECK(fundamental_field(p.duration() + 0.5, p) == 0.0);
}

TEST_CASE("field integrates to zero over the pulse") {
    const auto p = pulse();
    const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double t) { return fundamental_field(t, p); }, 0.0, p.duration(), 15, 1e-14);
    CHECK(std::abs(integral) < 1e-12);
}

TEST_CASE("field is minus the time derivative of the vector potential") {
    std::mt19937_64 rng(7);
    for (int n : {1, 2}) {
        const auto p = pulse(0.05, 0.02, n);
        std::uniform_real_distribution<double> u(0.01 * p.duration(), 0.99 * p.duration());
        const double h = 1e-4;
        for (int i = 0; i < 100; ++i) {
            const double t = u(rng);
            const double fd = -(vector_potential(t + h, p) - vector_potential(t - h, p)) / (2 * h);
            const double e = fundamental_field(t, p);
            CHECK(std::abs(fd - e) <= 1e-6 * std::max(std::abs(e), 1e-3 * p.peak_field));
        }
    }
}

TEST_CASE("single-cycle field is even about the midpoint") {
    const auto p = pulse(0.06);
    const double mid = p.duration() / 2.0;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, mid);
    for (int i = 0; i < 100; ++i) {
        const double s = u(rng);
        CHECK(std::abs(fundamental_field(mid + s, p) - fundamental_field(mid - s, p)) < 1e-12);
    }
}

TEST_CASE("signal field peak, tail and missing signal") {
    const auto p = pulse().with_kick(100.0, 0.001, 0.3);
    CHECK(signal_field(100.0, p) == doctest::Approx(0.001 / 0.3).epsilon(1e-15).scale(0));
    CHECK(signal_field(100.0 + 5 * 0.3, p) < 1e-10 * 0.001 / 0.3);
    CHECK(signal_field(100.0 - 5 * 0.3, p) < 1e-10 * 0.001 / 0.3);
    CHECK_THROWS_WITH_AS(signal_field(1.0, pulse()), "no signal configured", NoSignalError);
}

TEST_CASE("signal area is alpha sqrt(pi) for several widths") {
    const double alpha = 0.001;
    const double period = pulse().period();
    for (double eps : {period / 1000.0, period / 100.0, period / 30.0}) {
        const auto p = pulse().with_kick(150.0, alpha, eps);
        const auto& s = *p.signal;
        const double area = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            [&](double t) { return signal_field(t, p); }, s.window_begin(), s.window_end(), 15,
            1e-14);
        CHECK(area == doctest::Approx(alpha * kSqrtPi).epsilon(1e-8));
        CHECK(s.area() == doctest::Approx(alpha * kSqrtPi).epsilon(1e-15));
    }
}

TEST_CASE("total field adds the kick only inside its window") {
    const auto p = pulse().with_kick(150.0, 0.001, 0.3);
    CHECK(total_field(150.0, p) == doctest::Approx(fundamental_field(150.0, p) + 0.001 / 0.3).scale(0));
    CHECK(total_field(150.0 + 8.1 * 0.3, p) == fundamental_field(150.0 + 8.1 * 0.3, p));
    CHECK(total_field(150.0 - 8.1 * 0.3, p) == fundamental_field(150.0 - 8.1 * 0.3, p));
}

TEST_CASE("Keldysh parameter") {
    CHECK(keldysh_gamma(0.02, 0.05, 0.5) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(keldysh_gamma(0.02, 0.02, 0.5) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(keldysh_gamma(0.02, 1e12, 0.5) < 1e-12);
    CHECK_THROWS_AS(keldysh_gamma(0.0, 0.05, 0.5), std::domain_error);
    CHECK_THROWS_AS(keldysh_gamma(0.02, -0.05, 0.5), std::domain_error);
    CHECK_THROWS_AS(keldysh_gamma(0.02, 0.05, 0.0), std::domain_error);
}

TEST_CASE("field peak time, one cycle") {
    for (double omega : {0.02, 0.057, 0.5}) {
        const auto p = pulse(0.05, omega, 1);
        CHECK(std::abs(field_peak_time(p) - p.duration() / 2.0) < 1e-6);
    }
}

TEST_CASE("field peak time, two cycles, against dense sampling") {
    const auto p = pulse(0.05, 0.02, 2);
    const double t = field_peak_time(p);
    const int samples = 100000;
    double best = 0.0, best_t = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const double s = p.duration() * i / samples;
        if (std::abs(fundamental_field(s, p)) > best) {
            best = std::abs(fundamental_field(s, p));
            best_t = s;
        }
    }
    CHECK(std::abs(t - best_t) <= p.duration() / samples);
    CHECK(std::abs(fundamental_field(t, p)) >= best);
    for (double d : {1e-3, -1e-3}) CHECK(std::abs(fundamental_field(t + d, p)) <= std::abs(fundamental_field(t, p)));
    const double h = 1e-5;
    const double slope = (fundamental_field(t + h, p) - fundamental_field(t - h, p)) / (2 * h);
    CHECK(std::abs(slope) < 1e-8);
}

TEST_CASE("pulse validation") {
    auto p = pulse();
    CHECK_NOTHROW(p.validate());
    p.peak_field = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = pulse();
    p.n_cycles = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK_THROWS_AS(pulse().with_kick(-1.0, 0.001, 0.3).validate(), std::invalid_argument);
    CHECK_THROWS_AS(pulse().with_kick(1e4, 0.001, 0.3).validate(), std::invalid_argument);
    CHECK_THROWS_AS(pulse().with_kick(100.0, 0.0, 0.3).validate(), std::invalid_argument);
    CHECK_THROWS_AS(pulse().with_kick(100.0, 0.001, 0.0).validate(), std::invalid_argument);
}

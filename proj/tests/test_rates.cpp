#include "sfi/adk.hpp"
#include "sfi/rates.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace sfi;

namespace {

PulseSpec pulse(double e0, double omega) {
    PulseSpec p;
    p.peak_field = e0;
    p.omega = omega;
    return p;
}

// Cheap box for pipeline properties; the physics is not converged here.
const KickLab& small_lab() {
    static const KickLab lab([] {
        RunSetup s;
        s.grid = RadialGrid::with_extent(0.05, 40.0);
        s.plan.dt = 0.02;
        s.plan.l_max = 6;
        s.l_b = 4;
        return s;
    }());
    return lab;
}

const KickLab& desk_lab() {
    static const KickLab lab([] {
        RunSetup s;
        s.grid = RadialGrid::with_extent(0.05, 400.0);
        s.plan.dt = 0.02;
        s.plan.l_max = 30;
        s.l_b = 12;
        return s;
    }());
    return lab;
}

std::vector<double> gaussian_row(const std::vector<double>& tau, double t0, double width) {
    std::vector<double> row;
    for (double t : tau) row.push_back(std::exp(-(t - t0) * (t - t0) / (width * width)));
    return row;
}

std::vector<double> grid(double lo, double step, int n) {
    std::vector<double> out;
    for (int j = 0; j < n; ++j) out.push_back(lo + j * step);
    return out;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("sfi_test_" + name)).string();
}

}  // namespace

TEST_CASE("instantaneous probability quadrature") {
    const auto p = pulse(0.06, 0.02);
    CHECK(instantaneous_probability([](double) { return 0.0; }, p, 100) == 0.0);
    CHECK(instantaneous_probability([](double) { return 2.5; }, p, 101) ==
          doctest::Approx(2.5 * p.duration()).epsilon(1e-10));
    const auto adk = [](double e) { return adk_rate(e); };
    const double a = instantaneous_probability(adk, p, 4096);
    const double b = instantaneous_probability(adk, p, 8192);
    CHECK(std::abs(a - b) < 1e-6 * b);
    CHECK_THROWS_AS(instantaneous_probability(adk, p, 99), std::invalid_argument);
}

TEST_CASE("functional derivative estimate") {
    CHECK(functional_derivative_estimate(0.0, 0.001) == 0.0);
    CHECK(functional_derivative_estimate(kSqrtPi * 2e-3, 1e-3) == doctest::Approx(2.0));
    CHECK_THROWS_AS(functional_derivative_estimate(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("contour crossings on synthetic rows") {
    const auto tau = grid(100.0, 0.37, 60);
    const double t0 = 111.1;
    const auto row = gaussian_row(tau, t0, 3.0);
    const auto [l, r] = contour_crossings(tau, row, 0.5, tau.front(), tau.back());
    CHECK(std::abs(0.5 * (l + r) - t0) < 1e-9);

    // Shifting the samples by s shifts both crossings by s.
    std::vector<double> shifted_tau;
    for (double t : tau) shifted_tau.push_back(t + 1.25);
    const auto [ls, rs] = contour_crossings(shifted_tau, row, 0.5, 0.0, 1e9);
    CHECK(ls - l == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(rs - r == doctest::Approx(1.25).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(contour_crossings(tau, row, 1.5, 0.0, 1e9), "level outside row range",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(contour_crossings(tau, row, 0.5, t0, 1e9), "level outside row range",
                         std::invalid_argument);
    auto twin = row;
    const auto second = gaussian_row(tau, t0 + 8.0, 1.0);
    for (size_t j = 0; j < twin.size(); ++j) twin[j] = std::max(twin[j], second[j]);
    CHECK_THROWS_WITH_AS(contour_crossings(tau, twin, 0.5, 0.0, 1e9), "non-monotone flanks",
                         std::invalid_argument);
}

TEST_CASE("contour midpoint of an ADK row sits on the field peak") {
    const auto p = pulse(0.06, 0.02);
    const double peak = field_peak_time(p);
    const auto tau = grid(peak - p.period() / 4.0, p.period() / 64.0, 33);
    std::vector<double> row;
    for (double t : tau) row.push_back(-adk_delta_p(t, 0.001, p));
    double top = 0.0;
    for (double v : row) top = std::max(top, v);
    for (double level : {0.5, 0.8}) {
        const auto [l, r] = contour_crossings(tau, row, level * top, tau.front(), tau.back());
        CHECK(std::abs(0.5 * (l + r) - peak) < 1e-3 * p.period());
    }
}

TEST_CASE("delay report") {
    const auto p = pulse(0.05, 0.02);
    const double peak = field_peak_time(p);
    const double step = p.period() / 32.0;
    const auto tau = grid(peak - 8 * step, step, 17);

    SUBCASE("ADK table has no delay") {
        const auto table = adk_contours({0.04, 0.05, 0.06}, tau, p, 0.001, p.period() / 1000.0);
        const auto rep = delay_report(table, {0.5, 0.8}, p);
        CHECK(rep.tau_step == doctest::Approx(step));
        REQUIRE(rep.entries.size() == 9);
        for (const auto& e : rep.entries) {
            CHECK(e.ok());
            CHECK(std::abs(e.delay) < 1e-3 * p.period());
        }
    }

    SUBCASE("a row shifted by two steps reports two steps") {
        ScanResult s;
        s.e0 = {0.05};
        s.tau = tau;
        s.delta_p.resize(1, 17);
        // Negative rows, as for a kick opposing the field, are flipped first.
        const auto row = gaussian_row(tau, peak + 2 * step, 4 * step);
        for (int j = 0; j < 17; ++j) s.delta_p(0, j) = -1e-4 * row[j];
        const auto rep = delay_report(s, {0.5, 0.8}, p);
        REQUIRE(rep.entries.size() == 3);
        for (const auto& e : rep.entries) {
            CHECK(e.ok());
            CHECK(e.delay == doctest::Approx(2 * step).epsilon(0.1));
        }
        CHECK(rep.entries[0].level == 1.0);
        CHECK(rep.entries[0].delay_as() == doctest::Approx(rep.entries[0].delay * 24.18884));
    }

    SUBCASE("failed cells and edge peaks become per-entry errors") {
        ScanResult s;
        s.e0 = {0.04, 0.05};
        s.tau = tau;
        s.delta_p.resize(2, 17);
        const auto centred = gaussian_row(tau, peak, 4 * step);
        const auto edge = gaussian_row(tau, peak + 9 * step, 4 * step);
        for (int j = 0; j < 17; ++j) {
            s.delta_p(0, j) = centred[j];
            s.delta_p(1, j) = edge[j];
        }
        s.delta_p(0, 3) = std::nan("");
        const auto rep = delay_report(s, {0.5}, p);
        REQUIRE(rep.entries.size() == 4);
        CHECK(rep.entries[0].error == "row has failed cells");
        CHECK(rep.entries[1].error == "row has failed cells");
        CHECK(rep.entries[2].error == "peak on the window edge");
        CHECK_FALSE(rep.entries[3].ok());
    }
}

TEST_CASE("pipeline properties on a small box") {
    const auto& lab = small_lab();
    const auto p = pulse(0.1, 0.5);
    const double peak = field_peak_time(p);
    const double eps = p.period() / 1000.0;

    SUBCASE("alpha = 0 gives exactly zero") {
        const auto out = lab.delta_p(p.with_kick(peak, 0.0, eps));
        CHECK(out.delta_p == 0.0);
        CHECK(out.baseline > 0.0);
    }

    SUBCASE("checkpointed and full evaluations agree bitwise") {
        const SignalKick k{peak - 1.0, -0.001, eps};
        const auto c = lab.checkpoint(p, {k, SignalKick{peak + 1.0, 0.001, eps}});
        CHECK(c.steps.size() == 2);
        const auto a = lab.delta_p(c, k);
        const auto b = lab.delta_p(p.with_kick(k.tau, k.alpha, k.epsilon));
        CHECK(a.delta_p == b.delta_p);
        CHECK(a.baseline == lab.baseline(p));
        CHECK(a.delta_p != 0.0);
        // A kick without a stored state falls back to a full run.
        const SignalKick other{peak + 3.0, 0.001, eps};
        CHECK(lab.delta_p(c, other).delta_p ==
              lab.delta_p(p.with_kick(other.tau, other.alpha, other.epsilon)).delta_p);
    }

    SUBCASE("scan") {
        const std::vector<double> e0 = {0.08, 0.1};
        const std::vector<double> tau = {peak - 2.0, peak, peak + 2.0};
        const auto one = scan(lab, p, {0.1}, {peak}, 0.001, eps);
        CHECK(one.result.delta_p(0, 0) == lab.delta_p(p.with_kick(peak, 0.001, eps)).delta_p);
        CHECK(one.result.baseline[0] == lab.baseline(p));

        ScanOptions serial;
        serial.fingerprint = "abc";
        const auto s1 = scan(lab, p, e0, tau, 0.001, eps, serial);
        ScanOptions parallel = serial;
        parallel.workers = 3;
        const auto s3 = scan(lab, p, e0, tau, 0.001, eps, parallel);
        CHECK(s1.result.delta_p == s3.result.delta_p);
        CHECK(s1.result.baseline == s3.result.baseline);
        CHECK(s1.result.failures.empty());
        CHECK(s1.computed_cells == 6);

        const std::string journal = temp_path("journal");
        std::filesystem::remove(journal);
        ScanOptions first = parallel;
        first.journal_path = journal;
        first.max_new_cells = 2;
        const auto part = scan(lab, p, e0, tau, 0.001, eps, first);
        CHECK(part.interrupted);
        ScanOptions again = first;
        again.max_new_cells = -1;
        again.resume = true;
        const auto rest = scan(lab, p, e0, tau, 0.001, eps, again);
        CHECK_FALSE(rest.interrupted);
        CHECK(rest.reused_cells >= 2);
        CHECK(rest.reused_cells + rest.computed_cells == 6);
        CHECK(rest.result.delta_p == s1.result.delta_p);
        CHECK(rest.result.baseline == s1.result.baseline);

        // A torn last line is ignored.
        {
            std::ofstream out(journal, std::ios::app);
            out << "C 0 0 0.08 1";
        }
        CHECK(scan(lab, p, e0, tau, 0.001, eps, again).result.delta_p == s1.result.delta_p);
        ScanOptions wrong = again;
        wrong.fingerprint = "other";
        CHECK_THROWS_AS(scan(lab, p, e0, tau, 0.001, eps, wrong), ScanJournalError);
        std::filesystem::remove(journal);

        CHECK_THROWS_AS(scan(lab, p, {0.1, 0.08}, tau, 0.001, eps), std::invalid_argument);
        CHECK_THROWS_AS(scan(lab, p, e0, {}, 0.001, eps), std::invalid_argument);
    }

    SUBCASE("cell errors are recorded and the scan continues") {
        const auto s = scan(lab, p, {0.1}, {peak, p.duration() + 1.0}, 0.001, eps);
        CHECK(s.result.cell_ok(0, 0));
        CHECK_FALSE(s.result.cell_ok(0, 1));
        REQUIRE(s.result.failures.size() == 1);
        CHECK(s.result.failures[0].col == 1);
    }

    SUBCASE("a potential without a bound state is rejected") {
        RunSetup s;
        s.grid = RadialGrid::with_extent(0.05, 20.0);
        s.potential = Potential::yukawa(0.05, 1.0);
        s.plan.l_max = 2;
        s.l_b = 1;
        CHECK_THROWS_WITH_AS(KickLab{s}, "potential has no bound l=0 state",
                             std::invalid_argument);
    }
}

TEST_CASE("desk-scale first variation") {
    const auto& lab = desk_lab();
    const auto p = pulse(0.06, 0.02);
    const double peak = field_peak_time(p);
    const double eps = p.period() / 1000.0;
    const double s = p.period() / 16.0;
    // E_f(peak) < 0: a negative alpha strengthens the field there.
    REQUIRE(fundamental_field(peak, p) < 0.0);
    const SignalKick aligned{peak, -0.001, eps};
    const SignalKick half{peak, -0.0005, eps};
    const SignalKick opposed{peak, 0.001, eps};
    const SignalKick early{peak - s, -0.001, eps};
    const SignalKick late{peak + s, -0.001, eps};
    const auto c = lab.checkpoint(p, {aligned, early, late});

    const double dp_aligned = lab.delta_p(c, aligned).delta_p;
    const double dp_half = lab.delta_p(c, half).delta_p;
    const double dp_opposed = lab.delta_p(c, opposed).delta_p;
    MESSAGE("baseline " << c.baseline.probability << " dP(-a) " << dp_aligned << " dP(-a/2) "
                        << dp_half << " dP(+a) " << dp_opposed);
    CHECK(dp_aligned > 0.0);
    CHECK(dp_opposed < 0.0);
    CHECK(dp_aligned / dp_half == doctest::Approx(2.0).epsilon(0.05));
    const double est = functional_derivative_estimate(dp_aligned, aligned.alpha);
    CHECK(est == doctest::Approx(functional_derivative_estimate(dp_half, half.alpha)).epsilon(0.05).scale(0));

    // Same sign and order of magnitude as the quasistatic rate derivative.
    const double w = adk_rate_derivative(fundamental_field(peak, p));
    MESSAGE("TDSE estimate " << est << " ADK dW/dE " << w);
    CHECK(est * w > 0.0);
    CHECK(std::abs(est / w) > 0.1);
    CHECK(std::abs(est / w) < 10.0);

    // Kicks at peak -+ T/16 of a single-cycle pulse.
    const double dp_early = lab.delta_p(c, early).delta_p;
    const double dp_late = lab.delta_p(c, late).delta_p;
    MESSAGE("dP(peak - T/16) " << dp_early << " dP(peak + T/16) " << dp_late);
    // The pair difference read as a contour shift along the flank secant; the
    // acceptance bound on any such shift is one T/32 grid step.
    const double slope = (dp_aligned - 0.5 * (dp_early + dp_late)) / s;
    const double shift = std::abs(dp_early - dp_late) / (2.0 * slope);
    MESSAGE("equivalent shift " << shift << " a.u. (step " << p.period() / 32.0 << ")");
    CHECK(slope > 0.0);
    CHECK(shift < p.period() / 32.0);

    // Monotone in E0 at the peak.
    double previous = 0.0;
    for (double e0 : {0.05, 0.06, 0.07}) {
        const auto q = pulse(e0, 0.02);
        const double dp = e0 == 0.06 ? dp_aligned
                                     : lab.delta_p(lab.checkpoint(q, {aligned}), aligned).delta_p;
        MESSAGE("E0 " << e0 << " dP " << dp);
        CHECK(dp > previous);
        previous = dp;
    }
}

#include "sfi/adk.hpp"

#include "sfi/rates.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

namespace sfi {

void AdkParams::validate() const {
    if (!(ionization_potential > 0.0)) throw std::invalid_argument("ADK ionization potential must be > 0");
    if (!(charge > 0.0)) throw std::invalid_argument("ADK charge must be > 0");
}

namespace {

struct AdkConstants {
    double f0;        // kappa^3
    double n_star;
    double prefactor;  // |C|^2 I
};

AdkConstants constants(const AdkParams& a) {
    a.validate();
    const double kappa = std::sqrt(2.0 * a.ionization_potential);
    const double n_star = a.charge / kappa;
    const double c2 = std::pow(2.0, 2.0 * n_star) / (n_star * std::tgamma(2.0 * n_star));
    return {kappa * kappa * kappa, n_star, c2 * a.ionization_potential};
}

}  // namespace

double adk_rate(double field, const AdkParams& a) {
    const auto c = constants(a);
    const double f = std::abs(field);
    if (f == 0.0) return 0.0;
    return c.prefactor * std::pow(2.0 * c.f0 / f, 2.0 * c.n_star - 1.0) *
           std::exp(-2.0 * c.f0 / (3.0 * f));
}

double adk_rate_derivative(double field, const AdkParams& a) {
    if (field == 0.0) throw std::domain_error("derivative singular at zero field");
    const auto c = constants(a);
    const double f = std::abs(field);
    const double dw_df =
        adk_rate(f, a) * (-(2.0 * c.n_star - 1.0) / f + 2.0 * c.f0 / (3.0 * f * f));
    return field > 0.0 ? dw_df : -dw_df;
}

double adk_delta_p(double tau, double alpha, const PulseSpec& p, const AdkParams& a) {
    if (!(tau > 0.0 && tau < p.duration()))
        throw std::invalid_argument("tau must lie inside (0, T1)");
    if (alpha == 0.0) return 0.0;
    return adk_rate_derivative(fundamental_field(tau, p), a) * alpha * kSqrtPi;
}

double adk_delta_p_quadrature(double tau, double alpha, double epsilon, const PulseSpec& p,
                              const AdkParams& a) {
    if (alpha == 0.0) return 0.0;
    const PulseSpec kicked = p.with_kick(tau, alpha, epsilon);
    kicked.validate();
    const auto integrand = [&](double t) {
        const double e = fundamental_field(t, p);
        if (e == 0.0) return 0.0;
        return adk_rate_derivative(e, a) * signal_field(t, kicked);
    };
    const auto& s = *kicked.signal;
    // Split at the centre so both halves see a smooth, one-sided Gaussian flank.
    using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
    return Quad::integrate(integrand, s.window_begin(), tau, 15, 1e-13) +
           Quad::integrate(integrand, tau, s.window_end(), 15, 1e-13);
}

ScanResult adk_contours(const std::vector<double>& e0, const std::vector<double>& tau,
                        const PulseSpec& p, double alpha, double epsilon, const AdkParams& a) {
    if (e0.empty() || tau.empty()) throw std::invalid_argument("scan axes must be nonempty");
    ScanResult out;
    out.e0 = e0;
    out.tau = tau;
    out.alpha = alpha;
    out.epsilon = epsilon;
    out.delta_p.resize(out.rows(), out.cols());
    for (int i = 0; i < out.rows(); ++i) {
        PulseSpec row = p.without_kick();
        row.peak_field = e0[i];
        row.validate();
        for (int j = 0; j < out.cols(); ++j) out.delta_p(i, j) = adk_delta_p(tau[j], alpha, row, a);
        out.baseline.push_back(instantaneous_probability(
            [&](double e) { return adk_rate(e, a); }, row, 4096));
    }
    return out;
}

}  // namespace sfi

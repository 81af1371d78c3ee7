#include "sfi/fields.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <string>

namespace sfi {

void PulseSpec::validate() const {
    if (!(peak_field > 0.0)) throw std::invalid_argument("peak_field must be > 0");
    if (!(omega > 0.0)) throw std::invalid_argument("omega must be > 0");
    if (n_cycles < 1) throw std::invalid_argument("n_cycles must be >= 1");
    if (signal) {
        const double t1 = duration();
        if (!(signal->tau > 0.0 && signal->tau < t1))
            throw std::invalid_argument("signal.tau must lie inside (0, T1)");
        if (!(signal->epsilon > 0.0)) throw std::invalid_argument("signal.epsilon must be > 0");
        if (signal->alpha == 0.0) throw std::invalid_argument("signal.alpha must be non-zero");
    }
}

namespace {

struct Envelope {
    double f, df, d2f;
};

// f(t) = sin^2(pi t / T1) and its first two derivatives.
Envelope envelope(double t, const PulseSpec& p) {
    const double k = kPi / p.duration();
    const double s = std::sin(k * t);
    const double c = std::cos(k * t);
    return {s * s, 2.0 * k * s * c, 2.0 * k * k * (c * c - s * s)};
}

bool in_support(double t, const PulseSpec& p) { return t >= 0.0 && t <= p.duration(); }

double field_rate(double t, const PulseSpec& p) {
    if (!in_support(t, p)) return 0.0;
    const auto [f, df, d2f] = envelope(t, p);
    const double w = p.omega;
    const double s = std::sin(w * t);
    const double c = std::cos(w * t);
    return p.peak_field / w * (d2f * s + 2.0 * df * w * c - f * w * w * s);
}

}  // namespace

double vector_potential(double t, const PulseSpec& p) {
    if (!in_support(t, p)) return 0.0;
    return -p.peak_field / p.omega * envelope(t, p).f * std::sin(p.omega * t);
}

double fundamental_field(double t, const PulseSpec& p) {
    if (!in_support(t, p)) return 0.0;
    const auto [f, df, d2f] = envelope(t, p);
    const double w = p.omega;
    return p.peak_field / w * (df * std::sin(w * t) + f * w * std::cos(w * t));
}

double signal_field(double t, const PulseSpec& p) {
    if (!p.signal) throw NoSignalError();
    const auto& s = *p.signal;
    const double x = (t - s.tau) / s.epsilon;
    return s.alpha / s.epsilon * std::exp(-x * x);
}

double total_field(double t, const PulseSpec& p) {
    double e = fundamental_field(t, p);
    if (p.signal && t >= p.signal->window_begin() && t <= p.signal->window_end() && in_support(t, p))
        e += signal_field(t, p);
    return e;
}

double keldysh_gamma(double omega, double peak_field, double ionization_potential) {
    if (!(omega > 0.0) || !(peak_field > 0.0) || !(ionization_potential > 0.0))
        throw std::domain_error("keldysh_gamma: arguments must be positive");
    return omega * std::sqrt(2.0 * ionization_potential) / peak_field;
}

double field_peak_time(const PulseSpec& p) {
    const double t1 = p.duration();
    const int samples = 4096 * p.n_cycles;
    const double h = t1 / samples;
    int best = 1;
    double best_abs = 0.0;
    for (int i = 1; i < samples; ++i) {
        const double a = std::abs(fundamental_field(i * h, p));
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }
    // |E| is locally maximal where dE/dt changes sign inside the sampled bracket.
    const double lo = (best - 1) * h;
    const double hi = (best + 1) * h;
    const auto rate = [&](double t) { return field_rate(t, p); };
    if (rate(lo) * rate(hi) > 0.0) return best * h;
    std::uintmax_t iterations = 200;
    const auto [a, b] = boost::math::tools::bisect(
        rate, lo, hi, boost::math::tools::eps_tolerance<double>(50), iterations);
    return 0.5 * (a + b);
}

}  // namespace sfi

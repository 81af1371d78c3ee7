#pragma once

#include <optional>
#include <stdexcept>

namespace sfi {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrtPi = 1.77245385090551602730;
/// Atomic unit of time in attoseconds.
inline constexpr double kAttosecondsPerAu = 24.18884;

/// Regularized delta kick (Gaussian of width epsilon centred on tau).
struct SignalKick {
    double tau = 0.0;
    double alpha = 0.0;  ///< area scale; the true kick area is alpha*sqrt(pi)
    double epsilon = 0.0;

    /// Half-width of the support used by the propagator, in units of epsilon.
    static constexpr double kSupport = 8.0;

    double area() const { return alpha * kSqrtPi; }
    double window_begin() const { return tau - kSupport * epsilon; }
    double window_end() const { return tau + kSupport * epsilon; }
};

/// Linearly polarised sin^2-envelope pulse, optionally carrying a signal kick.
struct PulseSpec {
    double peak_field = 0.05;
    double omega = 0.02;
    int n_cycles = 1;
    std::optional<SignalKick> signal;

    double period() const { return 2.0 * kPi / omega; }
    double duration() const { return n_cycles * period(); }

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;

    PulseSpec with_kick(double tau, double alpha, double epsilon) const {
        PulseSpec p = *this;
        p.signal = SignalKick{tau, alpha, epsilon};
        return p;
    }
    PulseSpec without_kick() const {
        PulseSpec p = *this;
        p.signal.reset();
        return p;
    }
};

class NoSignalError : public std::logic_error {
public:
    NoSignalError() : std::logic_error("no signal configured") {}
};

double vector_potential(double t, const PulseSpec& p);

/// E(t) = -dA/dt, evaluated in closed form.
double fundamental_field(double t, const PulseSpec& p);

/// Gaussian kick (alpha/epsilon) exp(-(t-tau)^2/epsilon^2). Throws NoSignalError.
double signal_field(double t, const PulseSpec& p);

/// Field seen by the propagator: fundamental plus the kick restricted to
/// [tau - 8 eps, tau + 8 eps]. Outside that window the kick is < 1e-27 alpha/eps.
double total_field(double t, const PulseSpec& p);

double keldysh_gamma(double omega, double peak_field, double ionization_potential);

/// Time of the global maximum of |E(t)| on (0, T1).
double field_peak_time(const PulseSpec& p);

}  // namespace sfi

#pragma once

#include "sfi/fields.hpp"
#include "sfi/scan_result.hpp"

#include <stdexcept>
#include <vector>

namespace sfi {

/// Quasistatic tunneling rate parameters; hydrogen 1s by default.
struct AdkParams {
    double ionization_potential = 0.5;
    double charge = 1.0;

    void validate() const;
};

/// W(F) = |C|^2 I (2 F0/F)^(2n*-1) exp(-2 F0/(3F)) with kappa = sqrt(2I),
/// F0 = kappa^3, n* = Z/kappa, |C|^2 = 2^(2n*) / (n* Gamma(2n*)), F = |E|.
/// For hydrogen this is (4/|E|) exp(-2/(3|E|)).
double adk_rate(double field, const AdkParams& a = {});

/// dW/dE; throws std::domain_error at E = 0.
double adk_rate_derivative(double field, const AdkParams& a = {});

/// dW/dE(E_f(tau)) * alpha * sqrt(pi) for the pulse `p` (its signal is ignored).
double adk_delta_p(double tau, double alpha, const PulseSpec& p, const AdkParams& a = {});

/// The same first variation as an explicit integral of dW/dE(E_f(t)) times the
/// Gaussian kick of width epsilon over its +-8 epsilon support.
double adk_delta_p_quadrature(double tau, double alpha, double epsilon, const PulseSpec& p,
                              const AdkParams& a = {});

/// Table of adk_delta_p over the axes; baseline holds the instantaneous-rate P.
ScanResult adk_contours(const std::vector<double>& e0, const std::vector<double>& tau,
                        const PulseSpec& p, double alpha, double epsilon,
                        const AdkParams& a = {});

}  // namespace sfi

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace qsd {

/**
 * Principal eigenpair (lambda0, eta) of the discretized generator.
 *
 * Weights are gamma_i = exp(-(V_i - gamma_shift)). eta is positive at every
 * interior node and scaled so that sum gamma eta^2 = sum gamma eta, which
 * makes alpha(eta) = 1 for alpha = eta * gamma.
 */
struct EigenPair {
    double lambda0 = 0.0;
    std::vector<double> eta;
    std::optional<double> lambda1;
    double gamma_shift = 0.0;
    std::string normalization = "gamma(eta^2)=gamma(eta)";
};

}  // namespace qsd

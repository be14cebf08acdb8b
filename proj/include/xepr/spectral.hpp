#pragma once

// Analytic squeezing spectra and loss-weighted nullifier predictions.
//
// The OPO emits squeezed light with Lorentzian-shaped spectra
//   R±(omega) = 1 ± (1 - eta(omega)) 4x / ((1 ∓ x)^2 + (omega/gamma)^2),
// where x is the pump parameter, gamma the cavity HWHM in rad/s and
// eta(omega) the electronic-noise-to-shot-noise ratio. A wave-packet defined
// by the truncated Gaussian mode function f(t) measures the filtered levels
//   Sq  = (1/2pi) int |f(omega)|^2 R-(omega) domega   (and ASq with R+),
// normalized so that x = 0 gives exactly 1 (shot noise).

#include "xepr/gaussian.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace xepr {

struct OPOSpec {
    double gamma = 0.0;   // angular-frequency HWHM (rad/s)
    double pump_x = 0.0;  // in [0, 1)
    // Electronic-noise ratio eta(omega): constant unless a table is given.
    double eta_constant = 0.0;
    std::vector<std::pair<double, double>> eta_table;  // (omega, eta), omega ascending

    double eta(double omega) const;
    bool eta_is_constant() const { return eta_table.empty(); }
    void validate() const;
};

struct ModeFunction {
    double bandwidth = 0.0;  // Gaussian filter Gamma (rad/s)
    double duration = 0.0;   // bin length T (s)
    double norm = 0.0;       // prefactor making int_{-T/2}^{T/2} f^2 dt = 1

    static ModeFunction make(double bandwidth, double duration);

    // f(t) = norm * exp(-(Gamma t)^2) on [-T/2, T/2], zero outside.
    double value(double t) const;
    // f(omega) = int f(t) e^{-i omega t} dt; real and even for this f.
    double fourier(double omega) const;
};

// (R-, R+) at the given angular frequency.
std::pair<double, double> r_plus_minus(const OPOSpec& opo, double omega);

// Pump parameter x reproducing a DC squeezed-variance ratio of
// `db_below` decibels below shot noise (closed form from R-(0)).
double pump_from_dc_squeezing_db(double db_below);

// Mode-function-filtered (Sq, ASq) by frequency-domain quadrature.
// Throws if internal grid refinement fails to converge to rel_tol.
std::pair<double, double> filtered_squeezing(const OPOSpec& opo, const ModeFunction& mf,
                                             double rel_tol = 1e-8);

// Same quantities through the closed-form time-domain kernel
//   Sq = 1 - (1-eta) (2 x gamma / (1+x)) D((1+x) gamma),
//   D(c) = int int f(t) f(t') e^{-c|t-t'|} dt dt',
// an algebraically independent route used as the cross-check oracle.
// Constant eta only.
std::pair<double, double> filtered_squeezing_time_domain(const OPOSpec& opo,
                                                         const ModeFunction& mf);

struct NullifierPrediction {
    double var_x = 1.0;
    double var_p = 1.0;
    double db_x = 0.0;
    double db_p = 0.0;
};

// Loss-weighted nullifier variances (vacuum reference 1):
//   <X^2> = 1/4 (nA + nAF)^2 (Sq_A - 1) + 1/4 (nB - nBF)^2 (ASq_B - 1) + 1
//   <P^2> = 1/4 (nB + nBF)^2 (Sq_B - 1) + 1/4 (nA - nAF)^2 (ASq_A - 1) + 1
// with n = sqrt of the corresponding intensity efficiency.
NullifierPrediction predicted_nullifier_variances(double sq_a, double asq_a,
                                                  double sq_b, double asq_b,
                                                  const LossSpec& losses);

enum class SpectrumSide : std::uint8_t { Squeezed, Antisqueezed };

// Stationary Gaussian trace whose boxcar-averaged samples carry exactly the
// R∓ spectrum (scaled so shot noise has per-quadrature variance 1/4).
// Samples are produced by the exact one-pole innovation filter of the
// rational spectrum, so the only discretization effect is the boxcar itself.
// Constant eta only.
std::vector<double> synthesize_trace(const OPOSpec& opo, double duration,
                                     double sample_rate, std::uint64_t seed,
                                     SpectrumSide side = SpectrumSide::Squeezed);

}  // namespace xepr

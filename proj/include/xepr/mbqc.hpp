#pragma once

// Teleportation-based single-mode Gaussian computation: measurement angles
// to implemented unitary, the measure-and-feedforward protocol with exact
// Gaussian conditioning, the unconditional Heisenberg-picture route, and
// sequential gate chains.

#include "xepr/gaussian.hpp"

#include <cstdint>
#include <vector>

namespace xepr {

struct GateAngles {
    double theta1 = 0.0;
    double theta2 = 0.0;

    double theta_plus() const { return theta1 + theta2; }
    double theta_minus() const { return theta1 - theta2; }
    // A finite gate needs theta_minus != 0 mod pi.
    void validate() const;
};

// Single-mode Gaussian unitary r -> S r + d with det(S) = 1.
struct GaussianGate {
    Eigen::Matrix2d matrix = Eigen::Matrix2d::Identity();
    Eigen::Vector2d displacement = Eigen::Vector2d::Zero();
};

// R(-t+/2 + pi/2) * diag(1/tan(t-/2), tan(t-/2)) * R(-t+/2). For positive
// tangent the middle block is the x-squeezer with parameter log tan(t-/2);
// a negative tangent carries the extra pi rotation in the same form.
GaussianGate gate_from_angles(const GateAngles& angles);

// Output displacement (x, p) canceling the measurement back-action:
// sqrt(2)/sin(t-) * (t1 sin(theta2) - t2 sin(theta1),
//                    t1 cos(theta2) - t2 cos(theta1)).
Eigen::Vector2d feedforward(double t1, double t2, const GateAngles& angles);

// Exact Gaussian conditioning on the homodyne outcome c.r = t (rank-1
// Schur complement update). The measured direction keeps zero variance.
CovarianceState condition_on_outcome(const CovarianceState& state,
                                     const Eigen::VectorXd& coeffs, double outcome);

struct TeleportStep {
    CovarianceState output;  // 1 mode, after feedforward
    double outcome1 = 0.0;
    double outcome2 = 0.0;
};

// Conditional route at explicitly given homodyne outcomes. Circuit: input
// mode coupled to an EPR pair made from an x-squeezed and a p-squeezed
// vacuum (parameter r) on a balanced beam splitter; measures
// cos(theta1) x_in + sin(theta1) p_in and the same form at theta2 on the
// A arm; feedforward displaces the surviving B arm.
TeleportStep teleport_step_at(const CovarianceState& input, double r,
                              const GateAngles& angles, double t1, double t2);

// Same protocol with both outcomes drawn from their exact marginals.
TeleportStep simulate_teleport_step(const CovarianceState& input, double r,
                                    const GateAngles& angles, std::uint64_t seed);

// Heisenberg-picture output moments, exact at every r: the output equals
// gate_from_angles applied to the input plus isotropic added noise
// (e^{-2r}/2 per quadrature).
struct UnconditionalTeleport {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d added_noise = Eigen::Matrix2d::Zero();  // cov - G cov_in G^T
};
UnconditionalTeleport teleport_output_moments(const CovarianceState& input, double r,
                                              const GateAngles& angles);

// Chains teleport steps, one fresh EPR pair per step; outcome draws use
// per-step substreams of `seed`.
CovarianceState sequential_mbqc(const CovarianceState& input, double r,
                                const std::vector<GateAngles>& steps, std::uint64_t seed);

// Product of the intended step gates (steps[0] applied first).
GaussianGate composite_gate(const std::vector<GateAngles>& steps);

}  // namespace xepr

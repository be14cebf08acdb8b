#include "xepr/mbqc.hpp"

#include "xepr/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace xepr {

void GateAngles::validate() const {
    if (!std::isfinite(theta1) || !std::isfinite(theta2))
        throw std::invalid_argument("GateAngles: angles must be finite");
    if (std::abs(std::sin(theta_minus())) < 1e-12)
        throw std::invalid_argument("GateAngles: theta1 - theta2 = 0 mod pi gives a singular gate");
}

GaussianGate gate_from_angles(const GateAngles& angles) {
    angles.validate();
    const double tp = angles.theta_plus();
    const double t = std::tan(0.5 * angles.theta_minus());
    Eigen::Matrix2d mid;
    mid << 1.0 / t, 0.0, 0.0, t;
    GaussianGate gate;
    gate.matrix = make_rotation(-0.5 * tp + 0.5 * std::numbers::pi).matrix * mid *
                  make_rotation(-0.5 * tp).matrix;
    return gate;
}

Eigen::Vector2d feedforward(double t1, double t2, const GateAngles& angles) {
    angles.validate();
    const double sm = std::sin(angles.theta_minus());
    const double s = std::numbers::sqrt2 / sm;
    return {s * (t1 * std::sin(angles.theta2) - t2 * std::sin(angles.theta1)),
            s * (t1 * std::cos(angles.theta2) - t2 * std::cos(angles.theta1))};
}

CovarianceState condition_on_outcome(const CovarianceState& state,
                                     const Eigen::VectorXd& coeffs, double outcome) {
    if (coeffs.size() != state.mean.size())
        throw std::invalid_argument("condition_on_outcome: coefficient length mismatch");
    const Eigen::VectorXd cv = state.cov * coeffs;
    const double var = coeffs.dot(cv);
    if (!(var > 0.0))
        throw std::invalid_argument("condition_on_outcome: measured direction has no variance");
    const Eigen::VectorXd gain = cv / var;
    CovarianceState out = state;
    out.mean += gain * (outcome - coeffs.dot(state.mean));
    out.cov -= gain * cv.transpose();
    return out;
}

namespace {

struct TeleportCircuit {
    CovarianceState state;        // 3 modes: 0 = input, 1 = A arm, 2 = B arm
    Eigen::VectorXd c1;           // measured directions
    Eigen::VectorXd c2;
};

TeleportCircuit build_circuit(const CovarianceState& input, double r, const GateAngles& angles) {
    if (input.nmodes() != 1)
        throw std::invalid_argument("teleport: input must be a single-mode state");
    angles.validate();

    CovarianceState state = CovarianceState::vacuum(3);
    state.mean.head<2>() = input.mean;
    state.cov.topLeftCorner<2, 2>() = input.cov;

    for (const SymplecticOp& op : {embed_op(make_squeezer(r, Squeezing::X), 1, 3),
                                   embed_op(make_squeezer(r, Squeezing::P), 2, 3),
                                   make_beamsplitter(1, 2, 3), make_beamsplitter(0, 1, 3)}) {
        state = apply_op(state, op);
    }

    TeleportCircuit tc{std::move(state), Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(6)};
    tc.c1(0) = std::cos(angles.theta1);
    tc.c1(1) = std::sin(angles.theta1);
    tc.c2(2) = std::cos(angles.theta2);
    tc.c2(3) = std::sin(angles.theta2);
    return tc;
}

TeleportStep finish_step(const CovarianceState& conditioned, const GateAngles& angles, double t1,
                         double t2) {
    TeleportStep step;
    step.outcome1 = t1;
    step.outcome2 = t2;
    step.output = CovarianceState(conditioned.mean.segment<2>(4),
                                  conditioned.cov.block<2, 2>(4, 4));
    step.output.mean += feedforward(t1, t2, angles);
    return step;
}

}  // namespace

TeleportStep teleport_step_at(const CovarianceState& input, double r, const GateAngles& angles,
                              double t1, double t2) {
    TeleportCircuit tc = build_circuit(input, r, angles);
    CovarianceState state = condition_on_outcome(tc.state, tc.c1, t1);
    state = condition_on_outcome(state, tc.c2, t2);
    return finish_step(state, angles, t1, t2);
}

TeleportStep simulate_teleport_step(const CovarianceState& input, double r,
                                    const GateAngles& angles, std::uint64_t seed) {
    GaussianRng rng(seed);
    TeleportCircuit tc = build_circuit(input, r, angles);

    const double m1 = tc.c1.dot(tc.state.mean);
    const double v1 = tc.c1.dot(tc.state.cov * tc.c1);
    const double t1 = rng.normal(m1, std::sqrt(v1));
    CovarianceState state = condition_on_outcome(tc.state, tc.c1, t1);

    const double m2 = tc.c2.dot(state.mean);
    const double v2 = tc.c2.dot(state.cov * tc.c2);
    const double t2 = rng.normal(m2, std::sqrt(v2));
    state = condition_on_outcome(state, tc.c2, t2);

    return finish_step(state, angles, t1, t2);
}

UnconditionalTeleport teleport_output_moments(const CovarianceState& input, double r,
                                              const GateAngles& angles) {
    TeleportCircuit tc = build_circuit(input, r, angles);
    const double sm = std::sin(angles.theta_minus());
    const double s = std::numbers::sqrt2 / sm;

    // Output quadratures with the feedforward substituted by the measured
    // operators themselves: both homodyne results enter linearly.
    Eigen::Matrix<double, 2, 6> m = Eigen::Matrix<double, 2, 6>::Zero();
    m(0, 4) = 1.0;
    m(1, 5) = 1.0;
    m.row(0) += s * std::sin(angles.theta2) * tc.c1.transpose();
    m.row(0) -= s * std::sin(angles.theta1) * tc.c2.transpose();
    m.row(1) += s * std::cos(angles.theta2) * tc.c1.transpose();
    m.row(1) -= s * std::cos(angles.theta1) * tc.c2.transpose();

    UnconditionalTeleport out;
    out.mean = m * tc.state.mean;
    out.cov = m * tc.state.cov * m.transpose();
    const Eigen::Matrix2d g = gate_from_angles(angles).matrix;
    out.added_noise = out.cov - g * input.cov * g.transpose();
    return out;
}

CovarianceState sequential_mbqc(const CovarianceState& input, double r,
                                const std::vector<GateAngles>& steps, std::uint64_t seed) {
    if (steps.empty()) throw std::invalid_argument("sequential_mbqc: need at least one step");
    CovarianceState state = input;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        state = simulate_teleport_step(state, r, steps[i], substream_seed(seed, i)).output;
    }
    return state;
}

GaussianGate composite_gate(const std::vector<GateAngles>& steps) {
    if (steps.empty()) throw std::invalid_argument("composite_gate: need at least one step");
    GaussianGate gate;
    for (const GateAngles& angles : steps) {
        gate.matrix = gate_from_angles(angles).matrix * gate.matrix;
    }
    return gate;
}

}  // namespace xepr

#pragma once

// Gaussian-state engine: elementary symplectic ops, loss channels, and the
// dense dual-rail circuit used as the oracle for the streaming simulator and
// the graph extraction.

#include "xepr/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace xepr {

enum class Squeezing : std::uint8_t { X = 0, P = 1 };

// Single-mode squeezer. Squeezing::X maps x -> e^{-r} x, p -> e^{r} p
// (rail-A convention); Squeezing::P swaps the roles (rail B).
SymplecticOp make_squeezer(double r, Squeezing which);

// Single-mode counterclockwise rotation:
// x -> x cos(theta) - p sin(theta), p -> x sin(theta) + p cos(theta).
SymplecticOp make_rotation(double theta);

// Embed a single-mode op at `slot` in an nmodes register.
SymplecticOp embed_op(const SymplecticOp& op, int slot, int nmodes);

// Balanced beam splitter on register slots (i, j), both quadratures:
// r_i -> (r_i + r_j)/sqrt(2), r_j -> (-r_i + r_j)/sqrt(2).
// The ordering matters: the first argument receives the sum port.
SymplecticOp make_beamsplitter(int slot_i, int slot_j, int nmodes);
SymplecticOp make_beamsplitter(const ModeIndex& i, const ModeIndex& j, int nmodes);

CovarianceState apply_op(const CovarianceState& state, const SymplecticOp& op);

// Standard single-mode attenuation: mixes the slot with vacuum on a
// beam splitter of intensity transmissivity eta2.
CovarianceState apply_loss(const CovarianceState& state, int slot, double eta2);

// Effective intensity efficiencies of the two squeezed beams through the two
// detection channels (free space and fiber).
struct LossSpec {
    double eta2_A = 1.0;
    double eta2_B = 1.0;
    double eta2_AF = 1.0;
    double eta2_BF = 1.0;

    bool lossless() const {
        return eta2_A == 1.0 && eta2_B == 1.0 && eta2_AF == 1.0 && eta2_BF == 1.0;
    }
    void validate() const;
};

// Per-bin channel model implementing the per-beam, per-channel efficiencies.
//
// The four efficiencies are properties of source beams (mode overlap with
// each homodyne LO), not of the physical paths, so no single-mode
// beam-splitter pair can realize them. Instead each bin's (free-space, fiber)
// pair after the first beam splitter is mapped by the deterministic matrix D
// below and then given additive Gaussian noise with per-quadrature variances
// (sigma_x/4, sigma_p/4) on each channel, calibrated so the loss-weighted
// nullifier variances come out exactly in expectation. When all four
// efficiencies are equal this reduces to ordinary balanced attenuation.
struct ChannelNoiseModel {
    Eigen::Matrix2d D = Eigen::Matrix2d::Identity();  // acts on (free-space, fiber)
    double sigma_x = 0.0;  // residual shot-noise fraction, x quadrature
    double sigma_p = 0.0;

    bool trivial() const { return sigma_x == 0.0 && sigma_p == 0.0 && D.isIdentity(1e-15); }

    static ChannelNoiseModel from_losses(const LossSpec& losses);
};

// Input second moments for one rail's squeezed beam (variances, vacuum 1/4).
struct RailInput {
    double var_squeezed = kVacuumVar;
    double var_antisqueezed = kVacuumVar;

    static RailInput from_r(double r) {
        return {kVacuumVar * std::exp(-2.0 * r), kVacuumVar * std::exp(2.0 * r)};
    }
    // sq_ratio/asq_ratio are variance ratios to shot noise (Sq, ASq).
    static RailInput from_ratios(double sq_ratio, double asq_ratio) {
        return {kVacuumVar * sq_ratio, kVacuumVar * asq_ratio};
    }
};

// Result of the dense circuit. `measured` holds the 2*nbins wave-packet
// register in k-major, rail-minor order (A_1, B_1, A_2, B_2, ...). `pure`
// additionally keeps the last pre-recombination fiber wave-packet as a
// trailing (2*nbins+1)-th mode so that the lossless state stays pure; graph
// extraction needs that register, nullifier analysis the measured one.
struct DenseCircuitResult {
    CovarianceState measured;
    std::optional<CovarianceState> pure;
};

// Builds the full extended-EPR covariance for nbins time bins:
// squeeze, first beam splitter per bin, per-bin channel loss, one-bin delay
// of the fiber rail, second beam splitter in (fiber, free-space) order.
// The first rail-B slot carries the fiber line's initial vacuum; nullifiers
// are defined for k = 1 .. nbins-1 only.
DenseCircuitResult dense_circuit_general(int nbins, const RailInput& rail_a,
                                         const RailInput& rail_b,
                                         const LossSpec& losses);

CovarianceState dense_circuit(int nbins, double r_a, double r_b,
                              const LossSpec& losses = {});

// Pure 2*nbins+1 register of the lossless circuit (for graph extraction).
CovarianceState dense_circuit_pure(int nbins, double r_a, double r_b);

// Coefficient rows of the nullifiers on a register with `register_modes`
// modes laid out k-major, rail minor:
//   X_k = x(A_k) + x(B_k) + x(A_{k+1}) - x(B_{k+1})
//   P_k = p(A_k) + p(B_k) - p(A_{k+1}) + p(B_{k+1})
std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> nullifier_rows(int k, int register_modes);

// Variance of a linear combination row^T r under the state.
double quadratic_form_variance(const CovarianceState& state, const Eigen::RowVectorXd& row);

// Smallest eigenvalue of the Hermitian matrix cov + (i/4) Omega;
// >= 0 (to tolerance) for every valid quantum state.
double uncertainty_defect(const Eigen::MatrixXd& cov);

// Symplectic eigenvalues (Williamson); all equal 1/4 iff the state is pure.
std::vector<double> symplectic_eigenvalues(const Eigen::MatrixXd& cov);

}  // namespace xepr

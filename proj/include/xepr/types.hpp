#pragma once

// Core quadrature/state types shared by every module.
//
// Conventions (fixed once, asserted in tests):
//   * hbar = 1/2, so the vacuum variance of each quadrature is 1/4 and
//     [x, p] = i/2.
//   * Quadratures are interleaved per mode: (x_1, p_1, x_2, p_2, ...).
//   * Mode ordering for dual-rail registers is k-major, rail minor:
//     (A_1, B_1, A_2, B_2, ...), temporal index k starting at 1.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace xepr {

inline constexpr double kVacuumVar = 0.25;

enum class Rail : std::uint8_t { A = 0, B = 1 };

inline char rail_char(Rail r) { return r == Rail::A ? 'A' : 'B'; }

// Identifies one wave-packet: rail A or B at temporal index k (1-based).
struct ModeIndex {
    Rail rail = Rail::A;
    int k = 1;

    friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
};

// Flat position of a mode in the k-major, rail-minor register layout.
inline int mode_slot(const ModeIndex& m) {
    if (m.k < 1) throw std::out_of_range("ModeIndex.k must be >= 1");
    return 2 * (m.k - 1) + static_cast<int>(m.rail);
}

using QuadratureVector = Eigen::VectorXd;

// Standard symplectic form for N modes in interleaved ordering:
// block-diagonal copies of [[0, 1], [-1, 0]].
inline Eigen::MatrixXd symplectic_form(int nmodes) {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * nmodes, 2 * nmodes);
    for (int m = 0; m < nmodes; ++m) {
        omega(2 * m, 2 * m + 1) = 1.0;
        omega(2 * m + 1, 2 * m) = -1.0;
    }
    return omega;
}

// Gaussian state: first and second moments.
struct CovarianceState {
    QuadratureVector mean;
    Eigen::MatrixXd cov;

    CovarianceState() = default;
    CovarianceState(QuadratureVector mu, Eigen::MatrixXd sigma)
        : mean(std::move(mu)), cov(std::move(sigma)) {
        if (cov.rows() != cov.cols() || cov.rows() != mean.size())
            throw std::invalid_argument("CovarianceState: dimension mismatch");
        if (cov.rows() % 2 != 0)
            throw std::invalid_argument("CovarianceState: odd dimension");
    }

    int nmodes() const { return static_cast<int>(mean.size()) / 2; }

    static CovarianceState vacuum(int nmodes) {
        return CovarianceState(
            QuadratureVector::Zero(2 * nmodes),
            Eigen::MatrixXd::Identity(2 * nmodes, 2 * nmodes) * kVacuumVar);
    }
};

// Linear Gaussian transform r -> S r + d.
struct SymplecticOp {
    Eigen::MatrixXd matrix;
    QuadratureVector displacement;

    explicit SymplecticOp(Eigen::MatrixXd S)
        : matrix(std::move(S)),
          displacement(QuadratureVector::Zero(matrix.rows())) {}
    SymplecticOp(Eigen::MatrixXd S, QuadratureVector d)
        : matrix(std::move(S)), displacement(std::move(d)) {
        if (matrix.rows() != displacement.size())
            throw std::invalid_argument("SymplecticOp: dimension mismatch");
    }

    int nmodes() const { return static_cast<int>(matrix.rows()) / 2; }

    // || S Omega S^T - Omega ||_inf, zero for exact symplectic matrices.
    double symplectic_defect() const {
        Eigen::MatrixXd omega = symplectic_form(nmodes());
        return (matrix * omega * matrix.transpose() - omega)
            .cwiseAbs()
            .maxCoeff();
    }
};

inline double db_from_ratio(double ratio) {
    if (!(ratio > 0.0)) throw std::domain_error("db_from_ratio: ratio <= 0");
    return 10.0 * std::log10(ratio);
}

inline double ratio_from_db(double db) { return std::pow(10.0, db / 10.0); }

// Squeezing parameter r such that the squeezed variance ratio e^{-2r}
// sits `db_below` decibels below shot noise (db_below >= 0).
inline double squeeze_param_from_db(double db_below) {
    return -0.5 * std::log(ratio_from_db(-db_below));
}

}  // namespace xepr

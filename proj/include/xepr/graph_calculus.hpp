#pragma once

// Complex-weighted graph representation of Gaussian pure states.
//
// A zero-mean pure Gaussian state has wavefunction psi(x) ~ exp(i x^T Z x)
// with Z = R + iM symmetric and M positive definite. The dual-rail circuit
// produces Z_E = i cosh(2r) I - i sinh(2r) G; quarter-cycle phase shifts on
// either parity class of time bins turn it into the cluster-state graph
// Z_C = i sech(2r) I + tanh(2r) G. G links consecutive time bins only, with
// edge weight -1/2 into a rail-A node and +1/2 into a rail-B node; it is
// bipartite in the time-bin parity and self-inverse on interior rows.

#include "xepr/gaussian.hpp"
#include "xepr/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace xepr {

struct ComplexGraph {
    Eigen::MatrixXcd Z;

    int nmodes() const { return static_cast<int>(Z.rows()); }
    // Max asymmetry and the smallest eigenvalue of Im(Z); a valid graph has
    // the first ~0 and the second > 0.
    double symmetry_defect() const;
    double im_min_eigenvalue() const;
    void validate() const;
};

struct IdealGraph {
    Eigen::MatrixXd G;
    int nbins = 0;
};

// Ideal (infinite-squeezing) cluster graph on the 2*nbins wave-packet
// register.
IdealGraph build_G(int nbins);

// Z_E = i cosh(2r) I - i sinh(2r) G.
ComplexGraph build_ZE(int nbins, double r);

// Z_C = i sech(2r) I + tanh(2r) G.
ComplexGraph build_ZC(int nbins, double r);

// Register slots (in the k-major layout) at temporal distance >= 1 from both
// chain ends: k in [2, nbins-1]. Formula/extraction equalities hold exactly
// only there; boundary rows carry the finite-chain remnants.
std::vector<int> interior_slots(int nbins);

// Both rails of every odd (resp. even) temporal index.
std::vector<int> odd_time_slots(int nbins);
std::vector<int> even_time_slots(int nbins);

// Phase shift by `angle` on the selected register slots, applied through the
// covariance picture (rotate, re-extract). The angle follows the optical
// delay convention a -> e^{-i angle} a, i.e. x -> x cos(angle) + p sin(angle),
// p -> -x sin(angle) + p cos(angle); angle = -pi/2 maps build_ZE onto
// build_ZC for either parity class.
ComplexGraph phase_shift_transform(const ComplexGraph& graph,
                                   const std::vector<int>& slots, double angle);

// Recover Z from a zero-mean pure state: M = (1/4) Cxx^{-1}, R = Cxx^{-1} Cxp.
// Throws on impure states, nonzero mean, or an ill-conditioned x block.
ComplexGraph z_from_covariance(const CovarianceState& state);

// Zero-mean pure state with the given graph.
CovarianceState covariance_from_z(const ComplexGraph& graph);

// Largest entry of E[(p - Zx)^dag (p - Zx)^T], which vanishes identically
// when `graph` is the exact graph of `state`.
double check_nullifiers(const ComplexGraph& graph, const CovarianceState& state);

// Variances of the large-squeezing approximate nullifiers (x - Gx) and
// (p + Gp), one per register row; interior rows decay as e^{-2r}.
struct ApproxNullifierVariances {
    Eigen::VectorXd var_x;
    Eigen::VectorXd var_p;
};
ApproxNullifierVariances approximate_nullifier_variances(const IdealGraph& graph,
                                                         const CovarianceState& state);

// True when no edge joins two odd or two even temporal indices.
bool is_bipartite_even_odd(const IdealGraph& graph);

// Max |(G^2 - I)_{ij}| over interior rows i (all columns j).
double interior_self_inverse_defect(const IdealGraph& graph);

// Edge-list export: nodes as {"rail": "A"|"B", "k": int}, weights as [re, im].
// Requires an even register (wave-packet registers only).
nlohmann::json graph_edges_json(const Eigen::MatrixXcd& z, double tol = 1e-12);
nlohmann::json graph_edges_json(const ComplexGraph& graph, double tol = 1e-12);
nlohmann::json graph_edges_json(const IdealGraph& graph, double tol = 1e-12);

}  // namespace xepr

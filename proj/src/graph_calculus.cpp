#include "xepr/graph_calculus.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>

namespace xepr {

using Complex = std::complex<double>;

double ComplexGraph::symmetry_defect() const {
    return (Z - Z.transpose()).cwiseAbs().maxCoeff();
}

double ComplexGraph::im_min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Z.imag(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void ComplexGraph::validate() const {
    if (Z.rows() != Z.cols()) throw std::invalid_argument("ComplexGraph: not square");
    if (symmetry_defect() > 1e-9)
        throw std::invalid_argument("ComplexGraph: Z not symmetric");
    if (im_min_eigenvalue() <= 0.0)
        throw std::invalid_argument("ComplexGraph: Im(Z) not positive definite");
}

IdealGraph build_G(int nbins) {
    if (nbins < 3) throw std::invalid_argument("build_G: nbins must be >= 3");
    const int n = 2 * nbins;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < nbins; ++k) {
        for (Rail from : {Rail::A, Rail::B}) {
            for (Rail to : {Rail::A, Rail::B}) {
                const int u = mode_slot({from, k});
                const int v = mode_slot({to, k + 1});
                const double w = (to == Rail::B) ? 0.5 : -0.5;
                g(u, v) = w;
                g(v, u) = w;
            }
        }
    }
    return {std::move(g), nbins};
}

ComplexGraph build_ZE(int nbins, double r) {
    if (r < 0.0) throw std::domain_error("build_ZE: r must be >= 0");
    const IdealGraph ideal = build_G(nbins);
    const int n = 2 * nbins;
    Eigen::MatrixXcd z = Complex(0.0, std::cosh(2.0 * r)) *
                         Eigen::MatrixXcd::Identity(n, n);
    z -= Complex(0.0, std::sinh(2.0 * r)) * ideal.G.cast<Complex>();
    return {std::move(z)};
}

ComplexGraph build_ZC(int nbins, double r) {
    if (r < 0.0) throw std::domain_error("build_ZC: r must be >= 0");
    const IdealGraph ideal = build_G(nbins);
    const int n = 2 * nbins;
    Eigen::MatrixXcd z = Complex(0.0, 1.0 / std::cosh(2.0 * r)) *
                         Eigen::MatrixXcd::Identity(n, n);
    z += Complex(std::tanh(2.0 * r), 0.0) * ideal.G.cast<Complex>();
    return {std::move(z)};
}

std::vector<int> interior_slots(int nbins) {
    std::vector<int> slots;
    for (int k = 2; k <= nbins - 1; ++k) {
        slots.push_back(mode_slot({Rail::A, k}));
        slots.push_back(mode_slot({Rail::B, k}));
    }
    return slots;
}

namespace {

std::vector<int> parity_slots(int nbins, int parity) {
    std::vector<int> slots;
    for (int k = 1; k <= nbins; ++k) {
        if (k % 2 != parity) continue;
        slots.push_back(mode_slot({Rail::A, k}));
        slots.push_back(mode_slot({Rail::B, k}));
    }
    return slots;
}

}  // namespace

std::vector<int> odd_time_slots(int nbins) { return parity_slots(nbins, 1); }
std::vector<int> even_time_slots(int nbins) { return parity_slots(nbins, 0); }

ComplexGraph phase_shift_transform(const ComplexGraph& graph,
                                   const std::vector<int>& slots, double angle) {
    graph.validate();
    CovarianceState state = covariance_from_z(graph);
    // Delay convention: x -> x cos + p sin, p -> -x sin + p cos, which is the
    // counterclockwise rotation by -angle.
    const SymplecticOp rot = make_rotation(-angle);
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(state.cov.rows(), state.cov.rows());
    for (int slot : slots) {
        if (slot < 0 || slot >= state.nmodes())
            throw std::out_of_range("phase_shift_transform: slot out of range");
        s.block<2, 2>(2 * slot, 2 * slot) = rot.matrix;
    }
    state = apply_op(state, SymplecticOp(std::move(s)));
    return z_from_covariance(state);
}

ComplexGraph z_from_covariance(const CovarianceState& state) {
    if (state.mean.cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("z_from_covariance: state must have zero mean");
    const auto nus = symplectic_eigenvalues(state.cov);
    for (double nu : nus)
        if (std::abs(nu - kVacuumVar) > 1e-6)
            throw std::invalid_argument("z_from_covariance: state is not pure");

    const int n = state.nmodes();
    Eigen::MatrixXd cxx(n, n), cxp(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            cxx(i, j) = state.cov(2 * i, 2 * j);
            cxp(i, j) = state.cov(2 * i, 2 * j + 1);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cxx);
    const double emin = es.eigenvalues().minCoeff();
    const double emax = es.eigenvalues().maxCoeff();
    if (!(emin > 0.0) || emax / emin > 1e10)
        throw std::domain_error("z_from_covariance: x-covariance block ill-conditioned");
    const Eigen::MatrixXd cxx_inv =
        es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();

    Eigen::MatrixXd m = 0.25 * cxx_inv;
    Eigen::MatrixXd r = cxx_inv * cxp;
    m = 0.5 * (m + m.transpose()).eval();
    r = 0.5 * (r + r.transpose()).eval();
    Eigen::MatrixXcd z = r.cast<Complex>() + Complex(0.0, 1.0) * m.cast<Complex>();
    return {std::move(z)};
}

CovarianceState covariance_from_z(const ComplexGraph& graph) {
    graph.validate();
    const int n = graph.nmodes();
    const Eigen::MatrixXd r = graph.Z.real();
    const Eigen::MatrixXd m = graph.Z.imag();
    const Eigen::MatrixXd m_inv = m.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd cxx = 0.25 * m_inv;
    const Eigen::MatrixXd cxp = cxx * r;
    const Eigen::MatrixXd cpp = 0.25 * (m + r * m_inv * r);
    Eigen::MatrixXd cov(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            cov(2 * i, 2 * j) = cxx(i, j);
            cov(2 * i, 2 * j + 1) = cxp(i, j);
            cov(2 * i + 1, 2 * j) = cxp(j, i);
            cov(2 * i + 1, 2 * j + 1) = cpp(i, j);
        }
    }
    cov = 0.5 * (cov + cov.transpose()).eval();
    return CovarianceState(QuadratureVector::Zero(2 * n), std::move(cov));
}

double check_nullifiers(const ComplexGraph& graph, const CovarianceState& state) {
    const int n = graph.nmodes();
    if (state.nmodes() != n)
        throw std::invalid_argument("check_nullifiers: dimension mismatch");
    // Non-symmetrized moment matrix <r_a r_b> = cov + (i/4) Omega.
    Eigen::MatrixXcd gamma = state.cov.cast<Complex>();
    gamma += Complex(0.0, 0.25) * symplectic_form(n).cast<Complex>();
    // Nullifier coefficients u = p - Z x as rows over (x_1,p_1,x_2,p_2,...).
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, 2 * n);
    for (int i = 0; i < n; ++i) {
        c(i, 2 * i + 1) = 1.0;
        for (int j = 0; j < n; ++j) c(i, 2 * j) -= graph.Z(i, j);
    }
    const Eigen::MatrixXcd residual = c.conjugate() * gamma * c.transpose();
    return residual.cwiseAbs().maxCoeff();
}

ApproxNullifierVariances approximate_nullifier_variances(const IdealGraph& graph,
                                                         const CovarianceState& state) {
    const int n = static_cast<int>(graph.G.rows());
    if (state.nmodes() < n)
        throw std::invalid_argument("approximate_nullifier_variances: register too small");
    Eigen::MatrixXd cxx(n, n), cpp(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            cxx(i, j) = state.cov(2 * i, 2 * j);
            cpp(i, j) = state.cov(2 * i + 1, 2 * j + 1);
        }
    }
    const Eigen::MatrixXd ix = Eigen::MatrixXd::Identity(n, n) - graph.G;
    const Eigen::MatrixXd ip = Eigen::MatrixXd::Identity(n, n) + graph.G;
    return {(ix * cxx * ix.transpose()).diagonal(), (ip * cpp * ip.transpose()).diagonal()};
}

bool is_bipartite_even_odd(const IdealGraph& graph) {
    const int n = static_cast<int>(graph.G.rows());
    for (int u = 0; u < n; ++u) {
        for (int v = 0; v < n; ++v) {
            if (graph.G(u, v) == 0.0) continue;
            const int ku = u / 2 + 1, kv = v / 2 + 1;
            if (ku % 2 == kv % 2) return false;
        }
    }
    return true;
}

double interior_self_inverse_defect(const IdealGraph& graph) {
    const Eigen::MatrixXd g2 =
        graph.G * graph.G - Eigen::MatrixXd::Identity(graph.G.rows(), graph.G.cols());
    double defect = 0.0;
    for (int slot : interior_slots(graph.nbins))
        defect = std::max(defect, g2.row(slot).cwiseAbs().maxCoeff());
    return defect;
}

namespace {

nlohmann::json node_json(int slot) {
    return {{"rail", std::string(1, rail_char(slot % 2 == 0 ? Rail::A : Rail::B))},
            {"k", slot / 2 + 1}};
}

}  // namespace

nlohmann::json graph_edges_json(const Eigen::MatrixXcd& z, double tol) {
    const int n = static_cast<int>(z.rows());
    if (n % 2 != 0)
        throw std::invalid_argument("graph_edges_json: register must pair rails");
    nlohmann::json nodes = nlohmann::json::array();
    for (int slot = 0; slot < n; ++slot) nodes.push_back(node_json(slot));
    nlohmann::json edges = nlohmann::json::array();
    for (int u = 0; u < n; ++u) {
        for (int v = u; v < n; ++v) {
            const Complex w = z(u, v);
            if (std::abs(w) <= tol) continue;
            edges.push_back({{"from", node_json(u)},
                             {"to", node_json(v)},
                             {"weight", {w.real(), w.imag()}}});
        }
    }
    return {{"nodes", nodes}, {"edges", edges}};
}

nlohmann::json graph_edges_json(const ComplexGraph& graph, double tol) {
    return graph_edges_json(graph.Z, tol);
}

nlohmann::json graph_edges_json(const IdealGraph& graph, double tol) {
    return graph_edges_json(graph.G.cast<Complex>().eval(), tol);
}

}  // namespace xepr

#include "xepr/gaussian.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <sstream>

namespace xepr {

SymplecticOp make_squeezer(double r, Squeezing which) {
    if (!std::isfinite(r)) throw std::invalid_argument("make_squeezer: r not finite");
    Eigen::MatrixXd s(2, 2);
    const double down = std::exp(-r);
    const double up = std::exp(r);
    if (which == Squeezing::X)
        s << down, 0.0, 0.0, up;
    else
        s << up, 0.0, 0.0, down;
    return SymplecticOp(std::move(s));
}

SymplecticOp make_rotation(double theta) {
    Eigen::MatrixXd s(2, 2);
    const double c = std::cos(theta), sn = std::sin(theta);
    s << c, -sn, sn, c;
    return SymplecticOp(std::move(s));
}

SymplecticOp embed_op(const SymplecticOp& op, int slot, int nmodes) {
    if (op.nmodes() != 1) throw std::invalid_argument("embed_op: expected single-mode op");
    if (slot < 0 || slot >= nmodes) throw std::out_of_range("embed_op: slot out of range");
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * nmodes, 2 * nmodes);
    s.block<2, 2>(2 * slot, 2 * slot) = op.matrix;
    QuadratureVector d = QuadratureVector::Zero(2 * nmodes);
    d.segment<2>(2 * slot) = op.displacement;
    return SymplecticOp(std::move(s), std::move(d));
}

SymplecticOp make_beamsplitter(int slot_i, int slot_j, int nmodes) {
    if (slot_i == slot_j) throw std::invalid_argument("make_beamsplitter: identical slots");
    if (slot_i < 0 || slot_j < 0 || slot_i >= nmodes || slot_j >= nmodes)
        throw std::out_of_range("make_beamsplitter: slot out of range");
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * nmodes, 2 * nmodes);
    const double h = 1.0 / std::sqrt(2.0);
    for (int q = 0; q < 2; ++q) {
        const int i = 2 * slot_i + q, j = 2 * slot_j + q;
        s(i, i) = h;
        s(i, j) = h;
        s(j, i) = -h;
        s(j, j) = h;
    }
    return SymplecticOp(std::move(s));
}

SymplecticOp make_beamsplitter(const ModeIndex& i, const ModeIndex& j, int nmodes) {
    return make_beamsplitter(mode_slot(i), mode_slot(j), nmodes);
}

CovarianceState apply_op(const CovarianceState& state, const SymplecticOp& op) {
    if (op.matrix.rows() != state.cov.rows())
        throw std::invalid_argument("apply_op: dimension mismatch");
    return CovarianceState(op.matrix * state.mean + op.displacement,
                           op.matrix * state.cov * op.matrix.transpose());
}

CovarianceState apply_loss(const CovarianceState& state, int slot, double eta2) {
    if (eta2 < 0.0 || eta2 > 1.0)
        throw std::domain_error("apply_loss: transmissivity outside [0, 1]");
    if (slot < 0 || slot >= state.nmodes()) throw std::out_of_range("apply_loss: slot");
    const double eta = std::sqrt(eta2);
    CovarianceState out = state;
    for (int q = 0; q < 2; ++q) {
        const int idx = 2 * slot + q;
        out.mean(idx) *= eta;
        out.cov.row(idx) *= eta;
        out.cov.col(idx) *= eta;
        out.cov(idx, idx) += (1.0 - eta2) * kVacuumVar;
    }
    return out;
}

void LossSpec::validate() const {
    for (double e : {eta2_A, eta2_B, eta2_AF, eta2_BF})
        if (!(e >= 0.0 && e <= 1.0))
            throw std::domain_error("LossSpec: efficiency outside [0, 1]");
    // The calibrated channel model must not require negative noise.
    ChannelNoiseModel::from_losses(*this);
}

ChannelNoiseModel ChannelNoiseModel::from_losses(const LossSpec& losses) {
    const double ea = std::sqrt(losses.eta2_A);
    const double eb = std::sqrt(losses.eta2_B);
    const double eaf = std::sqrt(losses.eta2_AF);
    const double ebf = std::sqrt(losses.eta2_BF);
    ChannelNoiseModel m;
    m.D << 0.5 * (ea + eb), 0.5 * (eb - ea), 0.5 * (ebf - eaf), 0.5 * (eaf + ebf);
    m.sigma_x = 1.0 - 0.25 * (ea + eaf) * (ea + eaf) - 0.25 * (eb - ebf) * (eb - ebf);
    m.sigma_p = 1.0 - 0.25 * (eb + ebf) * (eb + ebf) - 0.25 * (ea - eaf) * (ea - eaf);
    if (m.sigma_x < -1e-12 || m.sigma_p < -1e-12) {
        std::ostringstream msg;
        msg << "LossSpec: efficiency combination needs negative compensation noise "
            << "(sigma_x=" << m.sigma_x << ", sigma_p=" << m.sigma_p
            << "); not representable";
        throw std::domain_error(msg.str());
    }
    m.sigma_x = std::max(m.sigma_x, 0.0);
    m.sigma_p = std::max(m.sigma_p, 0.0);
    return m;
}

namespace {

// Construction layout: modes 0..N-1 are rail-A inputs a_k, N..2N-1 rail-B
// inputs b_k, mode 2N the fiber line's initial vacuum. After the first beam
// splitter, mode k is the free-space channel of bin k and mode N+k its fiber
// channel.
struct ConstructionLayout {
    int nbins;
    int total() const { return 2 * nbins + 1; }
    int fs(int bin) const { return bin; }            // 0-based bin
    int fib(int bin) const { return nbins + bin; }
    int initial_vacuum() const { return 2 * nbins; }
};

}  // namespace

DenseCircuitResult dense_circuit_general(int nbins, const RailInput& rail_a,
                                         const RailInput& rail_b,
                                         const LossSpec& losses) {
    if (nbins < 2) throw std::invalid_argument("dense_circuit: nbins must be >= 2");
    losses.validate();
    const ConstructionLayout lay{nbins};
    const int m = lay.total();

    CovarianceState st = CovarianceState::vacuum(m);
    for (int k = 0; k < nbins; ++k) {
        st.cov(2 * lay.fs(k), 2 * lay.fs(k)) = rail_a.var_squeezed;        // x of a_k
        st.cov(2 * lay.fs(k) + 1, 2 * lay.fs(k) + 1) = rail_a.var_antisqueezed;
        st.cov(2 * lay.fib(k), 2 * lay.fib(k)) = rail_b.var_antisqueezed;  // x of b_k
        st.cov(2 * lay.fib(k) + 1, 2 * lay.fib(k) + 1) = rail_b.var_squeezed;
    }

    Eigen::MatrixXd s1 = Eigen::MatrixXd::Identity(2 * m, 2 * m);
    for (int k = 0; k < nbins; ++k)
        s1 = make_beamsplitter(lay.fs(k), lay.fib(k), m).matrix * s1;
    st = apply_op(st, SymplecticOp(std::move(s1)));

    const ChannelNoiseModel ch = ChannelNoiseModel::from_losses(losses);
    if (!ch.trivial()) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Identity(2 * m, 2 * m);
        for (int k = 0; k < nbins; ++k) {
            for (int q = 0; q < 2; ++q) {
                const int fs = 2 * lay.fs(k) + q, fib = 2 * lay.fib(k) + q;
                d(fs, fs) = ch.D(0, 0);
                d(fs, fib) = ch.D(0, 1);
                d(fib, fs) = ch.D(1, 0);
                d(fib, fib) = ch.D(1, 1);
            }
        }
        st.mean = d * st.mean;
        st.cov = d * st.cov * d.transpose();
        for (int k = 0; k < nbins; ++k) {
            for (int mode : {lay.fs(k), lay.fib(k)}) {
                st.cov(2 * mode, 2 * mode) += ch.sigma_x * kVacuumVar;
                st.cov(2 * mode + 1, 2 * mode + 1) += ch.sigma_p * kVacuumVar;
            }
        }
    }

    // One-bin delay of the fiber rail: bin k recombines the free-space
    // channel of bin k with the fiber channel of bin k-1 (the line's initial
    // vacuum for k = 0). The fiber port enters first (sum port).
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Identity(2 * m, 2 * m);
    for (int k = 0; k < nbins; ++k) {
        const int bport = (k == 0) ? lay.initial_vacuum() : lay.fib(k - 1);
        s2 = make_beamsplitter(bport, lay.fs(k), m).matrix * s2;
    }
    st = apply_op(st, SymplecticOp(std::move(s2)));

    // Reorder into wave-packet slots A_1, B_1, A_2, B_2, ..., trailing
    // leftover (the undelayed fiber channel of the final bin).
    std::vector<int> construction_of_slot(m);
    for (int k = 1; k <= nbins; ++k) {
        construction_of_slot[2 * (k - 1)] = lay.fs(k - 1);
        construction_of_slot[2 * (k - 1) + 1] =
            (k == 1) ? lay.initial_vacuum() : lay.fib(k - 2);
    }
    construction_of_slot[2 * nbins] = lay.fib(nbins - 1);

    Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    for (int slot = 0; slot < m; ++slot)
        for (int q = 0; q < 2; ++q)
            perm(2 * slot + q, 2 * construction_of_slot[slot] + q) = 1.0;
    st.mean = perm * st.mean;
    st.cov = perm * st.cov * perm.transpose();

    DenseCircuitResult out;
    out.measured = CovarianceState(st.mean.head(4 * nbins).eval(),
                                   st.cov.topLeftCorner(4 * nbins, 4 * nbins).eval());
    if (losses.lossless()) out.pure = std::move(st);
    return out;
}

CovarianceState dense_circuit(int nbins, double r_a, double r_b, const LossSpec& losses) {
    return dense_circuit_general(nbins, RailInput::from_r(r_a), RailInput::from_r(r_b),
                                 losses)
        .measured;
}

CovarianceState dense_circuit_pure(int nbins, double r_a, double r_b) {
    auto res = dense_circuit_general(nbins, RailInput::from_r(r_a),
                                     RailInput::from_r(r_b), LossSpec{});
    return std::move(*res.pure);
}

std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> nullifier_rows(int k, int register_modes) {
    if (k < 1) throw std::out_of_range("nullifier_rows: k must be >= 1");
    const ModeIndex ak{Rail::A, k}, bk{Rail::B, k};
    const ModeIndex ak1{Rail::A, k + 1}, bk1{Rail::B, k + 1};
    if (mode_slot(bk1) >= register_modes)
        throw std::out_of_range("nullifier_rows: k+1 exceeds register");
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(2 * register_modes);
    Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(2 * register_modes);
    x(2 * mode_slot(ak)) = 1.0;
    x(2 * mode_slot(bk)) = 1.0;
    x(2 * mode_slot(ak1)) = 1.0;
    x(2 * mode_slot(bk1)) = -1.0;
    p(2 * mode_slot(ak) + 1) = 1.0;
    p(2 * mode_slot(bk) + 1) = 1.0;
    p(2 * mode_slot(ak1) + 1) = -1.0;
    p(2 * mode_slot(bk1) + 1) = 1.0;
    return {std::move(x), std::move(p)};
}

double quadratic_form_variance(const CovarianceState& state, const Eigen::RowVectorXd& row) {
    if (row.size() != state.cov.rows())
        throw std::invalid_argument("quadratic_form_variance: dimension mismatch");
    return row * state.cov * row.transpose();
}

double uncertainty_defect(const Eigen::MatrixXd& cov) {
    const int nmodes = static_cast<int>(cov.rows()) / 2;
    Eigen::MatrixXcd h = cov.cast<std::complex<double>>();
    const Eigen::MatrixXd omega = symplectic_form(nmodes);
    h += std::complex<double>(0.0, 0.25) * omega.cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

std::vector<double> symplectic_eigenvalues(const Eigen::MatrixXd& cov) {
    const int nmodes = static_cast<int>(cov.rows()) / 2;
    const Eigen::MatrixXd k = cov * symplectic_form(nmodes);
    Eigen::EigenSolver<Eigen::MatrixXd> es(k, /*computeEigenvectors=*/false);
    std::vector<double> nus;
    nus.reserve(nmodes);
    for (int i = 0; i < 2 * nmodes; ++i) {
        const double im = es.eigenvalues()(i).imag();
        if (im > 0.0) nus.push_back(im);
    }
    std::sort(nus.begin(), nus.end());
    return nus;
}

}  // namespace xepr

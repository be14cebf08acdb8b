#include "xepr/spectral.hpp"

#include "xepr/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace xepr {

namespace {

struct GaussLegendre {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

GaussLegendre gauss_legendre(int n) {
    GaussLegendre gl;
    gl.x.resize(n);
    gl.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double xi = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double p0 = 0.0;
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            p0 = 1.0;
            double p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) * xi * p1 - j * p2) / (j + 1);
            }
            dp = n * (xi * p0 - p1) / (xi * xi - 1.0);
            const double dx = p0 / dp;
            xi -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
        gl.x[i] = -xi;
        gl.x[n - 1 - i] = xi;
        gl.w[i] = wi;
        gl.w[n - 1 - i] = wi;
    }
    return gl;
}

const GaussLegendre& gl16() {
    static const GaussLegendre gl = gauss_legendre(16);
    return gl;
}

const GaussLegendre& gl12() {
    static const GaussLegendre gl = gauss_legendre(12);
    return gl;
}

// Fixed quadrature grid on [0, T/2] carrying weight * f(t), dense enough that
// f(omega) = 2 * sum_i u[i] * cos(omega * t[i]) holds up to omega_max.
struct FourierGrid {
    std::vector<double> t;
    std::vector<double> u;
};

FourierGrid make_fourier_grid(const ModeFunction& mf, double omega_max, double phase_per_panel) {
    const double a = 0.5 * mf.duration;
    const auto& gl = gl16();
    const int npanels =
        std::max(8, static_cast<int>(std::ceil(omega_max * a / phase_per_panel)));
    FourierGrid grid;
    grid.t.reserve(static_cast<std::size_t>(npanels) * gl.x.size());
    grid.u.reserve(grid.t.capacity());
    const double h = a / npanels;
    for (int p = 0; p < npanels; ++p) {
        const double mid = (p + 0.5) * h;
        for (std::size_t i = 0; i < gl.x.size(); ++i) {
            const double t = mid + 0.5 * h * gl.x[i];
            grid.t.push_back(t);
            grid.u.push_back(0.5 * h * gl.w[i] * mf.value(t));
        }
    }
    return grid;
}

double fourier_on_grid(const FourierGrid& grid, double omega) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.t.size(); ++i) {
        acc += grid.u[i] * std::cos(omega * grid.t[i]);
    }
    return 2.0 * acc;
}

// (1/2pi) * int_{-W}^{W} |f(omega)|^2 * L-/+ domega for both Lorentzian
// factors L-/+ = (1 - eta) 4x / ((1 -/+ x)^2 + (omega/gamma)^2) in one pass.
struct LorentzIntegrals {
    double minus = 0.0;
    double plus = 0.0;
};

LorentzIntegrals lorentz_integrals(const OPOSpec& opo, const ModeFunction& mf, double omega_max,
                                   double domega, double phase_per_panel) {
    const FourierGrid grid = make_fourier_grid(mf, omega_max, phase_per_panel);
    const auto& gl = gl16();
    const int npanels = std::max(4, static_cast<int>(std::ceil(omega_max / domega)));
    const double h = omega_max / npanels;
    const double x = opo.pump_x;
    const double inv_g2 = 1.0 / (opo.gamma * opo.gamma);
    LorentzIntegrals out;
    for (int p = 0; p < npanels; ++p) {
        const double mid = (p + 0.5) * h;
        for (std::size_t i = 0; i < gl.x.size(); ++i) {
            const double omega = mid + 0.5 * h * gl.x[i];
            const double f = fourier_on_grid(grid, omega);
            const double common = 0.5 * h * gl.w[i] * f * f * (1.0 - opo.eta(omega)) * 4.0 * x;
            const double s2 = omega * omega * inv_g2;
            out.minus += common / ((1.0 + x) * (1.0 + x) + s2);
            out.plus += common / ((1.0 - x) * (1.0 - x) + s2);
        }
    }
    // Even integrand, so double the [0, W] half; then the 1/(2pi) measure.
    out.minus /= std::numbers::pi;
    out.plus /= std::numbers::pi;
    return out;
}

// Truncation point making the |f|^2/omega^2 boundary tail of the Lorentzian
// integrals smaller than abs_tol.
double tail_cutoff(const OPOSpec& opo, const ModeFunction& mf, double abs_tol) {
    const double a = 0.5 * mf.duration;
    const double edge = 2.0 * mf.value(a);  // boundary-term amplitude of f(omega) ~ edge/omega
    const double boundary_sq = edge * edge;
    const double coeff =
        boundary_sq * 4.0 * std::max(opo.pump_x, 1e-3) * opo.gamma * opo.gamma * 0.5 /
        std::numbers::pi;
    const double w_tail = std::cbrt(coeff / (3.0 * abs_tol));
    return std::max({40.0 * opo.gamma, 40.0 * mf.bandwidth, w_tail});
}

// D(c) = int int f(t) f(t') exp(-c|t - t'|) dt dt' by panelized quadrature,
// accumulating the one-sided convolution g(t) = int_{-a}^{t} f e^{-c(t-t')}
// panel by panel so every exponent stays non-positive.
double double_exponential_overlap(const ModeFunction& mf, double c, int npanels) {
    const double a = 0.5 * mf.duration;
    const auto& gl = gl12();
    const double h = 2.0 * a / npanels;
    double acc = 0.0;
    double g_edge = 0.0;
    for (int p = 0; p < npanels; ++p) {
        const double lo = -a + p * h;
        for (std::size_t i = 0; i < gl.x.size(); ++i) {
            const double t = lo + 0.5 * h * (1.0 + gl.x[i]);
            // Partial convolution over [lo, t] plus the carried prefix.
            double part = 0.0;
            const double hp = t - lo;
            for (std::size_t j = 0; j < gl.x.size(); ++j) {
                const double tp = lo + 0.5 * hp * (1.0 + gl.x[j]);
                part += 0.5 * hp * gl.w[j] * mf.value(tp) * std::exp(-c * (t - tp));
            }
            const double g = g_edge * std::exp(-c * (t - lo)) + part;
            acc += 0.5 * h * gl.w[i] * mf.value(t) * g;
        }
        double full = 0.0;
        for (std::size_t j = 0; j < gl.x.size(); ++j) {
            const double tp = lo + 0.5 * h * (1.0 + gl.x[j]);
            full += 0.5 * h * gl.w[j] * mf.value(tp) * std::exp(-c * (lo + h - tp));
        }
        g_edge = g_edge * std::exp(-c * h) + full;
    }
    return 2.0 * acc;
}

double eta_lookup(const std::vector<std::pair<double, double>>& table, double omega) {
    const double w = std::abs(omega);
    if (w <= table.front().first) return table.front().second;
    if (w >= table.back().first) return table.back().second;
    const auto it = std::upper_bound(table.begin(), table.end(), w,
                                     [](double v, const auto& e) { return v < e.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double s = (w - lo.first) / (hi.first - lo.first);
    return lo.second + s * (hi.second - lo.second);
}

}  // namespace

double OPOSpec::eta(double omega) const {
    if (eta_table.empty()) return eta_constant;
    return eta_lookup(eta_table, omega);
}

void OPOSpec::validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("OPOSpec: gamma must be positive");
    if (!(pump_x >= 0.0 && pump_x < 1.0))
        throw std::invalid_argument("OPOSpec: pump_x must lie in [0, 1)");
    if (eta_table.empty()) {
        if (!(eta_constant >= 0.0 && eta_constant <= 1.0))
            throw std::invalid_argument("OPOSpec: eta_constant must lie in [0, 1]");
        return;
    }
    double prev = -1.0;
    for (const auto& [w, e] : eta_table) {
        if (!(w >= 0.0) || w <= prev)
            throw std::invalid_argument("OPOSpec: eta_table frequencies must ascend");
        if (!(e >= 0.0 && e <= 1.0))
            throw std::invalid_argument("OPOSpec: eta_table values must lie in [0, 1]");
        prev = w;
    }
}

ModeFunction ModeFunction::make(double bandwidth, double duration) {
    if (!(bandwidth > 0.0) || !(duration > 0.0))
        throw std::invalid_argument("ModeFunction: bandwidth and duration must be positive");
    ModeFunction mf;
    mf.bandwidth = bandwidth;
    mf.duration = duration;
    // int_{-T/2}^{T/2} exp(-2 (G t)^2) dt = sqrt(pi/2)/G * erf(sqrt(2) G T/2)
    const double integral = std::sqrt(std::numbers::pi / 2.0) / bandwidth *
                            std::erf(std::numbers::sqrt2 * bandwidth * 0.5 * duration);
    mf.norm = 1.0 / std::sqrt(integral);
    return mf;
}

double ModeFunction::value(double t) const {
    if (std::abs(t) > 0.5 * duration) return 0.0;
    const double g = bandwidth * t;
    return norm * std::exp(-g * g);
}

double ModeFunction::fourier(double omega) const {
    const FourierGrid grid = make_fourier_grid(*this, std::abs(omega), 6.0);
    return fourier_on_grid(grid, omega);
}

std::pair<double, double> r_plus_minus(const OPOSpec& opo, double omega) {
    const double x = opo.pump_x;
    const double s2 = (omega / opo.gamma) * (omega / opo.gamma);
    const double depth = (1.0 - opo.eta(omega)) * 4.0 * x;
    const double r_minus = 1.0 - depth / ((1.0 + x) * (1.0 + x) + s2);
    const double r_plus = 1.0 + depth / ((1.0 - x) * (1.0 - x) + s2);
    return {r_minus, r_plus};
}

double pump_from_dc_squeezing_db(double db_below) {
    if (!(db_below >= 0.0))
        throw std::invalid_argument("pump_from_dc_squeezing_db: level must be >= 0 dB");
    const double s = std::sqrt(ratio_from_db(-db_below));
    return (1.0 - s) / (1.0 + s);
}

std::pair<double, double> filtered_squeezing(const OPOSpec& opo, const ModeFunction& mf,
                                             double rel_tol) {
    opo.validate();
    if (!(rel_tol > 0.0)) throw std::invalid_argument("filtered_squeezing: rel_tol must be > 0");
    if (opo.pump_x == 0.0) return {1.0, 1.0};

    const double a = 0.5 * mf.duration;
    const double osc_limit = 6.0 / a;  // keeps |f|^2 oscillation resolved per panel
    const double lorentz_width = opo.gamma * std::max(1.0 - opo.pump_x, 1e-3);
    const double domega = std::min({osc_limit, 0.75 * lorentz_width, 2.0 * mf.bandwidth});
    const double w_max = tail_cutoff(opo, mf, 0.01 * rel_tol);

    const LorentzIntegrals coarse = lorentz_integrals(opo, mf, w_max, domega, 8.0);
    const LorentzIntegrals fine =
        lorentz_integrals(opo, mf, 1.4 * w_max, 0.6 * domega, 5.0);

    const double sq = 1.0 - fine.minus;
    const double asq = 1.0 + fine.plus;
    const double err_minus = std::abs(fine.minus - coarse.minus);
    const double err_plus = std::abs(fine.plus - coarse.plus);
    if (err_minus > rel_tol * std::max(std::abs(sq), 1e-3) || err_plus > rel_tol * asq) {
        throw std::runtime_error("filtered_squeezing: quadrature did not converge to " +
                                 std::to_string(rel_tol) + " relative");
    }
    return {sq, asq};
}

std::pair<double, double> filtered_squeezing_time_domain(const OPOSpec& opo,
                                                         const ModeFunction& mf) {
    opo.validate();
    if (!opo.eta_is_constant())
        throw std::invalid_argument(
            "filtered_squeezing_time_domain: tabulated eta(omega) is not supported here");
    const double x = opo.pump_x;
    const double eta = opo.eta_constant;
    if (x == 0.0) return {1.0, 1.0};

    const auto overlap = [&](double c) {
        const double d1 = double_exponential_overlap(mf, c, 256);
        const double d2 = double_exponential_overlap(mf, c, 512);
        if (std::abs(d1 - d2) > 1e-10 * std::max(std::abs(d2), 1e-6))
            throw std::runtime_error("filtered_squeezing_time_domain: kernel overlap diverged");
        return d2;
    };
    const double sq =
        1.0 - (1.0 - eta) * (2.0 * x * opo.gamma / (1.0 + x)) * overlap((1.0 + x) * opo.gamma);
    const double asq =
        1.0 + (1.0 - eta) * (2.0 * x * opo.gamma / (1.0 - x)) * overlap((1.0 - x) * opo.gamma);
    return {sq, asq};
}

NullifierPrediction predicted_nullifier_variances(double sq_a, double asq_a, double sq_b,
                                                  double asq_b, const LossSpec& losses) {
    losses.validate();
    if (sq_a > 1.0 + 1e-9 || sq_b > 1.0 + 1e-9)
        throw std::invalid_argument("predicted_nullifier_variances: Sq must be <= 1");
    if (asq_a < 1.0 - 1e-9 || asq_b < 1.0 - 1e-9)
        throw std::invalid_argument("predicted_nullifier_variances: ASq must be >= 1");
    const double na = std::sqrt(losses.eta2_A);
    const double nb = std::sqrt(losses.eta2_B);
    const double naf = std::sqrt(losses.eta2_AF);
    const double nbf = std::sqrt(losses.eta2_BF);

    NullifierPrediction pred;
    pred.var_x = 0.25 * (na + naf) * (na + naf) * (sq_a - 1.0) +
                 0.25 * (nb - nbf) * (nb - nbf) * (asq_b - 1.0) + 1.0;
    pred.var_p = 0.25 * (nb + nbf) * (nb + nbf) * (sq_b - 1.0) +
                 0.25 * (na - naf) * (na - naf) * (asq_a - 1.0) + 1.0;
    pred.db_x = db_from_ratio(pred.var_x);
    pred.db_p = db_from_ratio(pred.var_p);
    return pred;
}

std::vector<double> synthesize_trace(const OPOSpec& opo, double duration, double sample_rate,
                                     std::uint64_t seed, SpectrumSide side) {
    opo.validate();
    if (!opo.eta_is_constant())
        throw std::invalid_argument("synthesize_trace: tabulated eta(omega) is not supported");
    if (!(duration > 0.0) || !(sample_rate > 0.0))
        throw std::invalid_argument("synthesize_trace: duration and sample_rate must be positive");

    // Spectral factorization R(omega) = (omega^2 + b^2) / (omega^2 + c^2):
    // the trace is w + (b - c) * z with z a unit-white-noise-driven one-pole
    // filter dz = -c z dt + w dt, sampled as exact boxcar averages.
    const double x = opo.pump_x;
    const double eta = opo.eta_constant;
    const double g = opo.gamma;
    double b = 0.0;
    double c = 0.0;
    if (side == SpectrumSide::Squeezed) {
        c = g * (1.0 + x);
        b = g * std::sqrt((1.0 + x) * (1.0 + x) - 4.0 * x * (1.0 - eta));
    } else {
        c = g * (1.0 - x);
        b = g * std::sqrt((1.0 - x) * (1.0 - x) + 4.0 * x * (1.0 - eta));
    }
    const double kappa = b - c;

    const double dt = 1.0 / sample_rate;
    const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
    const double e1 = std::exp(-c * dt);
    const double e2 = std::exp(-2.0 * c * dt);
    const double ramp = (1.0 - e1) / c;

    // Joint second moments of (I_w, J, zeta) over one step, where I_w is the
    // white-noise integral, J the zero-state response of int z dt and zeta the
    // zero-state response of z itself.
    Eigen::Matrix3d m;
    m(0, 0) = dt;
    m(1, 1) = (dt - 2.0 * ramp + (1.0 - e2) / (2.0 * c)) / (c * c);
    m(2, 2) = (1.0 - e2) / (2.0 * c);
    m(0, 1) = m(1, 0) = (dt - ramp) / c;
    m(0, 2) = m(2, 0) = ramp;
    m(1, 2) = m(2, 1) = (ramp - (1.0 - e2) / (2.0 * c)) / c;

    // The three variances differ by up to eighteen orders of magnitude, so
    // take the matrix square root in correlation units; a direct
    // eigendecomposition of m would drown the smallest component in the
    // rounding noise of the largest.
    const Eigen::Vector3d scale = m.diagonal().cwiseSqrt();
    const Eigen::Matrix3d corr =
        scale.cwiseInverse().asDiagonal() * m * scale.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(corr);
    const Eigen::Matrix3d sqrt_m =
        scale.asDiagonal() *
        (es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose());

    GaussianRng rng(seed);
    double z = rng.normal(0.0, std::sqrt(1.0 / (2.0 * c)));
    std::vector<double> trace;
    trace.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d xi(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d step = sqrt_m * xi;
        const double i_w = step(0);
        const double i_z = z * ramp + step(1);
        trace.push_back((i_w + kappa * i_z) / (2.0 * dt));
        z = z * e1 + step(2);
    }
    return trace;
}

}  // namespace xepr

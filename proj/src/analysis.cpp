#include "xepr/analysis.hpp"

#include "xepr/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace xepr {

double VarianceEstimate::db() const { return db_from_ratio(variance); }
double VarianceEstimate::ci_lo_db() const { return db_from_ratio(ci_lo); }
double VarianceEstimate::ci_hi_db() const { return db_from_ratio(ci_hi); }

const KStats* NullifierReport::find(int k) const {
    if (k < 1 || k > static_cast<int>(per_k.size())) return nullptr;
    return &per_k[static_cast<std::size_t>(k - 1)];
}

namespace {

// Acklam's rational approximation of the standard normal quantile.
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p outside (0, 1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

VarianceEstimate estimate(std::int64_t n, double sum, double sumsq, MeanMode mode) {
    VarianceEstimate est;
    est.count = n;
    if (n < 2) return est;
    double ss = 0.0;
    double df = 0.0;
    if (mode == MeanMode::AssumeZero) {
        ss = sumsq;
        df = static_cast<double>(n);
        est.variance = ss / df;
    } else {
        ss = sumsq - sum * sum / static_cast<double>(n);
        df = static_cast<double>(n - 1);
        est.variance = ss / df;
    }
    est.ci_lo = ss / chi2_quantile(0.975, df);
    est.ci_hi = ss / chi2_quantile(0.025, df);
    return est;
}

}  // namespace

double chi2_quantile(double p, double df) {
    if (!(df > 0.0)) throw std::domain_error("chi2_quantile: df must be positive");
    // Wilson-Hilferty cube approximation.
    const double z = normal_quantile(p);
    const double t = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
    return df * t * t * t;
}

void NullifierAccumulator::add(const BinSample& sample) {
    if (!std::isfinite(sample.value_a) || !std::isfinite(sample.value_b))
        throw std::invalid_argument("NullifierAccumulator: non-finite sample value");
    if (sample.k < 1) throw std::invalid_argument("NullifierAccumulator: k must be >= 1");

    if (sample.frame != last_frame_) {
        ++frames_seen_;
        have_last_ = false;
        last_frame_ = sample.frame;
    }

    if (have_last_ && sample.k == last_k_ + 1) {
        const int idx = last_k_ - 1;
        if (idx >= static_cast<int>(cells_.size())) cells_.resize(static_cast<std::size_t>(idx) + 1);
        Cell& cell = cells_[static_cast<std::size_t>(idx)];
        const bool all_x = last_basis_a_ == Basis::X && last_basis_b_ == Basis::X &&
                           sample.basis_a == Basis::X && sample.basis_b == Basis::X;
        const bool all_p = last_basis_a_ == Basis::P && last_basis_b_ == Basis::P &&
                           sample.basis_a == Basis::P && sample.basis_b == Basis::P;
        if (all_x) {
            const double v = last_value_a_ + last_value_b_ + sample.value_a - sample.value_b;
            ++cell.x.n;
            cell.x.sum += v;
            cell.x.sumsq += v * v;
        } else if (all_p) {
            const double v = last_value_a_ + last_value_b_ - sample.value_a + sample.value_b;
            ++cell.p.n;
            cell.p.sum += v;
            cell.p.sumsq += v * v;
        }
    }

    last_k_ = sample.k;
    last_basis_a_ = sample.basis_a;
    last_basis_b_ = sample.basis_b;
    last_value_a_ = sample.value_a;
    last_value_b_ = sample.value_b;
    have_last_ = true;
}

void NullifierAccumulator::merge(const NullifierAccumulator& other) {
    if (other.cells_.size() > cells_.size()) cells_.resize(other.cells_.size());
    for (std::size_t i = 0; i < other.cells_.size(); ++i) {
        cells_[i].x.n += other.cells_[i].x.n;
        cells_[i].x.sum += other.cells_[i].x.sum;
        cells_[i].x.sumsq += other.cells_[i].x.sumsq;
        cells_[i].p.n += other.cells_[i].p.n;
        cells_[i].p.sum += other.cells_[i].p.sum;
        cells_[i].p.sumsq += other.cells_[i].p.sumsq;
    }
    frames_seen_ += other.frames_seen_;
}

NullifierReport NullifierAccumulator::report(MeanMode mode) const {
    NullifierReport rep;
    rep.mode = mode;
    rep.frames_seen = frames_seen_;
    rep.per_k.reserve(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        KStats ks;
        ks.k = static_cast<int>(i) + 1;
        ks.x = estimate(cells_[i].x.n, cells_[i].x.sum, cells_[i].x.sumsq, mode);
        ks.p = estimate(cells_[i].p.n, cells_[i].p.sum, cells_[i].p.sumsq, mode);
        rep.per_k.push_back(ks);
    }
    return rep;
}

NullifierReport nullifier_variances(const std::vector<BinSample>& samples, MeanMode mode) {
    NullifierAccumulator acc;
    for (const BinSample& s : samples) acc.add(s);
    return acc.report(mode);
}

VlfCertificate vlf_certificate(const std::vector<double>& var_x,
                               const std::vector<double>& var_p) {
    if (var_x.size() != var_p.size())
        throw std::invalid_argument("vlf_certificate: variance lists differ in length");
    const int n = static_cast<int>(var_x.size());
    VlfCertificate cert;
    cert.rows.reserve(static_cast<std::size_t>(n));

    bool chain_intact = true;
    bool strict_intact = true;
    for (int k = 1; k <= n; ++k) {
        const double vx = var_x[static_cast<std::size_t>(k - 1)];
        const double vp = var_p[static_cast<std::size_t>(k - 1)];
        if (!std::isfinite(vx) || !std::isfinite(vp))
            throw std::invalid_argument("vlf_certificate: variance gap at k=" + std::to_string(k));
        VlfRow row;
        row.k = k;
        const double same_k = vx + vp;
        const std::string kk = std::to_string(k);
        const std::string k1 = std::to_string(k + 1);
        row.cases[0] = {"{A_" + kk + "} | rest", same_k, 1.0, same_k < 1.0};
        row.cases[1] = {"{B_" + kk + "} | rest", same_k, 1.0, same_k < 1.0};
        row.cases[2] = {"{A_" + k1 + "} | rest", same_k, 1.0, same_k < 1.0};
        row.cases[3] = {"{B_" + k1 + "} | rest", same_k, 1.0, same_k < 1.0};
        row.cases[4] = {"{A_" + kk + ",B_" + kk + "} | {A_" + k1 + ",B_" + k1 + "}", same_k, 2.0,
                        same_k < 2.0};
        row.evaluated = 5;
        if (k < n) {
            const double cross_k = vx + var_p[static_cast<std::size_t>(k)];
            row.cases[5] = {"{A_" + kk + ",A_" + k1 + "} | {B_" + kk + ",B_" + k1 + "}", cross_k,
                            1.0, cross_k < 1.0};
            row.cases[6] = {"{A_" + kk + ",B_" + k1 + "} | {B_" + kk + ",A_" + k1 + "}", cross_k,
                            1.0, cross_k < 1.0};
            row.evaluated = 7;
        }
        row.all_hold = true;
        for (int c = 0; c < row.evaluated; ++c) row.all_hold = row.all_hold && row.cases[c].holds;
        row.strict_x = vx < 0.5;
        row.strict_p = vp < 0.5;

        if (chain_intact && row.all_hold) {
            cert.certified_k = k;
        } else if (chain_intact && !row.all_hold) {
            chain_intact = false;
            for (int c = 0; c < row.evaluated; ++c) {
                if (!row.cases[c].holds) {
                    std::ostringstream msg;
                    msg << "k=" << k << ": " << row.cases[c].partition << " (" << row.cases[c].value
                        << " >= " << row.cases[c].bound << ")";
                    cert.first_failure = msg.str();
                    break;
                }
            }
        }
        if (strict_intact && row.strict_x && row.strict_p) {
            cert.strict_certified_k = k;
        } else {
            strict_intact = false;
        }
        cert.rows.push_back(std::move(row));
    }
    return cert;
}

VlfCertificate vlf_certificate(const NullifierReport& report) {
    std::vector<double> vx;
    std::vector<double> vp;
    for (const KStats& ks : report.per_k) {
        if (!ks.x.valid() || !ks.p.valid()) break;
        vx.push_back(ks.x.variance);
        vp.push_back(ks.p.variance);
    }
    if (vx.empty()) throw std::invalid_argument("vlf_certificate: no complete nullifier index");
    return vlf_certificate(vx, vp);
}

WindowSummary window_summary(const NullifierReport& report, int k_lo, int k_hi) {
    if (k_lo < 1 || k_hi < k_lo || k_hi > static_cast<int>(report.per_k.size()))
        throw std::out_of_range("window_summary: window outside data");
    WindowSummary ws;
    ws.k_lo = k_lo;
    ws.k_hi = k_hi;
    double sx = 0.0, sxx = 0.0, sp = 0.0, spp = 0.0;
    for (int k = k_lo; k <= k_hi; ++k) {
        const KStats& ks = report.per_k[static_cast<std::size_t>(k - 1)];
        if (!ks.x.valid() || !ks.p.valid())
            throw std::invalid_argument("window_summary: missing data at k=" + std::to_string(k));
        const double dx = ks.x.db();
        const double dp = ks.p.db();
        sx += dx;
        sxx += dx * dx;
        sp += dp;
        spp += dp * dp;
        ++ws.count;
    }
    const double n = ws.count;
    ws.mean_db_x = sx / n;
    ws.mean_db_p = sp / n;
    if (ws.count >= 2) {
        ws.stderr_db_x = std::sqrt(std::max(0.0, (sxx - sx * sx / n) / (n - 1.0)) / n);
        ws.stderr_db_p = std::sqrt(std::max(0.0, (spp - sp * sp / n) / (n - 1.0)) / n);
    }
    return ws;
}

std::vector<double> extract_quadratures(const std::vector<double>& trace,
                                        const ModeFunction& mf, double sample_rate) {
    if (!(sample_rate > 0.0))
        throw std::invalid_argument("extract_quadratures: sample_rate must be positive");
    const auto spb = static_cast<std::size_t>(std::llround(mf.duration * sample_rate));
    if (spb < 20)
        throw std::invalid_argument("extract_quadratures: need >= 20 samples per bin");
    if (trace.size() < spb) throw std::invalid_argument("extract_quadratures: trace shorter than one bin");
    const double dt = 1.0 / sample_rate;
    std::vector<double> weights(spb);
    for (std::size_t i = 0; i < spb; ++i) {
        const double t = (static_cast<double>(i) + 0.5) * dt - 0.5 * mf.duration;
        weights[i] = mf.value(t) * dt;
    }
    const std::size_t nbins = trace.size() / spb;
    std::vector<double> out(nbins, 0.0);
    for (std::size_t b = 0; b < nbins; ++b) {
        double acc = 0.0;
        const double* seg = trace.data() + b * spb;
        for (std::size_t i = 0; i < spb; ++i) acc += weights[i] * seg[i];
        out[b] = acc;
    }
    return out;
}

std::vector<BinSample> read_samples_csv(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    const auto fail = [&](const std::string& what) {
        throw std::runtime_error("csv line " + std::to_string(lineno) + ": " + what);
    };
    if (!std::getline(is, line)) throw std::runtime_error("csv: empty input");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "frame,k,basis_A,value_A,basis_B,value_B") fail("unexpected header '" + line + "'");

    std::vector<BinSample> out;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string, 6> field;
        std::size_t start = 0;
        for (int f = 0; f < 6; ++f) {
            const std::size_t comma = line.find(',', start);
            if (f < 5 && comma == std::string::npos) fail("expected 6 comma-separated fields");
            if (f == 5 && comma != std::string::npos) fail("expected 6 comma-separated fields");
            field[static_cast<std::size_t>(f)] =
                line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            start = comma + 1;
        }
        BinSample s;
        try {
            std::size_t used = 0;
            s.frame = std::stoi(field[0], &used);
            if (used != field[0].size()) fail("bad frame '" + field[0] + "'");
            s.k = std::stoi(field[1], &used);
            if (used != field[1].size()) fail("bad k '" + field[1] + "'");
            if (field[2].size() != 1) fail("bad basis '" + field[2] + "'");
            s.basis_a = basis_from_char(field[2][0]);
            s.value_a = std::stod(field[3], &used);
            if (used != field[3].size()) fail("bad value '" + field[3] + "'");
            if (field[4].size() != 1) fail("bad basis '" + field[4] + "'");
            s.basis_b = basis_from_char(field[4][0]);
            s.value_b = std::stod(field[5], &used);
            if (used != field[5].size()) fail("bad value '" + field[5] + "'");
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception& e) {
            fail(e.what());
        }
        out.push_back(s);
    }
    return out;
}

void write_plot_csv(std::ostream& os, const NullifierReport& report) {
    os << "k,varX_db,varP_db,ciX,ciP\n";
    char buf[160];
    for (const KStats& ks : report.per_k) {
        if (!ks.x.valid() || !ks.p.valid()) continue;
        const double ci_x = 0.5 * (ks.x.ci_hi_db() - ks.x.ci_lo_db());
        const double ci_p = 0.5 * (ks.p.ci_hi_db() - ks.p.ci_lo_db());
        const int len = std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f\n", ks.k,
                                      ks.x.db(), ks.p.db(), ci_x, ci_p);
        os.write(buf, len);
    }
}

namespace {

nlohmann::json estimate_to_json(const VarianceEstimate& est) {
    nlohmann::json j{{"count", est.count}};
    if (est.valid()) {
        j["variance"] = est.variance;
        j["db"] = est.db();
        j["ci"] = {est.ci_lo, est.ci_hi};
        j["ci_db"] = {est.ci_lo_db(), est.ci_hi_db()};
    }
    return j;
}

}  // namespace

nlohmann::json report_to_json(const NullifierReport& report) {
    nlohmann::json per_k = nlohmann::json::array();
    for (const KStats& ks : report.per_k) {
        per_k.push_back(nlohmann::json{
            {"k", ks.k}, {"x", estimate_to_json(ks.x)}, {"p", estimate_to_json(ks.p)}});
    }
    return nlohmann::json{
        {"mode", report.mode == MeanMode::AssumeZero ? "assume_zero" : "subtract"},
        {"frames", report.frames_seen},
        {"vacuum_reference", 1.0},
        {"bound_db", kInseparabilityBoundDb},
        {"per_k", std::move(per_k)}};
}

nlohmann::json certificate_to_json(const VlfCertificate& cert) {
    nlohmann::json rows = nlohmann::json::array();
    for (const VlfRow& row : cert.rows) {
        nlohmann::json cases = nlohmann::json::array();
        for (int c = 0; c < row.evaluated; ++c) {
            const VlfCase& cs = row.cases[static_cast<std::size_t>(c)];
            cases.push_back(nlohmann::json{{"partition", cs.partition},
                                           {"value", cs.value},
                                           {"bound", cs.bound},
                                           {"holds", cs.holds}});
        }
        rows.push_back(nlohmann::json{{"k", row.k},
                                      {"all_hold", row.all_hold},
                                      {"strict_x", row.strict_x},
                                      {"strict_p", row.strict_p},
                                      {"cases", std::move(cases)}});
    }
    nlohmann::json j{{"certified_k", cert.certified_k},
                     {"strict_certified_k", cert.strict_certified_k},
                     {"rows", std::move(rows)}};
    if (cert.first_failure) j["first_failure"] = *cert.first_failure;
    return j;
}

std::optional<int> find_crossing_k(const NullifierReport& report, double threshold_db,
                                   int smooth_window) {
    if (smooth_window < 1) throw std::invalid_argument("find_crossing_k: bad window");
    std::vector<double> db;
    for (const KStats& ks : report.per_k) {
        if (!ks.x.valid() || !ks.p.valid()) break;
        db.push_back(0.5 * (ks.x.db() + ks.p.db()));
    }
    const int n = static_cast<int>(db.size());
    if (n == 0) return std::nullopt;
    const int half = smooth_window / 2;
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n - 1, i + half);
        double acc = 0.0;
        for (int j = lo; j <= hi; ++j) acc += db[static_cast<std::size_t>(j)];
        if (acc / (hi - lo + 1) >= threshold_db) return i + 1;
    }
    return std::nullopt;
}

namespace {

NullifierReport run_report(const ExperimentConfig& cfg, int threads) {
    NullifierAccumulator acc;
    run_experiment(cfg, [&acc](const BinSample& s) { acc.add(s); }, threads);
    return acc.report(MeanMode::AssumeZero);
}

}  // namespace

DriftCalibration calibrate_drift_rate(ExperimentConfig base, int target_k, int probe_frames,
                                      int threads) {
    if (target_k < 10) throw std::invalid_argument("calibrate_drift_rate: target_k too small");
    base.frames = probe_frames;
    base.bins_per_frame = std::max(target_k * 5 / 2, 500);
    base.basis_schedule = BasisSchedule::AlternateByFrameParity;

    double rate = std::sqrt(1.0 / static_cast<double>(target_k));
    std::optional<int> crossing;
    for (int attempt = 0; attempt < 8; ++attempt) {
        base.phase_drift_rate = rate;
        base.seed = splitmix64(base.seed + 0x9e3779b97f4a7c15ULL);
        crossing = find_crossing_k(run_report(base, threads));
        if (!crossing) {
            rate *= 2.0;  // too slow, never crosses in range
            continue;
        }
        if (*crossing < 150) {
            rate *= 0.5;  // too fast, crossing buried in the smoothing window
            continue;
        }
        break;
    }
    if (!crossing || *crossing < 2)
        throw std::runtime_error("calibrate_drift_rate: probe sweep found no usable crossing");

    DriftCalibration cal;
    cal.probe_rate = rate;
    cal.probe_crossing_k = *crossing;

    // Wiener scaling: crossing index ~ 1/rate^2.
    for (int iter = 0; iter < 3; ++iter) {
        rate = rate * std::sqrt(static_cast<double>(*crossing) / static_cast<double>(target_k));
        base.phase_drift_rate = rate;
        base.seed = splitmix64(base.seed + 1);
        crossing = find_crossing_k(run_report(base, threads));
        if (!crossing)
            throw std::runtime_error("calibrate_drift_rate: rescaled run lost the crossing");
        if (std::abs(*crossing - target_k) <= target_k / 10) break;
    }
    cal.rate = rate;
    cal.crossing_k = *crossing;
    return cal;
}

}  // namespace xepr

// Command-line front end: simulation runs, sample analysis, analytic
// predictions, graph reports, gate programs, and canned reproduction
// pipelines. Every command that writes files also writes a manifest with
// content hashes so outputs are regenerable bit-for-bit.

#include "xepr/analysis.hpp"
#include "xepr/experiment.hpp"
#include "xepr/graph_calculus.hpp"
#include "xepr/mbqc.hpp"
#include "xepr/sha256.hpp"
#include "xepr/spectral.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace xepr;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitIo = 3;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string now_utc() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json load_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    return json::parse(is);  // json::parse_error maps to the input exit code
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << content;
    if (!os) throw IoError("write to '" + path + "' failed");
}

std::string sha256_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for hashing");
    Sha256 hasher;
    char buf[1 << 16];
    while (is.read(buf, sizeof buf) || is.gcount() > 0)
        hasher.update(buf, static_cast<std::size_t>(is.gcount()));
    return hasher.hex_digest();
}

class Manifest {
  public:
    Manifest(std::string command, std::uint64_t seed, json config)
        : command_(std::move(command)), seed_(seed), config_(std::move(config)) {}

    void add_output(const std::string& path) { outputs_.push_back(path); }

    void write(const std::string& path) const {
        json outs = json::array();
        for (const std::string& p : outputs_)
            outs.push_back(json{{"path", p}, {"sha256", sha256_file(p)}});
        const json j{{"tool_version", kToolVersion},
                     {"command", command_},
                     {"created_utc", now_utc()},
                     {"seed", seed_},
                     {"config", config_},
                     {"config_hash", Sha256::hash_hex(config_.dump())},
                     {"outputs", std::move(outs)}};
        write_text_file(path, j.dump(2) + "\n");
    }

  private:
    std::string command_;
    std::uint64_t seed_ = 0;
    json config_;
    std::vector<std::string> outputs_;
};

// Physics parameters for the analytic model (predict / reproduce).
struct PhysicsParams {
    double opo_hwhm_hz = 17.0e6;
    double mode_bandwidth_hz = 2.5e6;
    double bin_seconds = 157.5e-9;
    double electronic_noise_ratio = 0.0;
    double eta2_A = 0.882;
    double eta2_B = 0.899;
    double eta2_AF = 0.737;
    double eta2_BF = 0.753;
    std::optional<double> pump_x;
    double dc_squeezing_db = 6.0;
    std::vector<double> mode_bandwidth_sweep_hz;

    static PhysicsParams from_json(const json& j) {
        if (!j.is_object()) throw std::invalid_argument("physics config: expected a JSON object");
        static const char* known[] = {"opo_hwhm_hz",   "mode_bandwidth_hz",
                                      "bin_seconds",   "electronic_noise_ratio",
                                      "eta2_A",        "eta2_B",
                                      "eta2_AF",       "eta2_BF",
                                      "pump_x",        "dc_squeezing_db",
                                      "mode_bandwidth_sweep_hz"};
        for (const auto& [key, value] : j.items()) {
            (void)value;
            bool ok = false;
            for (const char* k : known) ok = ok || key == k;
            if (!ok) throw std::invalid_argument("physics config: unknown key '" + key + "'");
        }
        PhysicsParams p;
        const auto num = [&](const char* key, double fallback) {
            if (!j.contains(key)) return fallback;
            if (!j.at(key).is_number())
                throw std::invalid_argument(std::string("physics config: '") + key +
                                            "' must be a number");
            return j.at(key).get<double>();
        };
        p.opo_hwhm_hz = num("opo_hwhm_hz", p.opo_hwhm_hz);
        p.mode_bandwidth_hz = num("mode_bandwidth_hz", p.mode_bandwidth_hz);
        p.bin_seconds = num("bin_seconds", p.bin_seconds);
        p.electronic_noise_ratio = num("electronic_noise_ratio", p.electronic_noise_ratio);
        p.eta2_A = num("eta2_A", p.eta2_A);
        p.eta2_B = num("eta2_B", p.eta2_B);
        p.eta2_AF = num("eta2_AF", p.eta2_AF);
        p.eta2_BF = num("eta2_BF", p.eta2_BF);
        if (j.contains("pump_x")) {
            if (j.contains("dc_squeezing_db"))
                throw std::invalid_argument(
                    "physics config: give either 'pump_x' or 'dc_squeezing_db', not both");
            p.pump_x = num("pump_x", 0.0);
        }
        p.dc_squeezing_db = num("dc_squeezing_db", p.dc_squeezing_db);
        if (j.contains("mode_bandwidth_sweep_hz")) {
            if (!j.at("mode_bandwidth_sweep_hz").is_array())
                throw std::invalid_argument(
                    "physics config: 'mode_bandwidth_sweep_hz' must be an array");
            for (const auto& v : j.at("mode_bandwidth_sweep_hz")) {
                if (!v.is_number())
                    throw std::invalid_argument(
                        "physics config: 'mode_bandwidth_sweep_hz' entries must be numbers");
                p.mode_bandwidth_sweep_hz.push_back(v.get<double>());
            }
        }
        return p;
    }

    json to_json() const {
        json j{{"opo_hwhm_hz", opo_hwhm_hz},
               {"mode_bandwidth_hz", mode_bandwidth_hz},
               {"bin_seconds", bin_seconds},
               {"electronic_noise_ratio", electronic_noise_ratio},
               {"eta2_A", eta2_A},
               {"eta2_B", eta2_B},
               {"eta2_AF", eta2_AF},
               {"eta2_BF", eta2_BF}};
        if (pump_x)
            j["pump_x"] = *pump_x;
        else
            j["dc_squeezing_db"] = dc_squeezing_db;
        if (!mode_bandwidth_sweep_hz.empty()) j["mode_bandwidth_sweep_hz"] = mode_bandwidth_sweep_hz;
        return j;
    }

    OPOSpec opo() const {
        OPOSpec spec;
        spec.gamma = 2.0 * std::numbers::pi * opo_hwhm_hz;
        spec.pump_x = pump_x ? *pump_x : pump_from_dc_squeezing_db(dc_squeezing_db);
        spec.eta_constant = electronic_noise_ratio;
        return spec;
    }

    ModeFunction mode_function() const { return mode_function_at(mode_bandwidth_hz); }
    ModeFunction mode_function_at(double bandwidth_hz) const {
        return ModeFunction::make(2.0 * std::numbers::pi * bandwidth_hz, bin_seconds);
    }

    LossSpec losses() const { return {eta2_A, eta2_B, eta2_AF, eta2_BF}; }
};

struct PredictionBundle {
    double pump_x = 0.0;
    double sq = 1.0;
    double asq = 1.0;
    NullifierPrediction pred;
};

PredictionBundle compute_predictions(const PhysicsParams& params) {
    PredictionBundle b;
    const OPOSpec opo = params.opo();
    b.pump_x = opo.pump_x;
    std::tie(b.sq, b.asq) = filtered_squeezing(opo, params.mode_function());
    b.pred = predicted_nullifier_variances(b.sq, b.asq, b.sq, b.asq, params.losses());
    return b;
}

// Streaming-simulator configuration equivalent to the analytic model: both
// rails carry the filtered squeezing/antisqueezing of the same OPO.
ExperimentConfig experiment_from_physics(const PhysicsParams& params, int frames, int bins,
                                         std::uint64_t seed) {
    const PredictionBundle b = compute_predictions(params);
    ExperimentConfig cfg;
    cfg.squeezing_db_A = cfg.squeezing_db_B = -db_from_ratio(b.sq);
    cfg.antisqueezing_db_A = cfg.antisqueezing_db_B = db_from_ratio(b.asq);
    cfg.eta2_A = params.eta2_A;
    cfg.eta2_B = params.eta2_B;
    cfg.eta2_AF = params.eta2_AF;
    cfg.eta2_BF = params.eta2_BF;
    cfg.frames = frames;
    cfg.bins_per_frame = bins;
    cfg.seed = seed;
    return cfg;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 std::optional<int> frames, std::optional<int> bins, const std::string& out,
                 int threads) {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ExperimentConfig::from_json(load_json_file(config_path));
    if (seed) cfg.seed = *seed;
    if (frames) cfg.frames = *frames;
    if (bins) cfg.bins_per_frame = *bins;
    cfg.validate();

    std::ofstream os(out, std::ios::binary);
    if (!os) throw IoError("cannot open '" + out + "' for writing");
    const auto t0 = std::chrono::steady_clock::now();
    const RunMetadata meta = run_experiment_to_csv(cfg, os, threads);
    os.flush();
    if (!os) throw IoError("write to '" + out + "' failed");
    os.close();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double total_bins = static_cast<double>(cfg.frames) * cfg.bins_per_frame;

    Manifest manifest("simulate", cfg.seed, cfg.to_json());
    manifest.add_output(out);
    manifest.write(out + ".manifest.json");

    std::printf("wrote %s (%.0f samples, %.2f s, %.3g bins/s)\n", out.c_str(), total_bins, secs,
                total_bins / std::max(secs, 1e-9));
    std::printf("provenance: %s\n", meta.provenance.c_str());
    return kExitOk;
}

int cmd_analyze(const std::string& input, const std::string& out_prefix,
                const std::string& mode_name) {
    MeanMode mode;
    if (mode_name == "assume_zero")
        mode = MeanMode::AssumeZero;
    else if (mode_name == "subtract")
        mode = MeanMode::Subtract;
    else
        throw std::invalid_argument("mean mode must be 'assume_zero' or 'subtract'");

    std::ifstream is(input, std::ios::binary);
    if (!is) throw IoError("cannot open '" + input + "' for reading");
    NullifierAccumulator acc;
    {
        // Stream the file through the CSV reader in one pass.
        const std::vector<BinSample> samples = read_samples_csv(is);
        for (const BinSample& s : samples) acc.add(s);
    }
    const NullifierReport report = acc.report(mode);

    json report_json = report_to_json(report);
    std::optional<VlfCertificate> cert;
    try {
        cert = vlf_certificate(report);
        report_json["certificate"] = certificate_to_json(*cert);
    } catch (const std::invalid_argument& e) {
        report_json["certificate"] = nullptr;
        report_json["certificate_note"] = e.what();
    }

    const std::string report_path = out_prefix + "_report.json";
    const std::string plot_path = out_prefix + "_plot.csv";
    write_text_file(report_path, report_json.dump(2) + "\n");
    {
        std::ofstream os(plot_path, std::ios::binary);
        if (!os) throw IoError("cannot open '" + plot_path + "' for writing");
        write_plot_csv(os, report);
        if (!os) throw IoError("write to '" + plot_path + "' failed");
    }

    Manifest manifest("analyze", 0, json{{"input", input}, {"mean_mode", mode_name}});
    manifest.add_output(report_path);
    manifest.add_output(plot_path);
    manifest.write(out_prefix + "_manifest.json");

    std::printf("frames: %lld, nullifier indices: %zu\n",
                static_cast<long long>(report.frames_seen), report.per_k.size());
    if (cert) {
        std::printf("certified inseparable through k = %d (strict var<1/2 bound: k = %d)\n",
                    cert->certified_k, cert->strict_certified_k);
        if (cert->first_failure) std::printf("first failure: %s\n", cert->first_failure->c_str());
    } else {
        std::printf("certificate: not evaluable (incomplete X/P coverage)\n");
    }
    int k_hi = 0;
    for (const KStats& ks : report.per_k) {
        if (!ks.x.valid() || !ks.p.valid()) break;
        k_hi = ks.k;
    }
    if (k_hi >= 1) {
        const WindowSummary ws = window_summary(report, 1, k_hi);
        std::printf("window k=[1,%d]: varX %.3f dB +- %.3f, varP %.3f dB +- %.3f\n", k_hi,
                    ws.mean_db_x, ws.stderr_db_x, ws.mean_db_p, ws.stderr_db_p);
    }
    return kExitOk;
}

int cmd_predict(const std::string& config_path, const std::string& out) {
    PhysicsParams params;
    if (!config_path.empty()) params = PhysicsParams::from_json(load_json_file(config_path));

    const PredictionBundle b = compute_predictions(params);
    const NullifierPrediction lossless =
        predicted_nullifier_variances(b.sq, b.asq, b.sq, b.asq, LossSpec{});

    json j{{"parameters", params.to_json()},
           {"pump_x", b.pump_x},
           {"filtered", json{{"sq", b.sq},
                             {"sq_db", db_from_ratio(b.sq)},
                             {"asq", b.asq},
                             {"asq_db", db_from_ratio(b.asq)}}},
           {"nullifier_prediction", json{{"var_x", b.pred.var_x},
                                         {"var_p", b.pred.var_p},
                                         {"db_x", b.pred.db_x},
                                         {"db_p", b.pred.db_p}}},
           {"lossless_reference_db", lossless.db_x}};

    std::printf("pump x                  %.8f\n", b.pump_x);
    std::printf("filtered Sq             %.8f  (%+.4f dB)\n", b.sq, db_from_ratio(b.sq));
    std::printf("filtered ASq            %.8f  (%+.4f dB)\n", b.asq, db_from_ratio(b.asq));
    std::printf("predicted <X^2>         %.8f  (%+.4f dB)\n", b.pred.var_x, b.pred.db_x);
    std::printf("predicted <P^2>         %.8f  (%+.4f dB)\n", b.pred.var_p, b.pred.db_p);
    std::printf("lossless reference      %+.4f dB\n", lossless.db_x);

    if (!params.mode_bandwidth_sweep_hz.empty()) {
        json sweep = json::array();
        std::printf("%14s %12s %12s %12s %12s\n", "Gamma/2pi [Hz]", "Sq", "ASq", "X [dB]",
                    "P [dB]");
        for (double bw : params.mode_bandwidth_sweep_hz) {
            const auto [sq, asq] = filtered_squeezing(params.opo(), params.mode_function_at(bw));
            const NullifierPrediction pred =
                predicted_nullifier_variances(sq, asq, sq, asq, params.losses());
            sweep.push_back(json{{"mode_bandwidth_hz", bw},
                                 {"sq", sq},
                                 {"asq", asq},
                                 {"db_x", pred.db_x},
                                 {"db_p", pred.db_p}});
            std::printf("%14.4g %12.8f %12.6f %12.4f %12.4f\n", bw, sq, asq, pred.db_x,
                        pred.db_p);
        }
        j["sweep"] = std::move(sweep);
    }

    write_text_file(out, j.dump(2) + "\n");
    Manifest manifest("predict", 0, params.to_json());
    manifest.add_output(out);
    manifest.write(out + ".manifest.json");
    return kExitOk;
}

int cmd_graph(int nbins, double r, const std::string& out) {
    if (nbins < 3) throw std::invalid_argument("graph: need nbins >= 3");
    const ComplexGraph ze = build_ZE(nbins, r);
    const ComplexGraph zc = build_ZC(nbins, r);
    const IdealGraph g = build_G(nbins);

    const CovarianceState pure = dense_circuit_pure(nbins, r, r);
    const ComplexGraph extracted = z_from_covariance(pure);

    const std::vector<int> interior = interior_slots(nbins);
    double extract_err = 0.0;
    for (int i : interior)
        for (int j : interior)
            extract_err = std::max(extract_err, std::abs(extracted.Z(i, j) - ze.Z(i, j)));

    const ComplexGraph rotated =
        phase_shift_transform(ze, odd_time_slots(nbins), -0.5 * std::numbers::pi);
    double rotation_err = 0.0;
    for (int i : interior)
        for (int j : interior)
            rotation_err = std::max(rotation_err, std::abs(rotated.Z(i, j) - zc.Z(i, j)));

    const json checks{{"interior_extraction_residual", extract_err},
                      {"interior_rotation_residual", rotation_err},
                      {"interior_self_inverse_defect", interior_self_inverse_defect(g)},
                      {"bipartite", is_bipartite_even_odd(g)},
                      {"nullifier_residual", check_nullifiers(extracted, pure)},
                      {"symmetry_defect", extracted.symmetry_defect()},
                      {"im_z_min_eigenvalue", extracted.im_min_eigenvalue()}};

    const json j{{"nbins", nbins},
                 {"r", r},
                 {"edges", graph_edges_json(ze)},
                 {"ideal_edges", graph_edges_json(g)},
                 {"checks", checks}};
    write_text_file(out, j.dump(2) + "\n");

    Manifest manifest("graph", 0, json{{"nbins", nbins}, {"r", r}});
    manifest.add_output(out);
    manifest.write(out + ".manifest.json");

    std::printf("interior extraction residual   %.3e\n", extract_err);
    std::printf("interior rotation residual     %.3e\n", rotation_err);
    std::printf("interior self-inverse defect   %.3e\n",
                interior_self_inverse_defect(g));
    std::printf("bipartite (even/odd bins)      %s\n", is_bipartite_even_odd(g) ? "yes" : "no");
    std::printf("nullifier residual             %.3e\n", check_nullifiers(extracted, pure));
    return kExitOk;
}

int cmd_mbqc(const std::string& config_path, const std::string& out) {
    const json j = load_json_file(config_path);
    if (!j.is_object()) throw std::invalid_argument("gate program: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "r" && key != "seed" && key != "steps" && key != "input")
            throw std::invalid_argument("gate program: unknown key '" + key + "'");
    }
    const double r = j.value("r", 10.0);
    const std::uint64_t seed = j.value("seed", std::uint64_t{1});
    if (!j.contains("steps") || !j.at("steps").is_array() || j.at("steps").empty())
        throw std::invalid_argument("gate program: 'steps' must be a non-empty array");
    std::vector<GateAngles> steps;
    for (const auto& s : j.at("steps")) {
        if (!s.is_object() || !s.contains("theta1") || !s.contains("theta2"))
            throw std::invalid_argument("gate program: each step needs 'theta1' and 'theta2'");
        GateAngles a{s.at("theta1").get<double>(), s.at("theta2").get<double>()};
        a.validate();
        steps.push_back(a);
    }

    CovarianceState input = CovarianceState::vacuum(1);
    if (j.contains("input")) {
        const auto& in = j.at("input");
        Eigen::Vector2d mean(in.at("mean").at(0).get<double>(), in.at("mean").at(1).get<double>());
        Eigen::Matrix2d cov;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) cov(a, b) = in.at("cov").at(a).at(b).get<double>();
        input = CovarianceState(mean, cov);
    }

    const GaussianGate gate = composite_gate(steps);
    const Eigen::Vector2d want_mean = gate.matrix * Eigen::Vector2d(input.mean);
    const Eigen::Matrix2d want_cov = gate.matrix * input.cov * gate.matrix.transpose();

    const CovarianceState cond = sequential_mbqc(input, r, steps, seed);

    CovarianceState uncond = input;
    for (const GateAngles& a : steps) {
        const UnconditionalTeleport step = teleport_output_moments(uncond, r, a);
        uncond = CovarianceState(step.mean, step.cov);
    }

    const double cond_dev = (Eigen::Matrix2d(cond.cov) - want_cov).cwiseAbs().maxCoeff();
    const double uncond_dev = (Eigen::Matrix2d(uncond.cov) - want_cov).cwiseAbs().maxCoeff();

    const json out_json{
        {"r", r},
        {"seed", seed},
        {"steps", static_cast<int>(steps.size())},
        {"input", json{{"mean", {input.mean(0), input.mean(1)}}, {"cov", matrix_json(input.cov)}}},
        {"composite_gate",
         json{{"matrix", matrix_json(gate.matrix)}, {"det", gate.matrix.determinant()}}},
        {"intended_output",
         json{{"mean", {want_mean(0), want_mean(1)}}, {"cov", matrix_json(want_cov)}}},
        {"conditional",
         json{{"mean", {cond.mean(0), cond.mean(1)}},
              {"cov", matrix_json(cond.cov)},
              {"max_cov_deviation", cond_dev}}},
        {"unconditional",
         json{{"mean", {uncond.mean(0), uncond.mean(1)}},
              {"cov", matrix_json(uncond.cov)},
              {"max_cov_deviation", uncond_dev}}}};
    write_text_file(out, out_json.dump(2) + "\n");

    Manifest manifest("mbqc", seed, j);
    manifest.add_output(out);
    manifest.write(out + ".manifest.json");

    std::printf("composite gate [[%.6f, %.6f], [%.6f, %.6f]], det %.9f\n", gate.matrix(0, 0),
                gate.matrix(0, 1), gate.matrix(1, 0), gate.matrix(1, 1),
                gate.matrix.determinant());
    std::printf("conditional max |cov - G cov G^T|   %.3e\n", cond_dev);
    std::printf("unconditional max |cov - G cov G^T| %.3e\n", uncond_dev);
    return kExitOk;
}

int reproduce_traces(const std::string& prefix, std::uint64_t seed) {
    const ExperimentConfig cfg = experiment_from_physics(PhysicsParams{}, 2, 51, seed);
    const std::vector<BinSample> samples = run_experiment(cfg);

    Manifest manifest("reproduce traces", seed, cfg.to_json());
    for (int frame = 0; frame < 2; ++frame) {
        const char basis = frame == 0 ? 'x' : 'p';
        const double flip = frame == 0 ? -1.0 : 1.0;  // nullifier sign on the k+1 B term
        std::ostringstream os;
        os << "k,value_A,value_B,nullifier\n";
        for (int k = 1; k <= 50; ++k) {
            const BinSample& s = samples[static_cast<std::size_t>(frame * 51 + k - 1)];
            const BinSample& next = samples[static_cast<std::size_t>(frame * 51 + k)];
            const double nullifier =
                s.value_a + s.value_b + (-flip) * next.value_a + flip * next.value_b;
            char buf[128];
            std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", k, s.value_a, s.value_b,
                          nullifier);
            os << buf;
        }
        const std::string path = prefix + "_" + basis + ".csv";
        write_text_file(path, os.str());
        manifest.add_output(path);
        std::printf("wrote %s (single %c-basis frame, 50 consecutive wave-packets)\n",
                    path.c_str(), basis);
    }
    manifest.write(prefix + "_manifest.json");
    return kExitOk;
}

int reproduce_certify(const std::string& prefix, std::uint64_t seed, int threads) {
    const ExperimentConfig cfg = experiment_from_physics(PhysicsParams{}, 3000, 10001, seed);
    NullifierAccumulator acc;
    run_experiment(cfg, [&acc](const BinSample& s) { acc.add(s); }, threads);
    const NullifierReport report = acc.report();
    const VlfCertificate cert = vlf_certificate(report);

    const std::string plot_path = prefix + "_plot.csv";
    {
        std::ofstream os(plot_path, std::ios::binary);
        if (!os) throw IoError("cannot open '" + plot_path + "' for writing");
        write_plot_csv(os, report);
    }
    const WindowSummary ws = window_summary(report, 1, 10000);
    json summary{{"window_db_x", ws.mean_db_x},
                 {"window_db_p", ws.mean_db_p},
                 {"certified_k", cert.certified_k},
                 {"strict_certified_k", cert.strict_certified_k},
                 {"inseparability_bound_db", kInseparabilityBoundDb}};
    const std::string report_path = prefix + "_summary.json";
    write_text_file(report_path, summary.dump(2) + "\n");

    Manifest manifest("reproduce certify", seed, cfg.to_json());
    manifest.add_output(plot_path);
    manifest.add_output(report_path);
    manifest.write(prefix + "_manifest.json");

    std::printf("first 10,000 wave-packets: varX %.3f dB, varP %.3f dB (bound %.3f dB)\n",
                ws.mean_db_x, ws.mean_db_p, kInseparabilityBoundDb);
    std::printf("certified inseparable through k = %d (strict: %d)\n", cert.certified_k,
                cert.strict_certified_k);
    return kExitOk;
}

int reproduce_dephasing(const std::string& prefix, std::uint64_t seed, int threads) {
    ExperimentConfig base = experiment_from_physics(PhysicsParams{}, 1200, 15001, seed);
    const DriftCalibration cal = calibrate_drift_rate(base, 8000, 400, threads);
    base.phase_drift_rate = cal.rate;
    base.seed = seed;

    NullifierAccumulator acc;
    run_experiment(base, [&acc](const BinSample& s) { acc.add(s); }, threads);
    const NullifierReport report = acc.report();
    const std::optional<int> crossing = find_crossing_k(report);

    const std::string plot_path = prefix + "_plot.csv";
    {
        std::ofstream os(plot_path, std::ios::binary);
        if (!os) throw IoError("cannot open '" + plot_path + "' for writing");
        write_plot_csv(os, report);
    }
    json summary{{"drift_rate", cal.rate},
                 {"calibration_crossing_k", cal.crossing_k},
                 {"crossing_k", crossing ? json(*crossing) : json(nullptr)},
                 {"inseparability_bound_db", kInseparabilityBoundDb}};
    const std::string report_path = prefix + "_summary.json";
    write_text_file(report_path, summary.dump(2) + "\n");

    Manifest manifest("reproduce dephasing", seed, base.to_json());
    manifest.add_output(plot_path);
    manifest.add_output(report_path);
    manifest.write(prefix + "_manifest.json");

    std::printf("drift rate %.6f rad/sqrt(bin); -3 dB crossing at k = %s of 15,000\n", cal.rate,
                crossing ? std::to_string(*crossing).c_str() : "none");
    return kExitOk;
}

int reproduce_predictions(const std::string& prefix) {
    const PhysicsParams params;
    const PredictionBundle b = compute_predictions(params);

    std::ostringstream csv;
    csv << "quantity,value\n";
    csv << "eta2_A," << params.eta2_A << "\n";
    csv << "eta2_B," << params.eta2_B << "\n";
    csv << "eta2_AF," << params.eta2_AF << "\n";
    csv << "eta2_BF," << params.eta2_BF << "\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "pump_x,%.8f\n", b.pump_x);
    csv << buf;
    std::snprintf(buf, sizeof buf, "filtered_sq_db,%.6f\n", db_from_ratio(b.sq));
    csv << buf;
    std::snprintf(buf, sizeof buf, "filtered_asq_db,%.6f\n", db_from_ratio(b.asq));
    csv << buf;
    std::snprintf(buf, sizeof buf, "predicted_x_db,%.6f\n", b.pred.db_x);
    csv << buf;
    std::snprintf(buf, sizeof buf, "predicted_p_db,%.6f\n", b.pred.db_p);
    csv << buf;

    const std::string csv_path = prefix + ".csv";
    write_text_file(csv_path, csv.str());

    Manifest manifest("reproduce predictions", 0, params.to_json());
    manifest.add_output(csv_path);
    manifest.write(prefix + "_manifest.json");

    std::printf("%s", csv.str().c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-multiplexed dual-rail entangled-state simulator and analysis toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    std::string config_path;
    std::string out;
    std::string input;
    std::string mode_name = "assume_zero";
    std::string pipeline;
    std::uint64_t seed_val = 0;
    bool seed_given = false;
    int frames_val = 0;
    int bins_val = 0;
    bool frames_given = false;
    bool bins_given = false;
    int threads = 1;
    int nbins = 8;
    double r_param = 1.0;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option_function<std::uint64_t>(
               "--seed",
               [&](const std::uint64_t& v) {
                   seed_val = v;
                   seed_given = true;
               },
               "Override the RNG seed")
            ->envname("XEPR_SEED");
    };
    auto add_threads = [&](CLI::App* cmd) {
        cmd->add_option("--threads", threads, "Worker threads for frame simulation")
            ->envname("XEPR_THREADS")
            ->check(CLI::Range(1, 256));
    };

    CLI::App* sim = app.add_subcommand("simulate", "Run the streaming simulator to a sample CSV");
    sim->add_option("--config", config_path, "Experiment config JSON")->envname("XEPR_CONFIG");
    add_seed(sim);
    sim->add_option_function<int>(
           "--frames", [&](const int& v) { frames_val = v; frames_given = true; },
           "Override frame count")
        ->envname("XEPR_FRAMES");
    sim->add_option_function<int>(
           "--bins", [&](const int& v) { bins_val = v; bins_given = true; },
           "Override bins per frame")
        ->envname("XEPR_BINS");
    sim->add_option("--out", out, "Output CSV path")->envname("XEPR_OUT");
    add_threads(sim);

    CLI::App* ana = app.add_subcommand("analyze", "Nullifier statistics from a sample CSV");
    ana->add_option("input", input, "Sample CSV file")->required();
    ana->add_option("--out", out, "Output prefix")->envname("XEPR_OUT");
    ana->add_option("--mean-mode", mode_name, "Variance estimator: assume_zero or subtract");

    CLI::App* pre = app.add_subcommand("predict", "Analytic squeezing and nullifier predictions");
    pre->add_option("--config", config_path, "Physics config JSON")->envname("XEPR_CONFIG");
    pre->add_option("--out", out, "Output JSON path")->envname("XEPR_OUT");

    CLI::App* gra = app.add_subcommand("graph", "Graph representation and identity checks");
    gra->add_option("--bins", nbins, "Number of time bins")->check(CLI::Range(3, 4096));
    gra->add_option("--r", r_param, "Squeezing parameter of both rails");
    gra->add_option("--out", out, "Output JSON path")->envname("XEPR_OUT");

    CLI::App* mbq = app.add_subcommand("mbqc", "Run a teleportation gate program");
    mbq->add_option("--config", config_path, "Gate program JSON")
        ->envname("XEPR_CONFIG")
        ->required();
    mbq->add_option("--out", out, "Output JSON path")->envname("XEPR_OUT");

    CLI::App* rep = app.add_subcommand("reproduce", "Canned desk-scale reproduction pipelines");
    rep->add_option("pipeline", pipeline, "One of: traces, certify, dephasing, predictions")
        ->required();
    rep->add_option("--out", out, "Output prefix")->envname("XEPR_OUT");
    add_seed(rep);
    add_threads(rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (sim->parsed()) {
            return cmd_simulate(config_path,
                                seed_given ? std::optional(seed_val) : std::nullopt,
                                frames_given ? std::optional(frames_val) : std::nullopt,
                                bins_given ? std::optional(bins_val) : std::nullopt,
                                out.empty() ? "samples.csv" : out, threads);
        }
        if (ana->parsed())
            return cmd_analyze(input, out.empty() ? "analysis" : out, mode_name);
        if (pre->parsed())
            return cmd_predict(config_path, out.empty() ? "predictions.json" : out);
        if (gra->parsed()) return cmd_graph(nbins, r_param, out.empty() ? "graph.json" : out);
        if (mbq->parsed()) return cmd_mbqc(config_path, out.empty() ? "mbqc.json" : out);
        if (rep->parsed()) {
            const std::uint64_t seed = seed_given ? seed_val : 7;
            const std::string prefix = out.empty() ? pipeline : out;
            if (pipeline == "traces") return reproduce_traces(prefix, seed);
            if (pipeline == "certify") return reproduce_certify(prefix, seed, threads);
            if (pipeline == "dephasing") return reproduce_dephasing(prefix, seed, threads);
            if (pipeline == "predictions") return reproduce_predictions(prefix);
            throw std::invalid_argument("unknown pipeline '" + pipeline +
                                        "' (expected traces, certify, dephasing, predictions)");
        }
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const std::ios_base::failure& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    }
    return kExitInput;
}

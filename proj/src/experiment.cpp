#include "xepr/experiment.hpp"

#include "xepr/rng.hpp"
#include "xepr/sha256.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace xepr {

Basis basis_from_char(char c) {
    if (c == 'x' || c == 'X') return Basis::X;
    if (c == 'p' || c == 'P') return Basis::P;
    throw std::invalid_argument(std::string("unknown basis '") + c + "'");
}

std::string basis_schedule_name(BasisSchedule schedule) {
    switch (schedule) {
        case BasisSchedule::AlternateByFrameParity: return "alternate";
        case BasisSchedule::AllX: return "all_x";
        case BasisSchedule::AllP: return "all_p";
        case BasisSchedule::AxBp: return "a_x_b_p";
        case BasisSchedule::ApBx: return "a_p_b_x";
    }
    throw std::logic_error("unreachable basis schedule");
}

BasisSchedule basis_schedule_from_name(const std::string& name) {
    if (name == "alternate") return BasisSchedule::AlternateByFrameParity;
    if (name == "all_x") return BasisSchedule::AllX;
    if (name == "all_p") return BasisSchedule::AllP;
    if (name == "a_x_b_p") return BasisSchedule::AxBp;
    if (name == "a_p_b_x") return BasisSchedule::ApBx;
    throw std::invalid_argument("unknown basis_schedule '" + name + "'");
}

void ExperimentConfig::validate() const {
    losses().validate();
    if (frames < 1) throw std::invalid_argument("ExperimentConfig: frames must be >= 1");
    if (bins_per_frame < 1)
        throw std::invalid_argument("ExperimentConfig: bins_per_frame must be >= 1");
    if (!(phase_drift_rate >= 0.0))
        throw std::invalid_argument("ExperimentConfig: phase_drift_rate must be >= 0");
    if (!(electronic_noise_ratio >= 0.0))
        throw std::invalid_argument("ExperimentConfig: electronic_noise_ratio must be >= 0");
    if (!std::isfinite(squeezing_db_A) || !std::isfinite(squeezing_db_B))
        throw std::invalid_argument("ExperimentConfig: squeezing levels must be finite");
    for (double asq : {antisqueezing_db_A, antisqueezing_db_B}) {
        if (!std::isfinite(asq)) throw std::invalid_argument("ExperimentConfig: bad antisqueezing");
    }
}

namespace {

RailInput rail_from_db(double squeezing_db, double antisqueezing_db) {
    const double sq_ratio = ratio_from_db(-squeezing_db);
    const double asq_ratio =
        antisqueezing_db < 0.0 ? 1.0 / sq_ratio : ratio_from_db(antisqueezing_db);
    return RailInput::from_ratios(sq_ratio, asq_ratio);
}

}  // namespace

RailInput ExperimentConfig::rail_a() const {
    return rail_from_db(squeezing_db_A, antisqueezing_db_A);
}

RailInput ExperimentConfig::rail_b() const {
    return rail_from_db(squeezing_db_B, antisqueezing_db_B);
}

std::pair<Basis, Basis> ExperimentConfig::frame_basis(int frame) const {
    switch (basis_schedule) {
        case BasisSchedule::AlternateByFrameParity:
            return frame % 2 == 0 ? std::pair{Basis::X, Basis::X} : std::pair{Basis::P, Basis::P};
        case BasisSchedule::AllX: return {Basis::X, Basis::X};
        case BasisSchedule::AllP: return {Basis::P, Basis::P};
        case BasisSchedule::AxBp: return {Basis::X, Basis::P};
        case BasisSchedule::ApBx: return {Basis::P, Basis::X};
    }
    throw std::logic_error("unreachable basis schedule");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    static const char* known[] = {
        "squeezing_db_A",     "squeezing_db_B", "antisqueezing_db_A", "antisqueezing_db_B",
        "eta2_A",             "eta2_B",         "eta2_AF",            "eta2_BF",
        "frames",             "bins_per_frame", "basis_schedule",     "phase_drift_rate",
        "electronic_noise_ratio", "seed"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known)) {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    ExperimentConfig cfg;
    const auto num = [&](const char* key, double fallback) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_number()) throw std::invalid_argument(std::string("config: '") + key + "' must be a number");
        return j.at(key).get<double>();
    };
    cfg.squeezing_db_A = num("squeezing_db_A", cfg.squeezing_db_A);
    cfg.squeezing_db_B = num("squeezing_db_B", cfg.squeezing_db_B);
    cfg.antisqueezing_db_A = num("antisqueezing_db_A", cfg.antisqueezing_db_A);
    cfg.antisqueezing_db_B = num("antisqueezing_db_B", cfg.antisqueezing_db_B);
    cfg.eta2_A = num("eta2_A", cfg.eta2_A);
    cfg.eta2_B = num("eta2_B", cfg.eta2_B);
    cfg.eta2_AF = num("eta2_AF", cfg.eta2_AF);
    cfg.eta2_BF = num("eta2_BF", cfg.eta2_BF);
    cfg.phase_drift_rate = num("phase_drift_rate", cfg.phase_drift_rate);
    cfg.electronic_noise_ratio = num("electronic_noise_ratio", cfg.electronic_noise_ratio);
    if (j.contains("frames")) {
        if (!j.at("frames").is_number_integer())
            throw std::invalid_argument("config: 'frames' must be an integer");
        cfg.frames = j.at("frames").get<int>();
    }
    if (j.contains("bins_per_frame")) {
        if (!j.at("bins_per_frame").is_number_integer())
            throw std::invalid_argument("config: 'bins_per_frame' must be an integer");
        cfg.bins_per_frame = j.at("bins_per_frame").get<int>();
    }
    if (j.contains("basis_schedule")) {
        if (!j.at("basis_schedule").is_string())
            throw std::invalid_argument("config: 'basis_schedule' must be a string");
        cfg.basis_schedule = basis_schedule_from_name(j.at("basis_schedule").get<std::string>());
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned())
            throw std::invalid_argument("config: 'seed' must be a non-negative integer");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    cfg.validate();
    return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
    return nlohmann::json{{"squeezing_db_A", squeezing_db_A},
                          {"squeezing_db_B", squeezing_db_B},
                          {"antisqueezing_db_A", antisqueezing_db_A},
                          {"antisqueezing_db_B", antisqueezing_db_B},
                          {"eta2_A", eta2_A},
                          {"eta2_B", eta2_B},
                          {"eta2_AF", eta2_AF},
                          {"eta2_BF", eta2_BF},
                          {"frames", frames},
                          {"bins_per_frame", bins_per_frame},
                          {"basis_schedule", basis_schedule_name(basis_schedule)},
                          {"phase_drift_rate", phase_drift_rate},
                          {"electronic_noise_ratio", electronic_noise_ratio},
                          {"seed", seed}};
}

std::pair<double, double> apply_phase_drift(const PhaseState& state,
                                            std::pair<double, double> xp, DriftPath path) {
    double phi = 0.0;
    switch (path) {
        case DriftPath::Fiber: phi = state.fiber; break;
        case DriftPath::LoA: phi = state.lo_a; break;
        case DriftPath::LoB: phi = state.lo_b; break;
    }
    const double c = std::cos(phi), s = std::sin(phi);
    return {xp.first * c - xp.second * s, xp.first * s + xp.second * c};
}

std::vector<BinSample> sample_frame(const ExperimentConfig& cfg, int frame) {
    cfg.validate();
    if (frame < 0 || frame >= cfg.frames)
        throw std::out_of_range("sample_frame: frame outside configured range");

    GaussianRng rng = GaussianRng::for_stream(cfg.seed, static_cast<std::uint64_t>(frame));
    const RailInput rail_a = cfg.rail_a();
    const RailInput rail_b = cfg.rail_b();
    const ChannelNoiseModel ch = ChannelNoiseModel::from_losses(cfg.losses());
    const auto [basis_a, basis_b] = cfg.frame_basis(frame);
    const double sd_ax = std::sqrt(rail_a.var_squeezed);
    const double sd_ap = std::sqrt(rail_a.var_antisqueezed);
    const double sd_bx = std::sqrt(rail_b.var_antisqueezed);
    const double sd_bp = std::sqrt(rail_b.var_squeezed);
    const double sd_noise_x = std::sqrt(ch.sigma_x * kVacuumVar);
    const double sd_noise_p = std::sqrt(ch.sigma_p * kVacuumVar);
    const double sd_vac = std::sqrt(kVacuumVar);
    const double sd_elec = std::sqrt(cfg.electronic_noise_ratio * kVacuumVar);
    const bool lossy = !ch.trivial();

    // The fiber line starts in vacuum; afterwards it carries the previous
    // bin's fiber channel.
    double delay_x = rng.normal(0.0, sd_vac);
    double delay_p = rng.normal(0.0, sd_vac);

    PhaseState phases;
    std::vector<BinSample> out;
    out.reserve(static_cast<std::size_t>(cfg.bins_per_frame));
    for (int k = 1; k <= cfg.bins_per_frame; ++k) {
        const double ax = rng.normal(0.0, sd_ax);
        const double ap = rng.normal(0.0, sd_ap);
        const double bx = rng.normal(0.0, sd_bx);
        const double bp = rng.normal(0.0, sd_bp);

        // First beam splitter: free-space = (a+b)/sqrt2, fiber = (b-a)/sqrt2.
        double fs_x = (ax + bx) * std::numbers::sqrt2 / 2.0;
        double fs_p = (ap + bp) * std::numbers::sqrt2 / 2.0;
        double fib_x = (bx - ax) * std::numbers::sqrt2 / 2.0;
        double fib_p = (bp - ap) * std::numbers::sqrt2 / 2.0;

        if (lossy) {
            const double nfx = fs_x, nbx = fib_x, nfp = fs_p, nbp = fib_p;
            fs_x = ch.D(0, 0) * nfx + ch.D(0, 1) * nbx;
            fib_x = ch.D(1, 0) * nfx + ch.D(1, 1) * nbx;
            fs_p = ch.D(0, 0) * nfp + ch.D(0, 1) * nbp;
            fib_p = ch.D(1, 0) * nfp + ch.D(1, 1) * nbp;
            fs_x += rng.normal(0.0, sd_noise_x);
            fib_x += rng.normal(0.0, sd_noise_x);
            fs_p += rng.normal(0.0, sd_noise_p);
            fib_p += rng.normal(0.0, sd_noise_p);
        }

        if (cfg.phase_drift_rate > 0.0) {
            phases.fiber += rng.normal(0.0, cfg.phase_drift_rate);
            phases.lo_a += rng.normal(0.0, cfg.phase_drift_rate);
            phases.lo_b += rng.normal(0.0, cfg.phase_drift_rate);
        }
        const auto [dx, dp] = apply_phase_drift(phases, {delay_x, delay_p}, DriftPath::Fiber);

        // Second beam splitter in (fiber, free-space) order: the delayed
        // fiber port carries the sum and is detector B's wave packet.
        const double out_b_x = (dx + fs_x) * std::numbers::sqrt2 / 2.0;
        const double out_b_p = (dp + fs_p) * std::numbers::sqrt2 / 2.0;
        const double out_a_x = (fs_x - dx) * std::numbers::sqrt2 / 2.0;
        const double out_a_p = (fs_p - dp) * std::numbers::sqrt2 / 2.0;

        delay_x = fib_x;
        delay_p = fib_p;

        const auto [ma_x, ma_p] = apply_phase_drift(phases, {out_a_x, out_a_p}, DriftPath::LoA);
        const auto [mb_x, mb_p] = apply_phase_drift(phases, {out_b_x, out_b_p}, DriftPath::LoB);

        BinSample s;
        s.frame = frame;
        s.k = k;
        s.basis_a = basis_a;
        s.basis_b = basis_b;
        s.value_a = basis_a == Basis::X ? ma_x : ma_p;
        s.value_b = basis_b == Basis::X ? mb_x : mb_p;
        if (cfg.electronic_noise_ratio > 0.0) {
            s.value_a += rng.normal(0.0, sd_elec);
            s.value_b += rng.normal(0.0, sd_elec);
        }
        out.push_back(s);
    }
    return out;
}

RunMetadata make_run_metadata(const ExperimentConfig& cfg) {
    RunMetadata meta;
    meta.seed = cfg.seed;
    meta.config_json = cfg.to_json().dump();
    meta.config_hash = Sha256::hash_hex(meta.config_json);
    meta.version = kToolVersion;
    meta.provenance = std::string("xepr ") + kToolVersion + "+cfg." + meta.config_hash.substr(0, 12);
    return meta;
}

RunMetadata run_experiment(const ExperimentConfig& cfg, const SampleSink& sink, int threads) {
    cfg.validate();
    if (threads < 1) threads = 1;
    threads = std::min<int>(threads, cfg.frames);

    if (threads == 1) {
        for (int frame = 0; frame < cfg.frames; ++frame) {
            for (const BinSample& s : sample_frame(cfg, frame)) sink(s);
        }
        return make_run_metadata(cfg);
    }

    // Frames are computed in parallel blocks and delivered in frame order so
    // the emitted stream is independent of the thread count.
    std::vector<std::vector<BinSample>> block(static_cast<std::size_t>(threads));
    for (int base = 0; base < cfg.frames; base += threads) {
        const int width = std::min(threads, cfg.frames - base);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(width));
        for (int i = 0; i < width; ++i) {
            pool.emplace_back([&, i] { block[static_cast<std::size_t>(i)] = sample_frame(cfg, base + i); });
        }
        for (auto& t : pool) t.join();
        for (int i = 0; i < width; ++i) {
            for (const BinSample& s : block[static_cast<std::size_t>(i)]) sink(s);
        }
    }
    return make_run_metadata(cfg);
}

std::vector<BinSample> run_experiment(const ExperimentConfig& cfg, int threads) {
    std::vector<BinSample> out;
    out.reserve(static_cast<std::size_t>(cfg.frames) * static_cast<std::size_t>(cfg.bins_per_frame));
    run_experiment(cfg, [&](const BinSample& s) { out.push_back(s); }, threads);
    return out;
}

void write_samples_csv_header(std::ostream& os) {
    os << "frame,k,basis_A,value_A,basis_B,value_B\n";
}

void write_samples_csv_row(std::ostream& os, const BinSample& s) {
    char line[128];
    const int len = std::snprintf(line, sizeof line, "%d,%d,%c,%.17g,%c,%.17g\n", s.frame, s.k,
                                  basis_char(s.basis_a), s.value_a, basis_char(s.basis_b),
                                  s.value_b);
    os.write(line, len);
}

RunMetadata run_experiment_to_csv(const ExperimentConfig& cfg, std::ostream& os, int threads) {
    write_samples_csv_header(os);
    RunMetadata meta = run_experiment(
        cfg, [&os](const BinSample& s) { write_samples_csv_row(os, s); }, threads);
    if (!os) throw std::runtime_error("run_experiment_to_csv: write failure");
    return meta;
}

}  // namespace xepr

#pragma once

// Streaming Monte-Carlo generator of the dual-rail time-multiplexing
// experiment: per-bin squeezed-vacuum sampling, the two beam splitters with a
// one-bin fiber delay, lumped channel losses, phase drift, electronic noise
// and scheduled homodyne readout. Frames use independent RNG substreams, so
// statistics are reproducible and frame-parallel.

#include "xepr/gaussian.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace xepr {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Basis : std::uint8_t { X, P };

inline char basis_char(Basis b) { return b == Basis::X ? 'x' : 'p'; }
Basis basis_from_char(char c);

// Which quadrature each detector reads in a given frame. The default keeps
// the two nullifier datasets on disjoint frame sets by alternating with frame
// parity; the mixed schedules exist to probe cross-detector covariances.
enum class BasisSchedule : std::uint8_t {
    AlternateByFrameParity,
    AllX,
    AllP,
    AxBp,
    ApBx,
};

std::string basis_schedule_name(BasisSchedule schedule);
BasisSchedule basis_schedule_from_name(const std::string& name);

struct ExperimentConfig {
    double squeezing_db_A = 0.0;  // dB below shot noise
    double squeezing_db_B = 0.0;
    // dB above shot noise; negative = pure (derived from the squeezing level).
    double antisqueezing_db_A = -1.0;
    double antisqueezing_db_B = -1.0;
    double eta2_A = 1.0;
    double eta2_B = 1.0;
    double eta2_AF = 1.0;
    double eta2_BF = 1.0;
    int frames = 1;
    int bins_per_frame = 2;
    BasisSchedule basis_schedule = BasisSchedule::AlternateByFrameParity;
    double phase_drift_rate = 0.0;  // radians per sqrt(bin), within a frame
    double electronic_noise_ratio = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    LossSpec losses() const { return {eta2_A, eta2_B, eta2_AF, eta2_BF}; }
    RailInput rail_a() const;
    RailInput rail_b() const;
    std::pair<Basis, Basis> frame_basis(int frame) const;

    // Strict parser: every key must be known, every value well-typed.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct BinSample {
    int frame = 0;
    int k = 0;  // 1-based bin index within the frame
    Basis basis_a = Basis::X;
    Basis basis_b = Basis::X;
    double value_a = 0.0;
    double value_b = 0.0;
};

// Per-path phase offsets in radians, re-locked (0) at each frame start.
struct PhaseState {
    double fiber = 0.0;
    double lo_a = 0.0;
    double lo_b = 0.0;
};

enum class DriftPath : std::uint8_t { Fiber, LoA, LoB };

// Rotates (x, p) by the path's current phase:
// x -> x cos(phi) - p sin(phi), p -> x sin(phi) + p cos(phi).
std::pair<double, double> apply_phase_drift(const PhaseState& state,
                                            std::pair<double, double> xp, DriftPath path);

// All samples of one frame, deterministic given (cfg.seed, frame).
std::vector<BinSample> sample_frame(const ExperimentConfig& cfg, int frame);

struct RunMetadata {
    std::uint64_t seed = 0;
    std::string config_hash;   // SHA-256 of the canonical config JSON
    std::string version;       // tool version string
    std::string provenance;    // version + config-hash tag
    std::string config_json;   // canonical echo
};

RunMetadata make_run_metadata(const ExperimentConfig& cfg);

using SampleSink = std::function<void(const BinSample&)>;

// Emits every sample in (frame, k) order. With threads > 1, frames are
// computed in parallel but delivered in the same order as the serial run.
RunMetadata run_experiment(const ExperimentConfig& cfg, const SampleSink& sink,
                           int threads = 1);
std::vector<BinSample> run_experiment(const ExperimentConfig& cfg, int threads = 1);

// CSV order matches the sink order; header: frame,k,basis_A,value_A,basis_B,value_B
void write_samples_csv_header(std::ostream& os);
void write_samples_csv_row(std::ostream& os, const BinSample& sample);
RunMetadata run_experiment_to_csv(const ExperimentConfig& cfg, std::ostream& os,
                                  int threads = 1);

}  // namespace xepr

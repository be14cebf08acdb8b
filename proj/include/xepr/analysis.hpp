#pragma once

// Sample-stream analysis: per-index nullifier variances with chi-square
// confidence intervals, dB levels against the vacuum reference 1, the
// seven-partition inseparability certificate, windowed summaries, wave-packet
// extraction from continuous traces, and the drift-rate calibration sweep.

#include "xepr/experiment.hpp"
#include "xepr/spectral.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace xepr {

inline constexpr double kInseparabilityBoundDb = -3.0102999566398120;  // 10 log10(1/2)

enum class MeanMode : std::uint8_t {
    // Population mean is 0 by construction; variance = sum(v^2)/n, df = n.
    AssumeZero,
    // For ingested data with DC offsets; (n-1)-denominator sample variance.
    Subtract,
};

struct VarianceEstimate {
    std::int64_t count = 0;
    double variance = 0.0;
    double ci_lo = 0.0;  // 95% chi-square interval, linear scale
    double ci_hi = 0.0;
    bool valid() const { return count >= 2; }
    double db() const;
    double ci_lo_db() const;
    double ci_hi_db() const;
};

struct KStats {
    int k = 0;
    VarianceEstimate x;
    VarianceEstimate p;
};

struct NullifierReport {
    std::vector<KStats> per_k;  // ascending k = 1 .. max_k
    MeanMode mode = MeanMode::AssumeZero;
    std::int64_t frames_seen = 0;

    const KStats* find(int k) const;
};

// Single-pass, mergeable accumulator over BinSample streams. Nullifier pairs
// are built from consecutive bins of one frame measured in one basis:
//   X_k = xA_k + xB_k + xA_{k+1} - xB_{k+1}
//   P_k = pA_k + pB_k - pA_{k+1} + pB_{k+1}
class NullifierAccumulator {
  public:
    void add(const BinSample& sample);
    void merge(const NullifierAccumulator& other);
    NullifierReport report(MeanMode mode = MeanMode::AssumeZero) const;

  private:
    struct Moments {
        std::int64_t n = 0;
        double sum = 0.0;
        double sumsq = 0.0;
    };
    struct Cell {
        Moments x;
        Moments p;
    };
    std::vector<Cell> cells_;
    int last_frame_ = -1;
    int last_k_ = 0;
    Basis last_basis_a_ = Basis::X;
    Basis last_basis_b_ = Basis::X;
    double last_value_a_ = 0.0;
    double last_value_b_ = 0.0;
    bool have_last_ = false;
    std::int64_t frames_seen_ = 0;
};

NullifierReport nullifier_variances(const std::vector<BinSample>& samples,
                                    MeanMode mode = MeanMode::AssumeZero);

// Chi-square quantile (Wilson-Hilferty approximation), used for variance CIs.
double chi2_quantile(double p, double df);

// The seven bipartition inequalities for the node pairs at temporal index k.
// An entry holds when the variance sum is strictly below the bound, denying
// separability across that partition.
struct VlfCase {
    std::string partition;
    double value = 0.0;
    double bound = 0.0;
    bool holds = false;
};

struct VlfRow {
    int k = 0;
    std::array<VlfCase, 7> cases;
    int evaluated = 0;  // 5 for the last index (cases 6-7 need varP at k+1)
    bool all_hold = false;
    bool strict_x = false;  // Var(X_k) < 1/2
    bool strict_p = false;
};

struct VlfCertificate {
    std::vector<VlfRow> rows;
    int certified_k = 0;         // largest K with all seven conditions for k <= K
    int strict_certified_k = 0;  // largest K with the headline var < 1/2 bound
    std::optional<std::string> first_failure;
};

VlfCertificate vlf_certificate(const std::vector<double>& var_x,
                               const std::vector<double>& var_p);
VlfCertificate vlf_certificate(const NullifierReport& report);

struct WindowSummary {
    int k_lo = 0;
    int k_hi = 0;
    int count = 0;
    double mean_db_x = 0.0;
    double stderr_db_x = 0.0;
    double mean_db_p = 0.0;
    double stderr_db_p = 0.0;
};

// Mean of the per-k dB values over k in [k_lo, k_hi], with standard errors.
WindowSummary window_summary(const NullifierReport& report, int k_lo, int k_hi);

// Riemann integration of a sampled trace against the mode function, one
// value per duration-T bin; sample i maps to bin-local midpoint time.
std::vector<double> extract_quadratures(const std::vector<double>& trace,
                                        const ModeFunction& mf, double sample_rate);

// CSV ingestion of the simulate output format. Throws with the offending
// line number on malformed input.
std::vector<BinSample> read_samples_csv(std::istream& is);

// Plot emission: header "k,varX_db,varP_db,ciX,ciP"; ci columns are dB
// half-widths of the 95% intervals.
void write_plot_csv(std::ostream& os, const NullifierReport& report);

nlohmann::json report_to_json(const NullifierReport& report);
nlohmann::json certificate_to_json(const VlfCertificate& cert);

// First k where the smoothed mean of the X/P dB curves rises above the
// -3.01 dB bound (moving average over `smooth_window` indices).
std::optional<int> find_crossing_k(const NullifierReport& report,
                                   double threshold_db = kInseparabilityBoundDb,
                                   int smooth_window = 201);

struct DriftCalibration {
    double rate = 0.0;       // radians per sqrt(bin)
    int crossing_k = 0;      // crossing of the final verification run
    double probe_rate = 0.0;
    int probe_crossing_k = 0;
};

// Wiener drift gives crossing index K proportional to 1/rate^2; one probe run
// plus that scaling (iterated once) lands the -3 dB crossing near target_k.
DriftCalibration calibrate_drift_rate(ExperimentConfig base, int target_k,
                                      int probe_frames = 400, int threads = 1);

}  // namespace xepr

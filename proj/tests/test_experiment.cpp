#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "xepr/experiment.hpp"
#include "xepr/sha256.hpp"
#include "xepr/spectral.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

using namespace xepr;

namespace {

constexpr double kDb6 = 6.0205999132796239;  // 10 log10(4)

ExperimentConfig lossless_6db(int frames, int bins, std::uint64_t seed,
                              BasisSchedule schedule = BasisSchedule::AllX) {
    ExperimentConfig cfg;
    cfg.squeezing_db_A = kDb6;
    cfg.squeezing_db_B = kDb6;
    cfg.frames = frames;
    cfg.bins_per_frame = bins;
    cfg.basis_schedule = schedule;
    cfg.seed = seed;
    return cfg;
}

struct PooledVar {
    double a = 0.0;
    double b = 0.0;
};

PooledVar pooled_value_variance(const std::vector<BinSample>& samples) {
    double sa = 0.0, sb = 0.0;
    for (const BinSample& s : samples) {
        sa += s.value_a * s.value_a;
        sb += s.value_b * s.value_b;
    }
    const auto n = static_cast<double>(samples.size());
    return {sa / n, sb / n};
}

// Pooled variance of X_k (or P_k with flipped signs) over all adjacent pairs.
double pooled_nullifier_variance(const std::vector<BinSample>& samples, Basis basis) {
    double ss = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        const BinSample& lo = samples[i];
        const BinSample& hi = samples[i + 1];
        if (hi.frame != lo.frame || hi.k != lo.k + 1) continue;
        if (lo.basis_a != basis || hi.basis_a != basis) continue;
        const double v = basis == Basis::X
                             ? lo.value_a + lo.value_b + hi.value_a - hi.value_b
                             : lo.value_a + lo.value_b - hi.value_a + hi.value_b;
        ss += v * v;
        ++n;
    }
    REQUIRE(n > 0);
    return ss / static_cast<double>(n);
}

}  // namespace

TEST_CASE("config validation rejects out-of-range fields") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    ExperimentConfig bad = cfg;
    bad.frames = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.bins_per_frame = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.eta2_AF = 1.3;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);
    bad = cfg;
    bad.phase_drift_rate = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.electronic_noise_ratio = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("config json round trip is strict") {
    ExperimentConfig cfg = lossless_6db(7, 11, 99, BasisSchedule::AxBp);
    cfg.eta2_A = 0.882;
    cfg.eta2_B = 0.899;
    cfg.eta2_AF = 0.737;
    cfg.eta2_BF = 0.753;
    cfg.phase_drift_rate = 0.01;
    cfg.electronic_noise_ratio = 0.02;

    const nlohmann::json j = cfg.to_json();
    const ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.squeezing_db_A == cfg.squeezing_db_A);
    CHECK(back.basis_schedule == BasisSchedule::AxBp);
    CHECK(back.seed == 99);

    SUBCASE("unknown keys are rejected") {
        nlohmann::json extra = j;
        extra["squeeezing_db_A"] = 3.0;
        CHECK_THROWS_AS(ExperimentConfig::from_json(extra), std::invalid_argument);
    }
    SUBCASE("ill-typed values are rejected") {
        nlohmann::json wrong = j;
        wrong["frames"] = "many";
        CHECK_THROWS_AS(ExperimentConfig::from_json(wrong), std::invalid_argument);
        wrong = j;
        wrong["seed"] = -4;
        CHECK_THROWS_AS(ExperimentConfig::from_json(wrong), std::invalid_argument);
    }
    SUBCASE("schedule names round trip") {
        for (BasisSchedule s :
             {BasisSchedule::AlternateByFrameParity, BasisSchedule::AllX, BasisSchedule::AllP,
              BasisSchedule::AxBp, BasisSchedule::ApBx}) {
            CHECK(basis_schedule_from_name(basis_schedule_name(s)) == s);
        }
        CHECK_THROWS_AS(basis_schedule_from_name("sometimes-x"), std::invalid_argument);
    }
}

TEST_CASE("basis schedules pick the detector quadratures") {
    ExperimentConfig cfg;
    cfg.basis_schedule = BasisSchedule::AlternateByFrameParity;
    CHECK(cfg.frame_basis(0) == std::pair{Basis::X, Basis::X});
    CHECK(cfg.frame_basis(1) == std::pair{Basis::P, Basis::P});
    CHECK(cfg.frame_basis(2) == std::pair{Basis::X, Basis::X});

    cfg.basis_schedule = BasisSchedule::AxBp;
    CHECK(cfg.frame_basis(0) == std::pair{Basis::X, Basis::P});
    CHECK(cfg.frame_basis(5) == std::pair{Basis::X, Basis::P});
    cfg.basis_schedule = BasisSchedule::ApBx;
    CHECK(cfg.frame_basis(3) == std::pair{Basis::P, Basis::X});

    CHECK(basis_from_char('x') == Basis::X);
    CHECK(basis_from_char('p') == Basis::P);
    CHECK_THROWS_AS(basis_from_char('y'), std::invalid_argument);
}

TEST_CASE("samples arrive in frame and bin order with scheduled bases") {
    const ExperimentConfig cfg = lossless_6db(3, 5, 17, BasisSchedule::AlternateByFrameParity);
    const std::vector<BinSample> samples = run_experiment(cfg);
    REQUIRE(samples.size() == 15);
    for (int f = 0; f < 3; ++f) {
        for (int k = 1; k <= 5; ++k) {
            const BinSample& s = samples[static_cast<std::size_t>(f * 5 + k - 1)];
            CHECK(s.frame == f);
            CHECK(s.k == k);
            CHECK(s.basis_a == (f % 2 == 0 ? Basis::X : Basis::P));
            CHECK(s.basis_b == s.basis_a);
        }
    }
}

TEST_CASE("vacuum configuration produces shot-noise statistics") {
    ExperimentConfig cfg;
    cfg.frames = 200;
    cfg.bins_per_frame = 100;
    cfg.basis_schedule = BasisSchedule::AllX;
    cfg.seed = 5;
    const std::vector<BinSample> samples = run_experiment(cfg);

    const PooledVar v = pooled_value_variance(samples);
    CHECK(v.a == doctest::Approx(0.25).epsilon(0.04));
    CHECK(v.b == doctest::Approx(0.25).epsilon(0.04));

    double mean_a = 0.0;
    for (const BinSample& s : samples) mean_a += s.value_a;
    mean_a /= static_cast<double>(samples.size());
    CHECK(std::abs(mean_a) < 0.02);

    CHECK(pooled_nullifier_variance(samples, Basis::X) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("lossless 6 dB run: quadrature and nullifier variances") {
    const std::vector<BinSample> x_run = run_experiment(lossless_6db(250, 80, 21));

    // Each detector sees a balanced mix of one squeezed and one antisqueezed
    // quadrature: variance (e^{-2r} + e^{2r}) / 8 in raw units.
    const PooledVar v = pooled_value_variance(x_run);
    CHECK(v.a == doctest::Approx(4.25 / 8.0).epsilon(0.04));
    CHECK(v.b == doctest::Approx(4.25 / 8.0).epsilon(0.04));

    CHECK(pooled_nullifier_variance(x_run, Basis::X) == doctest::Approx(0.25).epsilon(0.05));

    const std::vector<BinSample> p_run =
        run_experiment(lossless_6db(250, 80, 22, BasisSchedule::AllP));
    CHECK(pooled_nullifier_variance(p_run, Basis::P) == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("runs are deterministic and frame-parallelism preserves the stream") {
    const ExperimentConfig cfg = lossless_6db(24, 40, 1234);
    const std::vector<BinSample> serial = run_experiment(cfg);
    const std::vector<BinSample> again = run_experiment(cfg);
    const std::vector<BinSample> parallel = run_experiment(cfg, 4);

    REQUIRE(serial.size() == again.size());
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].value_a == again[i].value_a);
        CHECK(serial[i].value_a == parallel[i].value_a);
        CHECK(serial[i].value_b == parallel[i].value_b);
        CHECK(serial[i].frame == parallel[i].frame);
        CHECK(serial[i].k == parallel[i].k);
    }

    ExperimentConfig other = cfg;
    other.seed = 1235;
    CHECK(run_experiment(other)[0].value_a != serial[0].value_a);
}

TEST_CASE("frames are independent substreams") {
    // A frame's samples must not depend on how many frames run before it.
    const ExperimentConfig two = lossless_6db(2, 30, 77);
    ExperimentConfig five = two;
    five.frames = 5;
    const std::vector<BinSample> short_run = run_experiment(two);
    const std::vector<BinSample> long_run = run_experiment(five);
    for (std::size_t i = 0; i < short_run.size(); ++i) {
        CHECK(long_run[i].value_a == short_run[i].value_a);
        CHECK(long_run[i].value_b == short_run[i].value_b);
    }
}

TEST_CASE("phase drift rotates quadratures along the chosen path") {
    PhaseState phases;
    phases.fiber = M_PI / 2.0;
    phases.lo_a = 0.3;

    SUBCASE("quarter turn on the fiber path") {
        const auto [x, p] = apply_phase_drift(phases, {1.0, 0.5}, DriftPath::Fiber);
        CHECK(x == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("local oscillator path uses its own angle") {
        const auto [x, p] = apply_phase_drift(phases, {1.0, 0.0}, DriftPath::LoA);
        CHECK(x == doctest::Approx(std::cos(0.3)).epsilon(1e-12));
        CHECK(p == doctest::Approx(std::sin(0.3)).epsilon(1e-12));
    }
    SUBCASE("zero angle is the identity") {
        const auto [x, p] = apply_phase_drift(phases, {0.7, -0.2}, DriftPath::LoB);
        CHECK(x == 0.7);
        CHECK(p == -0.2);
    }
}

TEST_CASE("phase drift degrades late bins, zero rate stays flat") {
    ExperimentConfig drift = lossless_6db(150, 400, 31);
    drift.phase_drift_rate = 0.03;
    const std::vector<BinSample> drifted = run_experiment(drift);

    auto var_over = [](const std::vector<BinSample>& samples, int k_lo, int k_hi) {
        double ss = 0.0;
        std::int64_t n = 0;
        for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
            const BinSample& lo = samples[i];
            const BinSample& hi = samples[i + 1];
            if (hi.frame != lo.frame || hi.k != lo.k + 1) continue;
            if (lo.k < k_lo || lo.k > k_hi) continue;
            const double v = lo.value_a + lo.value_b + hi.value_a - hi.value_b;
            ss += v * v;
            ++n;
        }
        return ss / static_cast<double>(n);
    };

    const double early = var_over(drifted, 1, 80);
    const double late = var_over(drifted, 320, 399);
    CHECK(late > 2.0 * early);

    ExperimentConfig flat = drift;
    flat.phase_drift_rate = 0.0;
    const std::vector<BinSample> still = run_experiment(flat);
    const double early_flat = var_over(still, 1, 80);
    const double late_flat = var_over(still, 320, 399);
    CHECK(late_flat == doctest::Approx(early_flat).epsilon(0.10));
}

TEST_CASE("electronic noise adds a shot-noise fraction to every reading") {
    ExperimentConfig cfg;
    cfg.frames = 300;
    cfg.bins_per_frame = 100;
    cfg.electronic_noise_ratio = 0.5;
    cfg.basis_schedule = BasisSchedule::AllX;
    cfg.seed = 8;
    const PooledVar v = pooled_value_variance(run_experiment(cfg));
    CHECK(v.a == doctest::Approx(0.25 * 1.5).epsilon(0.04));
    CHECK(v.b == doctest::Approx(0.25 * 1.5).epsilon(0.04));
}

TEST_CASE("balanced losses pull the nullifier variance toward the vacuum") {
    ExperimentConfig cfg = lossless_6db(400, 60, 91);
    cfg.eta2_A = cfg.eta2_B = cfg.eta2_AF = cfg.eta2_BF = 0.5;
    const double var = pooled_nullifier_variance(run_experiment(cfg), Basis::X);
    CHECK(var == doctest::Approx(1.0 + 0.5 * (0.25 - 1.0)).epsilon(0.05));
}

TEST_CASE("asymmetric efficiencies match the loss-weighted prediction") {
    const LossSpec losses{0.882, 0.899, 0.737, 0.753};
    const double sq = 0.264022582, asq = 3.8158209053;
    const NullifierPrediction pred =
        predicted_nullifier_variances(sq, asq, sq, asq, losses);

    ExperimentConfig cfg;
    cfg.squeezing_db_A = cfg.squeezing_db_B = -10.0 * std::log10(sq);
    cfg.antisqueezing_db_A = cfg.antisqueezing_db_B = 10.0 * std::log10(asq);
    cfg.eta2_A = losses.eta2_A;
    cfg.eta2_B = losses.eta2_B;
    cfg.eta2_AF = losses.eta2_AF;
    cfg.eta2_BF = losses.eta2_BF;
    cfg.frames = 500;
    cfg.bins_per_frame = 80;
    cfg.seed = 303;

    cfg.basis_schedule = BasisSchedule::AllX;
    const double var_x = pooled_nullifier_variance(run_experiment(cfg), Basis::X);
    CHECK(var_x == doctest::Approx(pred.var_x).epsilon(0.05));

    cfg.basis_schedule = BasisSchedule::AllP;
    const double var_p = pooled_nullifier_variance(run_experiment(cfg), Basis::P);
    CHECK(var_p == doctest::Approx(pred.var_p).epsilon(0.05));
}

TEST_CASE("three-bin frames agree with the dense circuit covariance") {
    const double ra = 0.55, rb = 0.35;
    ExperimentConfig cfg;
    cfg.squeezing_db_A = 20.0 * ra / std::log(10.0);  // e^{-2 ra} in dB
    cfg.squeezing_db_B = 20.0 * rb / std::log(10.0);
    cfg.frames = 30000;
    cfg.bins_per_frame = 3;
    cfg.basis_schedule = BasisSchedule::AllX;
    cfg.seed = 1001;

    const std::vector<BinSample> samples = run_experiment(cfg);
    const CovarianceState dense = dense_circuit(3, ra, rb);

    // Empirical second moments of the six x readings per frame.
    Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(6, 6);
    for (int f = 0; f < cfg.frames; ++f) {
        Eigen::VectorXd v(6);
        for (int k = 0; k < 3; ++k) {
            v(2 * k) = samples[static_cast<std::size_t>(3 * f + k)].value_a;
            v(2 * k + 1) = samples[static_cast<std::size_t>(3 * f + k)].value_b;
        }
        emp += v * v.transpose();
    }
    emp /= static_cast<double>(cfg.frames);

    for (int i = 0; i < 6; ++i) {
        for (int j = i; j < 6; ++j) {
            const double want = dense.cov(2 * i, 2 * j);
            const double sigma = std::sqrt(
                (dense.cov(2 * i, 2 * i) * dense.cov(2 * j, 2 * j) + want * want) /
                static_cast<double>(cfg.frames));
            CHECK(std::abs(emp(i, j) - want) < 5.0 * sigma);
        }
    }
}

TEST_CASE("csv stream round trips bit-exactly") {
    const ExperimentConfig cfg = lossless_6db(3, 4, 55, BasisSchedule::AxBp);
    std::stringstream ss;
    const RunMetadata meta = run_experiment_to_csv(cfg, ss);

    std::string header;
    std::getline(ss, header);
    CHECK(header == "frame,k,basis_A,value_A,basis_B,value_B");

    ss.seekg(0);
    std::vector<BinSample> direct = run_experiment(cfg);
    // Re-read through the text round trip.
    std::stringstream replay(ss.str());
    std::string line;
    std::getline(replay, line);
    std::size_t idx = 0;
    while (std::getline(replay, line)) {
        REQUIRE(idx < direct.size());
        std::stringstream row(line);
        std::string field;
        std::getline(row, field, ',');
        CHECK(std::stoi(field) == direct[idx].frame);
        std::getline(row, field, ',');
        CHECK(std::stoi(field) == direct[idx].k);
        std::getline(row, field, ',');
        CHECK(field == std::string(1, basis_char(direct[idx].basis_a)));
        std::getline(row, field, ',');
        CHECK(std::stod(field) == direct[idx].value_a);  // %.17g survives exactly
        std::getline(row, field, ',');
        CHECK(field == std::string(1, basis_char(direct[idx].basis_b)));
        std::getline(row, field, ',');
        CHECK(std::stod(field) == direct[idx].value_b);
        ++idx;
    }
    CHECK(idx == direct.size());
    CHECK(meta.version == kToolVersion);
}

TEST_CASE("run metadata hashes the canonical config") {
    ExperimentConfig cfg = lossless_6db(2, 3, 7);
    const RunMetadata meta = make_run_metadata(cfg);
    CHECK(meta.seed == 7);
    CHECK(meta.config_hash == Sha256::hash_hex(cfg.to_json().dump()));
    CHECK(meta.config_json == cfg.to_json().dump());
    CHECK(meta.provenance.find(kToolVersion) != std::string::npos);
    CHECK(meta.provenance.find(meta.config_hash.substr(0, 12)) != std::string::npos);

    ExperimentConfig other = cfg;
    other.seed = 8;
    CHECK(make_run_metadata(other).config_hash != meta.config_hash);
}

TEST_CASE("sha256 matches known vectors") {
    CHECK(Sha256::hash_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(Sha256::hash_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(Sha256::hash_hex(std::string(1000000, 'a')) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

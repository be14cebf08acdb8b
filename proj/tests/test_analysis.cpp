#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "xepr/analysis.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace xepr;

namespace {

constexpr double kDb6 = 6.0205999132796239;

ExperimentConfig lossless_6db(int frames, int bins, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.squeezing_db_A = kDb6;
    cfg.squeezing_db_B = kDb6;
    cfg.frames = frames;
    cfg.bins_per_frame = bins;
    cfg.seed = seed;
    return cfg;
}

// One all-X frame whose first nullifier value is exactly `value`.
void push_frame_with_x1(NullifierAccumulator& acc, int frame, double value) {
    acc.add({frame, 1, Basis::X, Basis::X, value, 0.0});
    acc.add({frame, 2, Basis::X, Basis::X, 0.0, 0.0});
}

}  // namespace

TEST_CASE("chi-square quantiles track reference values") {
    CHECK(chi2_quantile(0.975, 100.0) == doctest::Approx(129.5612).epsilon(0.003));
    CHECK(chi2_quantile(0.025, 100.0) == doctest::Approx(74.2219).epsilon(0.003));
    CHECK(chi2_quantile(0.5, 10.0) == doctest::Approx(9.3418).epsilon(0.005));
    CHECK(chi2_quantile(0.975, 1500.0) == doctest::Approx(1609.2332).epsilon(0.001));
    CHECK(chi2_quantile(0.025, 1500.0) == doctest::Approx(1394.5550).epsilon(0.001));
    CHECK_THROWS_AS(chi2_quantile(1.5, 10.0), std::domain_error);
    CHECK_THROWS_AS(chi2_quantile(0.5, 0.0), std::domain_error);
}

TEST_CASE("variance estimators: zero-mean and mean-subtracting modes") {
    NullifierAccumulator acc;
    int frame = 0;
    for (double v : {1.0, 1.0, 1.0, 3.0}) push_frame_with_x1(acc, frame++, v);

    SUBCASE("assume-zero divides the raw sum of squares by n") {
        const NullifierReport report = acc.report(MeanMode::AssumeZero);
        const KStats* stats = report.find(1);
        REQUIRE(stats != nullptr);
        CHECK(stats->x.count == 4);
        CHECK(stats->x.variance == doctest::Approx(3.0).epsilon(1e-14));
        // 95% chi-square interval with df = n.
        CHECK(stats->x.ci_lo == doctest::Approx(12.0 / chi2_quantile(0.975, 4.0)).epsilon(1e-12));
        CHECK(stats->x.ci_hi == doctest::Approx(12.0 / chi2_quantile(0.025, 4.0)).epsilon(1e-12));
        CHECK(stats->x.ci_lo < stats->x.variance);
        CHECK(stats->x.variance < stats->x.ci_hi);
        CHECK(stats->x.db() == doctest::Approx(10.0 * std::log10(3.0)).epsilon(1e-12));
    }
    SUBCASE("subtract removes the DC offset with an n-1 denominator") {
        const NullifierReport report = acc.report(MeanMode::Subtract);
        const KStats* stats = report.find(1);
        REQUIRE(stats != nullptr);
        // Values 1,1,1,3: mean 1.5, centered sum of squares 3.
        CHECK(stats->x.variance == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(stats->x.ci_lo == doctest::Approx(3.0 / chi2_quantile(0.975, 3.0)).epsilon(1e-12));
    }
    SUBCASE("p dataset stays empty for all-x frames") {
        const NullifierReport report = acc.report();
        CHECK_FALSE(report.find(1)->p.valid());
        CHECK(report.frames_seen == 4);
    }
}

TEST_CASE("confidence intervals shrink with the square root of the frame count") {
    auto width_db = [](int frames) {
        NullifierAccumulator acc;
        std::mt19937_64 gen(7);
        std::normal_distribution<double> normal(0.0, 0.5);
        for (int f = 0; f < frames; ++f) push_frame_with_x1(acc, f, normal(gen));
        const KStats* stats = acc.report().find(1);
        REQUIRE(stats != nullptr);
        return stats->x.ci_hi_db() - stats->x.ci_lo_db();
    };
    const double w100 = width_db(100);
    const double w400 = width_db(400);
    CHECK(w100 / w400 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("accumulator pairs only adjacent same-basis bins of one frame") {
    SUBCASE("frame boundaries never pair") {
        NullifierAccumulator acc;
        acc.add({0, 1, Basis::X, Basis::X, 1.0, 1.0});
        acc.add({0, 2, Basis::X, Basis::X, 1.0, 1.0});  // X_1 = 1+1+1-1 = 2
        acc.add({1, 1, Basis::X, Basis::X, 5.0, 5.0});
        const NullifierReport report = acc.report();
        CHECK(report.find(1)->x.count == 1);
        CHECK(report.frames_seen == 2);
    }
    SUBCASE("gaps in k break the chain") {
        NullifierAccumulator acc;
        acc.add({0, 1, Basis::X, Basis::X, 1.0, 1.0});
        acc.add({0, 3, Basis::X, Basis::X, 1.0, 1.0});
        acc.add({0, 4, Basis::X, Basis::X, 1.0, 1.0});  // only X_3 forms
        const NullifierReport report = acc.report();
        CHECK(report.find(1)->x.count == 0);
        CHECK(report.find(3)->x.count == 1);
    }
    SUBCASE("mixed-basis detector pairs feed neither dataset") {
        NullifierAccumulator acc;
        acc.add({0, 1, Basis::X, Basis::P, 1.0, 1.0});
        acc.add({0, 2, Basis::X, Basis::P, 1.0, 1.0});
        const NullifierReport report = acc.report();
        REQUIRE(report.find(1) != nullptr);
        CHECK(report.find(1)->x.count == 0);
        CHECK(report.find(1)->p.count == 0);
        CHECK(report.frames_seen == 1);
    }
    SUBCASE("all-p frames feed the P dataset with its sign pattern") {
        NullifierAccumulator acc;
        for (int frame = 0; frame < 2; ++frame) {
            acc.add({frame, 1, Basis::P, Basis::P, 1.0, 2.0});
            acc.add({frame, 2, Basis::P, Basis::P, 3.0, 4.0});  // P_1 = 1+2-3+4 = 4
        }
        const NullifierReport report = acc.report(MeanMode::AssumeZero);
        const KStats* stats = report.find(1);
        CHECK(stats->p.count == 2);
        CHECK(stats->p.variance == doctest::Approx(16.0).epsilon(1e-14));
        CHECK(stats->x.count == 0);
    }
    SUBCASE("malformed samples are rejected") {
        NullifierAccumulator acc;
        CHECK_THROWS_AS(acc.add({0, 0, Basis::X, Basis::X, 1.0, 1.0}), std::invalid_argument);
        CHECK_THROWS_AS(acc.add({0, 1, Basis::X, Basis::X, std::nan(""), 1.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("merged accumulators reproduce the single-pass statistics") {
    const ExperimentConfig cfg = lossless_6db(60, 40, 2024);
    const std::vector<BinSample> samples = run_experiment(cfg);

    NullifierAccumulator whole;
    NullifierAccumulator first_half, second_half;
    for (const BinSample& s : samples) {
        whole.add(s);
        (s.frame < 30 ? first_half : second_half).add(s);
    }
    first_half.merge(second_half);

    const NullifierReport a = whole.report();
    const NullifierReport b = first_half.report();
    REQUIRE(a.per_k.size() == b.per_k.size());
    CHECK(a.frames_seen == b.frames_seen);
    for (std::size_t i = 0; i < a.per_k.size(); ++i) {
        CHECK(a.per_k[i].x.count == b.per_k[i].x.count);
        CHECK(a.per_k[i].x.variance == doctest::Approx(b.per_k[i].x.variance).epsilon(1e-14));
        CHECK(a.per_k[i].p.variance == doctest::Approx(b.per_k[i].p.variance).epsilon(1e-14));
    }

    const NullifierReport direct = nullifier_variances(samples);
    CHECK(direct.per_k.size() == a.per_k.size());
    CHECK(direct.find(5)->x.variance == doctest::Approx(a.find(5)->x.variance).epsilon(1e-14));
}

TEST_CASE("nullifier sign pattern is load-bearing") {
    // Flipping any single sign in the X combination must destroy the
    // squeezing and leak antisqueezed noise far above the vacuum reference.
    const std::vector<BinSample> samples = run_experiment(lossless_6db(300, 30, 11));
    const double signs[4][4] = {
        {1.0, 1.0, 1.0, -1.0},  // reference combination
        {-1.0, 1.0, 1.0, -1.0}, {1.0, -1.0, 1.0, -1.0},
        {1.0, 1.0, -1.0, -1.0},
    };
    for (int variant = 0; variant < 4; ++variant) {
        double ss = 0.0;
        std::int64_t n = 0;
        for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
            const BinSample& lo = samples[i];
            const BinSample& hi = samples[i + 1];
            if (hi.frame != lo.frame || hi.k != lo.k + 1 || lo.basis_a != Basis::X) continue;
            const double v = signs[variant][0] * lo.value_a + signs[variant][1] * lo.value_b +
                             signs[variant][2] * hi.value_a + signs[variant][3] * hi.value_b;
            ss += v * v;
            ++n;
        }
        const double var = ss / static_cast<double>(n);
        if (variant == 0) {
            CHECK(var < 0.3);
        } else {
            CHECK(var > 1.0);
        }
    }
    // The flipped last sign (all +) is the antisqueezed partner combination.
}

TEST_CASE("seven-partition certificate") {
    SUBCASE("a deeply squeezed chain certifies every index") {
        const std::vector<double> var(10, 0.25);
        const VlfCertificate cert = vlf_certificate(var, var);
        REQUIRE(cert.rows.size() == 10);
        CHECK(cert.certified_k == 10);
        CHECK(cert.strict_certified_k == 10);
        CHECK_FALSE(cert.first_failure.has_value());
        CHECK(cert.rows[0].evaluated == 7);
        CHECK(cert.rows[9].evaluated == 5);  // cases 6-7 need the next index
        for (const VlfRow& row : cert.rows) {
            CHECK(row.all_hold);
            CHECK(row.strict_x);
            CHECK(row.strict_p);
        }
        // Case bookkeeping: pair partitions carry bound 1, the full split 2.
        CHECK(cert.rows[0].cases[0].bound == 1.0);
        CHECK(cert.rows[0].cases[4].bound == 2.0);
        CHECK(cert.rows[0].cases[0].value == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(cert.rows[0].cases[4].value == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("vacuum statistics certify nothing, starting at the first index") {
        const std::vector<double> var(6, 1.0);
        const VlfCertificate cert = vlf_certificate(var, var);
        CHECK(cert.certified_k == 0);
        CHECK(cert.strict_certified_k == 0);
        REQUIRE(cert.first_failure.has_value());
        CHECK(cert.first_failure->find("k=1") != std::string::npos);
        CHECK_FALSE(cert.rows[0].all_hold);
    }
    SUBCASE("the bound is strict") {
        const std::vector<double> var(4, 0.5);  // sums land exactly on 1.0
        const VlfCertificate cert = vlf_certificate(var, var);
        CHECK(cert.certified_k == 0);
        CHECK_FALSE(cert.rows[0].cases[0].holds);
        CHECK(cert.rows[0].cases[4].holds);  // 1.0 < 2 still passes case 5
    }
    SUBCASE("one weak index halts the strict chain but not the certificate") {
        std::vector<double> var_x(8, 0.25), var_p(8, 0.25);
        var_x[5] = 0.6;  // k = 6
        const VlfCertificate cert = vlf_certificate(var_x, var_p);
        CHECK(cert.certified_k == 8);
        CHECK(cert.strict_certified_k == 5);
        CHECK_FALSE(cert.rows[5].strict_x);
        CHECK(cert.rows[5].strict_p);
        CHECK(cert.rows[5].all_hold);
    }
    SUBCASE("lowering any variance never shrinks the certified range") {
        std::mt19937_64 gen(99);
        std::uniform_real_distribution<double> uniform(0.1, 1.4);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> vx(6), vp(6);
            for (int i = 0; i < 6; ++i) {
                vx[i] = uniform(gen);
                vp[i] = uniform(gen);
            }
            const int before = vlf_certificate(vx, vp).certified_k;
            std::vector<double> lower = vx;
            lower[static_cast<std::size_t>(trial) % 6] *= 0.5;
            CHECK(vlf_certificate(lower, vp).certified_k >= before);
        }
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(vlf_certificate(std::vector<double>{0.2, 0.2},
                                        std::vector<double>{0.2}),
                        std::invalid_argument);
        CHECK_THROWS_AS(vlf_certificate(std::vector<double>{0.2, std::nan("")},
                                        std::vector<double>{0.2, 0.2}),
                        std::invalid_argument);
    }
}

TEST_CASE("certificate from a report uses the longest valid prefix") {
    const std::vector<BinSample> samples = run_experiment(lossless_6db(400, 12, 3));
    const NullifierReport report = nullifier_variances(samples);
    const VlfCertificate cert = vlf_certificate(report);
    REQUIRE(cert.rows.size() == 11);
    CHECK(cert.certified_k == 11);
    CHECK(cert.strict_certified_k == 11);

    NullifierReport empty;
    CHECK_THROWS_AS(vlf_certificate(empty), std::invalid_argument);
}

TEST_CASE("window summary averages per-index dB levels") {
    const std::vector<BinSample> squeezed = run_experiment(lossless_6db(900, 40, 41));
    const NullifierReport report = nullifier_variances(squeezed);
    const WindowSummary window = window_summary(report, 1, 39);
    CHECK(window.count == 39);
    CHECK(window.mean_db_x == doctest::Approx(-kDb6).epsilon(0.025));
    CHECK(window.mean_db_p == doctest::Approx(-kDb6).epsilon(0.025));
    CHECK(window.stderr_db_x < 0.1);
    CHECK(std::abs(window.mean_db_x + kDb6) < 4.0 * window.stderr_db_x);

    ExperimentConfig vac;
    vac.frames = 900;
    vac.bins_per_frame = 40;
    vac.seed = 42;
    const WindowSummary flat = window_summary(nullifier_variances(run_experiment(vac)), 1, 39);
    CHECK(std::abs(flat.mean_db_x) < 4.0 * flat.stderr_db_x);
    CHECK(std::abs(flat.mean_db_x) < 0.15);

    CHECK_THROWS_AS(window_summary(report, 5, 4), std::out_of_range);
    CHECK_THROWS_AS(window_summary(report, 40, 80), std::out_of_range);
}

TEST_CASE("quadrature extraction integrates the trace against the mode shape") {
    const ModeFunction mf = ModeFunction::make(2.0 * M_PI * 2.5e6, 157.5e-9);
    const double rate = 4.0e8;  // 63 samples per bin
    const int spb = 63;

    // A constant trace integrates to int f dt per bin; compare against the
    // same midpoint rule computed directly here.
    const std::vector<double> ones(static_cast<std::size_t>(spb) * 5, 1.0);
    const std::vector<double> q = extract_quadratures(ones, mf, rate);
    REQUIRE(q.size() == 5);
    double want = 0.0;
    const double dt = 1.0 / rate;
    for (int i = 0; i < spb; ++i) want += mf.value((i + 0.5) * dt - mf.duration / 2.0) * dt;
    for (double v : q) CHECK(v == doctest::Approx(want).epsilon(1e-12));

    // Samples beyond the last whole bin are dropped.
    std::vector<double> ragged(static_cast<std::size_t>(spb) * 2 + 17, 1.0);
    CHECK(extract_quadratures(ragged, mf, rate).size() == 2);

    CHECK_THROWS_AS(extract_quadratures(ones, mf, 1.0e8 / 2.0), std::invalid_argument);
}

TEST_CASE("csv ingestion is strict about format and reports line numbers") {
    const std::string header = "frame,k,basis_A,value_A,basis_B,value_B\n";

    SUBCASE("round trip") {
        const ExperimentConfig cfg = lossless_6db(2, 3, 9);
        std::stringstream ss;
        run_experiment_to_csv(cfg, ss);
        const std::vector<BinSample> parsed = read_samples_csv(ss);
        const std::vector<BinSample> direct = run_experiment(cfg);
        REQUIRE(parsed.size() == direct.size());
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            CHECK(parsed[i].value_a == direct[i].value_a);
            CHECK(parsed[i].value_b == direct[i].value_b);
            CHECK(parsed[i].k == direct[i].k);
        }
    }
    SUBCASE("wrong header") {
        std::stringstream ss("frame,k,basisA,valueA,basisB,valueB\n");
        CHECK_THROWS_WITH_AS(read_samples_csv(ss),
                             doctest::Contains("header"), std::runtime_error);
    }
    SUBCASE("field count") {
        std::stringstream ss(header + "0,1,x,0.5,x\n");
        CHECK_THROWS_WITH_AS(read_samples_csv(ss), doctest::Contains("line 2"),
                             std::runtime_error);
    }
    SUBCASE("bad basis") {
        std::stringstream ss(header + "0,1,x,0.5,x,0.5\n0,2,q,0.5,x,0.5\n");
        CHECK_THROWS_WITH_AS(read_samples_csv(ss), doctest::Contains("line 3"),
                             std::runtime_error);
    }
    SUBCASE("bad number") {
        std::stringstream ss(header + "0,1,x,zero,x,0.5\n");
        CHECK_THROWS_AS(read_samples_csv(ss), std::runtime_error);
        std::stringstream trailing(header + "0,1,x,0.5oops,x,0.5\n");
        CHECK_THROWS_WITH_AS(read_samples_csv(trailing), doctest::Contains("0.5oops"),
                             std::runtime_error);
    }
}

TEST_CASE("plot csv carries dB levels with interval half-widths") {
    const std::vector<BinSample> samples = run_experiment(lossless_6db(200, 6, 77));
    const NullifierReport report = nullifier_variances(samples);

    std::stringstream ss;
    write_plot_csv(ss, report);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "k,varX_db,varP_db,ciX,ciP");
    int rows = 0;
    while (std::getline(ss, line)) {
        ++rows;
        std::stringstream row(line);
        std::string field;
        std::getline(row, field, ',');
        const int k = std::stoi(field);
        const KStats* stats = report.find(k);
        REQUIRE(stats != nullptr);
        std::getline(row, field, ',');
        CHECK(std::stod(field) == doctest::Approx(stats->x.db()).epsilon(1e-5));
        std::getline(row, field, ',');
        CHECK(std::stod(field) == doctest::Approx(stats->p.db()).epsilon(1e-5));
        std::getline(row, field, ',');
        const double half_hi = stats->x.ci_hi_db() - stats->x.db();
        const double half_lo = stats->x.db() - stats->x.ci_lo_db();
        const double ci = std::stod(field);
        CHECK(ci >= std::min(half_lo, half_hi) - 1e-5);
        CHECK(ci <= std::max(half_lo, half_hi) + 1e-5);
    }
    CHECK(rows == 5);
}

TEST_CASE("json reports expose the vacuum reference and the bound") {
    const std::vector<BinSample> samples = run_experiment(lossless_6db(120, 8, 13));
    const NullifierReport report = nullifier_variances(samples);
    const nlohmann::json j = report_to_json(report);
    CHECK(j.at("vacuum_reference") == 1.0);
    CHECK(j.at("mode") == "assume_zero");
    CHECK(j.at("frames") == 120);
    CHECK(j.at("bound_db") == doctest::Approx(kInseparabilityBoundDb));
    CHECK(j.at("per_k").size() == 7);
    CHECK(j.at("per_k")[0].at("k") == 1);
    CHECK(j.at("per_k")[0].at("x").contains("ci"));
    CHECK(j.at("per_k")[0].at("x").contains("ci_db"));

    const nlohmann::json cj = certificate_to_json(vlf_certificate(report));
    CHECK(cj.at("certified_k") == 7);
    CHECK(cj.at("rows").size() == 7);
    CHECK(cj.at("rows")[0].at("cases").size() == 7);
    CHECK(cj.at("rows")[6].at("cases").size() == 5);
    CHECK_FALSE(cj.contains("first_failure"));

    const nlohmann::json failed =
        certificate_to_json(vlf_certificate(std::vector<double>(3, 1.0),
                                            std::vector<double>(3, 1.0)));
    CHECK(failed.at("first_failure").is_string());
}

TEST_CASE("crossing finder locates the smoothed -3 dB transition") {
    // Hand-built report: variances ramp linearly from 0.25 to 1.25 over 600
    // indices; the 0.5 bound falls a quarter of the way in.
    NullifierReport report;
    report.mode = MeanMode::AssumeZero;
    report.frames_seen = 1000;
    for (int k = 1; k <= 600; ++k) {
        KStats stats;
        stats.k = k;
        const double var = 0.25 + (k - 1) / 599.0;
        stats.x = VarianceEstimate{1000, var, var * 0.9, var * 1.1};
        stats.p = stats.x;
        report.per_k.push_back(stats);
    }
    const std::optional<int> crossing = find_crossing_k(report, kInseparabilityBoundDb, 51);
    REQUIRE(crossing.has_value());
    CHECK(*crossing == doctest::Approx(151).epsilon(0.04));

    SUBCASE("flat squeezed data never crosses") {
        NullifierReport flat;
        for (int k = 1; k <= 100; ++k) {
            KStats stats;
            stats.k = k;
            stats.x = VarianceEstimate{1000, 0.25, 0.2, 0.3};
            stats.p = stats.x;
            flat.per_k.push_back(stats);
        }
        CHECK_FALSE(find_crossing_k(flat).has_value());
    }
    SUBCASE("vacuum data crosses immediately") {
        NullifierReport vac;
        for (int k = 1; k <= 100; ++k) {
            KStats stats;
            stats.k = k;
            stats.x = VarianceEstimate{1000, 1.0, 0.9, 1.1};
            stats.p = stats.x;
            vac.per_k.push_back(stats);
        }
        CHECK(find_crossing_k(vac) == 1);
    }
}

TEST_CASE("drift calibration lands the crossing near the requested index") {
    ExperimentConfig base = lossless_6db(1, 2, 921);
    const int target = 300;
    const DriftCalibration cal = calibrate_drift_rate(base, target, 200);
    CHECK(cal.rate > 0.0);
    CHECK(cal.probe_crossing_k > 0);
    CHECK(cal.crossing_k > static_cast<int>(0.7 * target));
    CHECK(cal.crossing_k < static_cast<int>(1.3 * target));

    // Wiener drift: crossing index scales as 1/rate^2, so half the rate must
    // push the crossing out by about 4x.
    ExperimentConfig verify = base;
    verify.phase_drift_rate = cal.rate * 0.5;
    verify.frames = 400;
    verify.bins_per_frame = 4 * target + 600;
    verify.basis_schedule = BasisSchedule::AlternateByFrameParity;
    const std::optional<int> slow =
        find_crossing_k(nullifier_variances(run_experiment(verify)));
    REQUIRE(slow.has_value());
    CHECK(*slow > 2.5 * cal.crossing_k);
    CHECK(*slow < 6.0 * cal.crossing_k);
}

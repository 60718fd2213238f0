#include <doctest.h>

#include "hifsense/fault_models.hpp"
#include "hifsense/signal_features.hpp"
#include "test_helpers.hpp"

#include <cmath>
#include <numbers>

using namespace hifsense;
using hifsense::testing::rms_of;

namespace {

constexpr double kRate = 27700.0;
constexpr double kPi = std::numbers::pi;

FaultSpec single_stage(HifStageKind kind, double duration, double peak = 0.5,
                       ArcParams arc = {}, double ignition = 0.7) {
    FaultSpec spec;
    spec.kind = FaultKind::Hif;
    spec.phase = Phase::A;
    spec.node_index = 1;
    spec.onset_s = 0.0;
    HifStageSpec st;
    st.kind = kind;
    st.start_s = 0.0;
    st.end_s = duration;
    st.peak_a = peak;
    st.arc = arc;
    st.ignition_probability = ignition;
    spec.schedule.stages = {st};
    return spec;
}

AnalysisWindow window_of(const WaveformRecord& rec, const std::string& channel, int cycles,
                         double start_cycle) {
    auto windows = make_windows(rec, channel, cycles, 0.0, 50.0);
    const auto skip = static_cast<std::size_t>(start_cycle / cycles);
    REQUIRE(windows.size() > skip);
    return windows[skip];
}

} // namespace

TEST_SUITE("fault_models") {

TEST_CASE("lif limiting resistance from target current") {
    SourceSpec src;
    CHECK(lif_limiting_resistance(46.0, src) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(lif_limiting_resistance(26.0, src) == doctest::Approx(8.85).epsilon(1e-3));
    CHECK(lif_limiting_resistance(26.0, src) == doctest::Approx(230.0 / 26.0).epsilon(1e-12));
    CHECK(lif_limiting_resistance(230.0, src) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(lif_limiting_resistance(0.0, src));
    CHECK_THROWS(lif_limiting_resistance(-5.0, src));
    CHECK_THROWS(lif_limiting_resistance(5000.0, src));
}

TEST_CASE("lif rendering is a sinusoid at the phasor value and seed-invariant") {
    FaultSpec spec;
    spec.kind = FaultKind::Lif;
    spec.phase = Phase::A;
    spec.onset_s = 0.0;
    spec.limiting_resistance_ohm = 5.0;
    SourceSpec src;
    const auto a = render_fault_current(spec, src, 1.0, kRate, 1);
    const auto b = render_fault_current(spec, src, 1.0, kRate, 999);
    CHECK(a == b);
    CHECK(rms_of(a.samples("i_fault")) == doctest::Approx(46.0).epsilon(1e-6));
}

TEST_CASE("empty stage schedule renders all-zero current") {
    FaultSpec spec;
    spec.kind = FaultKind::Hif;
    spec.phase = Phase::A;
    const auto rec = render_fault_current(spec, SourceSpec{}, 0.2, kRate, 7);
    for (double v : rec.samples("i_fault")) CHECK(v == 0.0);
}

TEST_CASE("sawtooth stage: harmonics proportional to 1/k and low current") {
    const auto spec = single_stage(HifStageKind::InitialSawtooth, 1.0, 0.5);
    const auto rec = render_fault_current(spec, SourceSpec{}, 1.0, kRate, 3);
    CHECK(rms_of(rec.samples("i_fault")) < 1.0); // far below a 10 A load current

    const auto w = window_of(rec, "i_fault", 10, 20);
    const auto spec13 = harmonic_spectrum(w, 13);
    for (int k = 1; k <= 7; ++k) {
        const double expected = 2.0 * 0.5 / (kPi * k);
        CHECK(spec13.harmonic(k) == doctest::Approx(expected).epsilon(0.02));
    }
    CHECK(std::abs(spec13.dc) < 0.01);
}

TEST_CASE("sizzling stage: rectified-sine DC and second harmonic, never negative") {
    const double peak = 2.0;
    const auto spec = single_stage(HifStageKind::Sizzling, 1.0, peak);
    const auto rec = render_fault_current(spec, SourceSpec{}, 1.0, kRate, 3);
    for (double v : rec.samples("i_fault")) CHECK(v >= 0.0);

    const auto w = window_of(rec, "i_fault", 10, 20);
    const auto spec13 = harmonic_spectrum(w, 13);
    CHECK(spec13.dc == doctest::Approx(2.0 * peak / kPi).epsilon(0.01));
    CHECK(spec13.harmonic(2) == doctest::Approx(4.0 * peak / (3.0 * kPi)).epsilon(0.01));
    // Odd harmonics vanish for a full-wave rectified sine.
    CHECK(spec13.harmonic(1) < 0.01 * peak);
    CHECK(spec13.harmonic(3) < 0.01 * peak);
}

TEST_CASE("negative-half arcing conducts only on the negative half cycle") {
    ArcParams arc;
    const auto spec = single_stage(HifStageKind::NegativeHalfArc, 1.0, 0.5, arc, 0.7);
    const auto rec = render_fault_current(spec, SourceSpec{}, 1.0, kRate, 5);
    const auto i = rec.samples("i_fault");
    const auto v = rec.samples("v_drive");
    for (std::size_t k = 0; k < i.size(); ++k) {
        if (v[k] > 0.0) CHECK(std::abs(i[k]) <= 1e-3);
    }
    const auto w = window_of(rec, "i_fault", 10, 20);
    CHECK(extract_features(w).half_cycle_asymmetry > 0.9);
}

TEST_CASE("ignition probability zero means leakage only") {
    const auto spec = single_stage(HifStageKind::NegativeHalfArc, 0.5, 0.5, ArcParams{}, 0.0);
    const auto rec = render_fault_current(spec, SourceSpec{}, 0.5, kRate, 5);
    for (double x : rec.samples("i_fault")) CHECK(std::abs(x) <= 1e-3);
}

TEST_CASE("stable arc law is odd-symmetric with symmetric parameters") {
    ArcParams arc;
    arc.threshold_jitter = 0.0;
    auto spec = single_stage(HifStageKind::StableArc, 1.0, 0.5, arc);
    FaultBranch branch(spec, 50.0, 42);
    for (double v : {10.0, 60.0, 85.0, 120.0, 250.0, 324.0}) {
        CHECK(branch.current(-v, 0.5) == doctest::Approx(-branch.current(v, 0.5)).epsilon(1e-12));
    }
    // Flat center: leakage only below the threshold.
    CHECK(branch.current(79.0, 0.5) == doctest::Approx(79.0 * FaultBranch::leakage_s));
    // Above threshold: (v - V)/R plus the parallel leakage.
    CHECK(branch.current(120.0, 0.5) ==
          doctest::Approx((120.0 - 80.0) / 40.0 + 120.0 * FaultBranch::leakage_s));
}

TEST_CASE("stable arc rendering: distorted but symmetric") {
    const auto spec = single_stage(HifStageKind::StableArc, 1.0, 0.5, ArcParams{});
    const auto rec = render_fault_current(spec, SourceSpec{}, 1.0, kRate, 11);
    const auto w = window_of(rec, "i_fault", 10, 20);
    const auto f = extract_features(w);
    CHECK(f.thd > 0.05);
    CHECK(f.half_cycle_asymmetry < 0.05);
    CHECK(std::abs(f.dc) < 0.02 * f.fundamental);

    // v-i trace is bounded and flat through the origin region.
    const auto i = rec.samples("i_fault");
    const auto v = rec.samples("v_drive");
    for (std::size_t k = 0; k < i.size(); ++k) {
        CHECK(std::abs(i[k]) < 10.0);
        if (std::abs(v[k]) < 0.5 * 80.0) CHECK(std::abs(i[k]) <= 1e-3);
    }
}

TEST_CASE("determinism: same seed bit-identical, stochastic stages differ across seeds") {
    ArcParams arc;
    const auto spec = single_stage(HifStageKind::NegativeHalfArc, 0.5, 0.5, arc, 0.5);
    const auto a = render_fault_current(spec, SourceSpec{}, 0.5, kRate, 123);
    const auto b = render_fault_current(spec, SourceSpec{}, 0.5, kRate, 123);
    const auto c = render_fault_current(spec, SourceSpec{}, 0.5, kRate, 124);
    CHECK(a == b);
    CHECK(a.samples("i_fault") != c.samples("i_fault"));
}

TEST_CASE("schedule validation rejects bad intervals") {
    HifStageSchedule sched;
    HifStageSpec a;
    a.kind = HifStageKind::Sizzling;
    a.peak_a = 1.0;
    a.start_s = 0.0;
    a.end_s = 0.5;
    HifStageSpec b = a;
    b.start_s = 0.4; // overlaps
    b.end_s = 0.9;
    sched.stages = {a, b};
    CHECK_THROWS(sched.validate(1.0));
    sched.stages = {a};
    CHECK_NOTHROW(sched.validate(1.0));
    sched.stages[0].end_s = 2.0; // outside duration
    CHECK_THROWS(sched.validate(1.0));
    sched.stages[0].end_s = 0.5;
    sched.stages[0].peak_a = -1.0;
    CHECK_THROWS(sched.validate(1.0));
}

TEST_CASE("arc parameter validation") {
    ArcParams a;
    CHECK_NOTHROW(a.validate());
    a.threshold_jitter = 0.9;
    CHECK_THROWS(a.validate());
    a.threshold_jitter = 0.1;
    a.positive_resistance_ohm = 0.0;
    CHECK_THROWS(a.validate());
}

TEST_CASE("stage names round-trip") {
    for (auto kind : {HifStageKind::InitialSawtooth, HifStageKind::Sizzling,
                      HifStageKind::NegativeHalfArc, HifStageKind::StableArc}) {
        CHECK(parse_stage_name(stage_name(kind)) == kind);
    }
    CHECK_THROWS(parse_stage_name("flaming"));
}

} // TEST_SUITE

#include <doctest.h>

#include "hifsense/feeder_sim.hpp"
#include "test_helpers.hpp"

#include <cmath>
#include <random>

using namespace hifsense;
using hifsense::testing::rms_of;

namespace {

constexpr double kRate = 27700.0;

LineParameters default_params() {
    return line_parameters(ConductorGeometry::default_flat(), 50.0, 100.0);
}

SimConfig base_config(double length_m = 600.0, double duration = 0.3) {
    SimConfig cfg;
    cfg.feeder = build_feeder(default_params(), length_m, 100.0);
    cfg.duration_s = duration;
    cfg.sample_interval_s = 1.0 / kRate;
    return cfg;
}

double tail_rms(const WaveformRecord& rec, const std::string& channel, double cycles = 2.0) {
    const auto x = rec.samples(channel);
    const auto span = static_cast<std::size_t>(cycles * kRate / 50.0);
    return rms_of(x, x.size() - span);
}

} // namespace

TEST_SUITE("feeder_sim") {

TEST_CASE("no loads and no fault: zero currents on a capacitance-free feeder") {
    auto params = default_params();
    params.shunt_capacitance_nf_per_km.setZero();
    SimConfig cfg;
    cfg.feeder = build_feeder(params, 600.0, 100.0);
    cfg.duration_s = 0.2;
    cfg.sample_interval_s = 1.0 / kRate;
    const auto rec = simulate(cfg, 0);
    for (const auto* name : {"i_a", "i_b", "i_c", "i_n", "i_fault"}) {
        for (double v : rec.samples(name)) CHECK(std::abs(v) <= 1e-12);
    }
}

TEST_CASE("no loads with line capacitance: only the small charging current flows") {
    auto cfg = base_config(600.0, 0.2);
    const auto rec = simulate(cfg, 0);
    for (const auto* name : {"i_a", "i_b", "i_c"}) {
        CHECK(tail_rms(rec, name) < 2e-3); // nF-scale shunt at 230 V
        CHECK(tail_rms(rec, name) > 0.0);
    }
}

TEST_CASE("balanced resistive load matches the phasor oracle within 0.1%") {
    auto cfg = base_config();
    for (int p = 0; p < 3; ++p) {
        cfg.loads.per_phase[static_cast<std::size_t>(p)].push_back({10.0, 0.0, 0.0, std::nullopt});
    }
    const auto rec = simulate(cfg, 0);
    const auto phasor = steady_state_phasor(cfg);
    for (const auto* name : {"i_a", "i_b", "i_c"}) {
        CHECK(tail_rms(rec, name) == doctest::Approx(phasor.rms(name)).epsilon(1e-3));
    }
    // Balanced load: neutral carries only the capacitive imbalance.
    CHECK(tail_rms(rec, "i_n") < 0.01 * tail_rms(rec, "i_a"));
}

TEST_CASE("steady state agrees with the phasor oracle on 10 random linear configs") {
    std::mt19937_64 rng(321);
    std::uniform_real_distribution<double> res(5.0, 200.0);
    std::uniform_real_distribution<double> ind(0.0, 0.03);
    std::uniform_int_distribution<int> len(1, 6);
    std::uniform_int_distribution<int> has_fault(0, 1);

    for (int trial = 0; trial < 10; ++trial) {
        auto cfg = base_config(100.0 * len(rng), 0.3);
        for (int p = 0; p < 3; ++p) {
            cfg.loads.per_phase[static_cast<std::size_t>(p)].push_back(
                {res(rng), ind(rng), 0.0, std::nullopt});
        }
        if (has_fault(rng) == 1) {
            FaultSpec fault;
            fault.kind = FaultKind::Lif;
            fault.phase = Phase::A;
            fault.node_index = static_cast<int>(cfg.feeder.sections.size());
            fault.onset_s = 0.0;
            fault.limiting_resistance_ohm = res(rng);
            cfg.fault = fault;
        }
        const auto rec = simulate(cfg, 0);
        const auto phasor = steady_state_phasor(cfg);
        for (const auto* name : {"i_a", "i_b", "i_c", "i_n", "i_fault"}) {
            const double expected = phasor.rms(name);
            const double actual = tail_rms(rec, name);
            if (expected > 1e-3) {
                CHECK(actual == doctest::Approx(expected).epsilon(1e-3));
            } else {
                CHECK(actual < 1e-2);
            }
        }
    }
}

TEST_CASE("single 23 ohm load on a near-zero feeder draws 10 A at the source angle") {
    auto params = default_params();
    params.series_impedance_ohm_per_km *= 1e-9;
    params.shunt_capacitance_nf_per_km *= 1e-9;
    SimConfig cfg;
    cfg.feeder = build_feeder(params, 100.0, 100.0);
    cfg.duration_s = 0.1;
    cfg.sample_interval_s = 1.0 / kRate;
    cfg.loads.per_phase[0].push_back({23.0, 0.0, 0.0, std::nullopt});
    const auto phasor = steady_state_phasor(cfg);
    CHECK(phasor.rms("i_a") == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(std::abs(std::arg(phasor.at("i_a"))) < 1e-6);
}

TEST_CASE("adding series feeder impedance reduces the load current") {
    auto tiny = default_params();
    tiny.series_impedance_ohm_per_km *= 1e-9;
    SimConfig small;
    small.feeder = build_feeder(tiny, 600.0, 100.0);
    small.duration_s = 0.1;
    small.sample_interval_s = 1.0 / kRate;
    small.loads.per_phase[0].push_back({23.0, 0.0, 0.0, std::nullopt});

    auto real = small;
    real.feeder = build_feeder(default_params(), 600.0, 100.0);
    CHECK(steady_state_phasor(real).rms("i_a") < steady_state_phasor(small).rms("i_a"));
}

TEST_CASE("load switching steps the faulted phase only") {
    auto cfg = base_config(600.0, 0.4);
    cfg.loads.per_phase[0].push_back({23.0, 1e-3, 0.0, std::nullopt});
    cfg.loads.per_phase[1].push_back({23.0, 1e-3, 0.0, std::nullopt});
    cfg.loads.per_phase[1].push_back({23.0, 1e-3, 0.2, std::nullopt}); // B picks up at 0.2 s
    cfg.loads.per_phase[2].push_back({529.0, 50e-3, 0.0, std::nullopt});
    const auto rec = simulate(cfg, 0);

    auto rms_between = [&](const std::string& ch, double t0, double t1) {
        const auto x = rec.samples(ch);
        const auto a = static_cast<std::size_t>(t0 * kRate);
        const auto b = static_cast<std::size_t>(t1 * kRate);
        double s = 0.0;
        for (std::size_t i = a; i < b; ++i) s += x[i] * x[i];
        return std::sqrt(s / static_cast<double>(b - a));
    };
    const double b_before = rms_between("i_b", 0.14, 0.18);
    const double b_after = rms_between("i_b", 0.3, 0.38);
    CHECK(b_after > 1.8 * b_before);
    for (const auto* other : {"i_a", "i_c"}) {
        const double before = rms_between(other, 0.14, 0.18);
        const double after = rms_between(other, 0.3, 0.38);
        CHECK(std::abs(after - before) < 0.02 * before);
    }
}

TEST_CASE("kirchhoff conservation holds at every node for an arcing fault run") {
    auto cfg = base_config(600.0, 0.4);
    cfg.loads.per_phase[0].push_back(LoadSpec::heater());
    cfg.loads.per_phase[1].push_back(LoadSpec::heater());
    cfg.loads.per_phase[2].push_back(LoadSpec::light());
    FaultSpec fault;
    fault.kind = FaultKind::Hif;
    fault.phase = Phase::B;
    fault.node_index = 6;
    fault.onset_s = 0.1;
    HifStageSpec neg;
    neg.kind = HifStageKind::NegativeHalfArc;
    neg.start_s = 0.1;
    neg.end_s = 0.25;
    HifStageSpec stable;
    stable.kind = HifStageKind::StableArc;
    stable.start_s = 0.25;
    stable.end_s = 0.4;
    fault.schedule.stages = {neg, stable};
    cfg.fault = fault;

    SimDiagnostics diag;
    const auto rec = simulate(cfg, 42, diag);
    CHECK(diag.max_kcl_residual_rel <= 1e-9);
    CHECK(diag.max_newton_iterations <= 10);
    CHECK(diag.step_halvings == 0);
    CHECK(tail_rms(rec, "i_fault") > 0.5); // the arc actually conducts
}

TEST_CASE("determinism: identical config and seed give bit-identical records") {
    auto cfg = base_config(300.0, 0.25);
    cfg.loads.per_phase[0].push_back(LoadSpec::heater());
    FaultSpec fault;
    fault.kind = FaultKind::Hif;
    fault.phase = Phase::A;
    fault.node_index = 3;
    fault.onset_s = 0.05;
    HifStageSpec neg;
    neg.kind = HifStageKind::NegativeHalfArc;
    neg.start_s = 0.05;
    neg.end_s = 0.25;
    fault.schedule.stages = {neg};
    cfg.fault = fault;

    const auto a = simulate(cfg, 7);
    const auto b = simulate(cfg, 7);
    CHECK(a == b);
}

TEST_CASE("halving the integration step changes steady-state RMS by < 0.05%") {
    auto cfg = base_config(600.0, 0.3);
    cfg.loads.per_phase[0].push_back(LoadSpec::heater());
    cfg.loads.per_phase[1].push_back({40.0, 5e-3, 0.0, std::nullopt});
    cfg.loads.per_phase[2].push_back(LoadSpec::light());
    const auto coarse = simulate(cfg, 0);
    auto fine_cfg = cfg;
    fine_cfg.sample_interval_s = cfg.sample_interval_s / 2.0;
    const auto fine = simulate(fine_cfg, 0);
    for (const auto* name : {"i_a", "i_b", "i_c"}) {
        const auto x = coarse.samples(name);
        const auto y = fine.samples(name);
        const auto span_x = static_cast<std::size_t>(2.0 * kRate / 50.0);
        const auto span_y = 2 * span_x;
        const double rx = rms_of(x, x.size() - span_x);
        const double ry = rms_of(y, y.size() - span_y);
        CHECK(std::abs(rx - ry) / rx < 5e-4);
    }
}

TEST_CASE("phasor solver rejects nonlinear fault configs") {
    auto cfg = base_config();
    FaultSpec fault;
    fault.kind = FaultKind::Hif;
    fault.phase = Phase::A;
    fault.node_index = 1;
    HifStageSpec st;
    st.kind = HifStageKind::StableArc;
    st.start_s = 0.0;
    st.end_s = 0.1;
    fault.schedule.stages = {st};
    cfg.fault = fault;
    CHECK_THROWS_WITH_AS(static_cast<void>(steady_state_phasor(cfg)),
                         doctest::Contains("phasor"), std::invalid_argument);
}

TEST_CASE("singular section impedance is reported") {
    SimConfig cfg;
    PiSection sec;
    sec.length_m = 100.0;
    sec.series_impedance_ohm.setZero();
    sec.end_capacitance_f.setZero();
    cfg.feeder.sections = {sec};
    cfg.feeder.total_length_m = 100.0;
    cfg.feeder.step_m = 100.0;
    cfg.duration_s = 0.1;
    cfg.sample_interval_s = 1.0 / kRate;
    CHECK_THROWS_WITH_AS(static_cast<void>(simulate(cfg, 0)), doctest::Contains("singular"),
                         std::runtime_error);
}

TEST_CASE("config validation rejects bad sampling and fault nodes") {
    auto cfg = base_config();
    cfg.sample_interval_s = 1.0 / 500.0; // under 20 samples per cycle
    CHECK_THROWS(cfg.validate());

    cfg = base_config();
    FaultSpec fault;
    fault.kind = FaultKind::Lif;
    fault.node_index = 99;
    fault.limiting_resistance_ohm = 5.0;
    cfg.fault = fault;
    CHECK_THROWS(cfg.validate());

    cfg = base_config();
    LoadElement bad{0.0, 0.0, 0.0, std::nullopt};
    cfg.loads.per_phase[0].push_back(bad);
    CHECK_THROWS(cfg.validate());
}

} // TEST_SUITE

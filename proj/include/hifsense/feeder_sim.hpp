#pragma once

#include "hifsense/fault_models.hpp"
#include "hifsense/line_network.hpp"
#include "hifsense/source_spec.hpp"
#include "hifsense/waveform.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hifsense {

/// One switchable series R-L load element between a phase conductor and the
/// neutral at the feeder end.
struct LoadElement {
    double resistance_ohm = 0.0;
    double inductance_h = 0.0;
    double on_s = 0.0;
    std::optional<double> off_s;

    void validate() const;
    [[nodiscard]] bool closed_at(double t) const {
        return t >= on_s && (!off_s || t < *off_s);
    }
};

struct LoadSpec {
    std::array<std::vector<LoadElement>, 3> per_phase; // A, B, C

    void validate() const;
    /// Heater preset: 23 ohm, 1 mH (about 10 A at 230 V).
    static LoadElement heater();
    /// Outdoor light preset: 529 ohm, 50 mH (about 0.43 A).
    static LoadElement light();
};

struct SimConfig {
    SourceSpec source;
    FeederTopology feeder;
    LoadSpec loads;
    std::optional<FaultSpec> fault;
    double duration_s = 1.0;
    double sample_interval_s = 1.0 / 27700.0;

    void validate() const;
};

struct SimDiagnostics {
    double max_kcl_residual_rel = 0.0; // worst node residual / largest branch current
    int max_newton_iterations = 0;
    int step_halvings = 0;
    std::size_t steps = 0;
};

/// Time-domain nodal simulation (trapezoidal companion models) of the
/// source + pi-chain + loads + fault branch. Output channels:
///   i_a, i_b, i_c  source-end conductor currents (A)
///   i_n            source-end neutral conductor current (A)
///   i_fault        fault branch current (A; zero without a fault)
///   v_fault        faulted-node voltage (V; feeder-end phase A without a fault)
/// Deterministic for a given (config, seed).
WaveformRecord simulate(const SimConfig& config, std::uint64_t seed);
WaveformRecord simulate(const SimConfig& config, std::uint64_t seed, SimDiagnostics& diag);

/// Exact complex steady-state solution of the same network at the system
/// frequency with every load in its end-of-run switch state. Rejects
/// nonlinear (HIF) fault configs. Channel order matches simulate().
struct PhasorSolution {
    std::vector<std::string> channel_names;
    std::vector<std::complex<double>> phasors; // peak-value phasors (RMS * sqrt 2)

    [[nodiscard]] std::complex<double> at(const std::string& name) const;
    [[nodiscard]] double rms(const std::string& name) const;
};

PhasorSolution steady_state_phasor(const SimConfig& config);

} // namespace hifsense

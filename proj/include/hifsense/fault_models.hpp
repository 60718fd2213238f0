#pragma once

#include "hifsense/source_spec.hpp"
#include "hifsense/waveform.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace hifsense {

enum class FaultKind { Lif, Hif };

enum class Phase : int { A = 0, B = 1, C = 2 };

char phase_letter(Phase p);
Phase parse_phase(char c);

/// Two-threshold piecewise-linear arc law: no conduction while |v| is below
/// the polarity's threshold, then (|v| - V_thr)/R_arc with the sign of v.
/// Thresholds are re-jittered every half-cycle.
struct ArcParams {
    double positive_threshold_v = 80.0;
    double negative_threshold_v = 80.0;
    double positive_resistance_ohm = 40.0;
    double negative_resistance_ohm = 40.0;
    double threshold_jitter = 0.1; // fraction of threshold, uniform per half-cycle

    void validate() const;
};

enum class HifStageKind {
    InitialSawtooth,
    Sizzling,
    NegativeHalfArc,
    StableArc,
};

/// Stable string names used in configs and provenance ids.
const char* stage_name(HifStageKind kind);
HifStageKind parse_stage_name(const std::string& name);

struct HifStageSpec {
    HifStageKind kind = HifStageKind::InitialSawtooth;
    double start_s = 0.0;
    double end_s = 0.0;
    double peak_a = 0.5;                // sawtooth (default 0.5) and sizzling (default 2.0)
    ArcParams arc;                      // arcing stages
    double ignition_probability = 0.7;  // NegativeHalfArc only

    void validate() const;
};

/// Ordered, non-overlapping stage intervals.
struct HifStageSchedule {
    std::vector<HifStageSpec> stages;

    void validate(double sim_duration_s) const;
    [[nodiscard]] const HifStageSpec* active_at(double t) const;
};

struct FaultSpec {
    FaultKind kind = FaultKind::Lif;
    Phase phase = Phase::A;
    int node_index = 1;             // feeder node the fault branch hangs off
    double onset_s = 0.0;           // LIF switch-in time; informational for HIF
    double limiting_resistance_ohm = 5.0; // LIF
    HifStageSchedule schedule;      // HIF

    void validate(double sim_duration_s, std::size_t feeder_node_count) const;
};

/// Limiting resistance that yields the target RMS fault current against the
/// ideal source with zero feeder impedance; any real feeder impedance then
/// keeps the realized current at or below the target.
double lif_limiting_resistance(double target_rms_a, const SourceSpec& source);

/// Per-run fault branch state machine. The owning solver feeds it the
/// accepted node voltage each step so zero crossings, per-half-cycle
/// threshold jitter and ignition draws stay synchronized to the waveform.
class FaultBranch {
public:
    FaultBranch(const FaultSpec& spec, double fundamental_hz, std::uint64_t seed);

    /// Records the faulted-node voltage sample (t, v). Crossings between
    /// consecutive observed samples trigger the per-half-cycle draws.
    void observe(double t, double v);

    /// Branch current for candidate voltage v at time t.
    [[nodiscard]] double current(double v, double t) const;
    /// di/dv for the Newton linearization at candidate voltage v.
    [[nodiscard]] double conductance(double v, double t) const;
    /// True when the step needs an inner Newton solve (arcing stages only;
    /// the sawtooth and sizzling stages inject voltage-independent current).
    [[nodiscard]] bool needs_newton(double t) const;
    /// True when the branch conducts through the LIF resistor at time t.
    [[nodiscard]] bool lif_active(double t) const;

    [[nodiscard]] const FaultSpec& spec() const { return spec_; }

    /// Leakage conductance of arc stages outside conduction (keeps the
    /// off-state current within the documented 1 mA bound).
    static constexpr double leakage_s = 1e-6;

private:
    void on_half_cycle(bool to_positive);

    FaultSpec spec_;
    double fundamental_hz_;
    double period_s_;
    std::mt19937_64 rng_;

    double last_v_ = 0.0;
    double last_t_ = 0.0;
    bool have_prev_ = false;
    double last_up_cross_s_ = 0.0; // most recent negative-to-positive crossing
    double jitter_pos_ = 0.0;      // current half-cycle threshold jitter draws
    double jitter_neg_ = 0.0;
    double ignition_u_ = 0.0;      // uniform draw tested against the stage probability
};

/// Spec-level evaluation hook: branch current given the stage state.
double fault_branch_current(const FaultBranch& branch, double node_voltage_v, double t);

/// Renders the fault branch against the ideal source waveform without the
/// feeder: the fast path for stage-signature studies and dataset generation.
/// Channels: "i_fault" (A) and the driving voltage "v_drive" (V).
WaveformRecord render_fault_current(const FaultSpec& spec, const SourceSpec& source,
                                    double duration_s, double sample_rate_hz,
                                    std::uint64_t seed);

} // namespace hifsense

#include "hifsense/fault_models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hifsense {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
} // namespace

double SourceSpec::phase_angle(int phase_index) const {
    switch (phase_index) {
    case 0: return 0.0;
    case 1: return -kTwoPi / 3.0;
    case 2: return kTwoPi / 3.0;
    default: throw std::out_of_range("SourceSpec: phase index out of range");
    }
}

double SourceSpec::instantaneous(int phase_index, double t) const {
    return std::sqrt(2.0) * phase_voltage_v *
           std::sin(kTwoPi * frequency_hz * t + phase_angle(phase_index));
}

char phase_letter(Phase p) {
    return static_cast<char>('A' + static_cast<int>(p));
}

Phase parse_phase(char c) {
    if (c < 'A' || c > 'C') throw std::invalid_argument("phase must be A, B or C");
    return static_cast<Phase>(c - 'A');
}

void ArcParams::validate() const {
    if (positive_threshold_v < 0.0 || negative_threshold_v < 0.0) {
        throw std::invalid_argument("ArcParams: thresholds must be >= 0");
    }
    if (positive_resistance_ohm <= 0.0 || negative_resistance_ohm <= 0.0) {
        throw std::invalid_argument("ArcParams: arc resistances must be > 0");
    }
    if (threshold_jitter < 0.0 || threshold_jitter > 0.5) {
        throw std::invalid_argument("ArcParams: jitter must be in [0, 0.5]");
    }
}

const char* stage_name(HifStageKind kind) {
    switch (kind) {
    case HifStageKind::InitialSawtooth: return "initial_sawtooth";
    case HifStageKind::Sizzling: return "sizzling";
    case HifStageKind::NegativeHalfArc: return "negative_half_arc";
    case HifStageKind::StableArc: return "stable_arc";
    }
    return "unknown";
}

HifStageKind parse_stage_name(const std::string& name) {
    if (name == "initial_sawtooth") return HifStageKind::InitialSawtooth;
    if (name == "sizzling") return HifStageKind::Sizzling;
    if (name == "negative_half_arc") return HifStageKind::NegativeHalfArc;
    if (name == "stable_arc") return HifStageKind::StableArc;
    throw std::invalid_argument("unknown HIF stage '" + name + "'");
}

void HifStageSpec::validate() const {
    if (end_s <= start_s) throw std::invalid_argument("HifStageSpec: end must be after start");
    switch (kind) {
    case HifStageKind::InitialSawtooth:
    case HifStageKind::Sizzling:
        if (peak_a <= 0.0) throw std::invalid_argument("HifStageSpec: peak must be > 0");
        break;
    case HifStageKind::NegativeHalfArc:
        if (ignition_probability < 0.0 || ignition_probability > 1.0) {
            throw std::invalid_argument("HifStageSpec: ignition probability must be in [0, 1]");
        }
        arc.validate();
        break;
    case HifStageKind::StableArc:
        arc.validate();
        break;
    }
}

void HifStageSchedule::validate(double sim_duration_s) const {
    double prev_end = 0.0;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        stages[i].validate();
        if (stages[i].start_s < 0.0 || stages[i].end_s > sim_duration_s) {
            throw std::invalid_argument("HifStageSchedule: stage outside sim duration");
        }
        if (i > 0 && stages[i].start_s < prev_end) {
            throw std::invalid_argument("HifStageSchedule: stages must be ordered and non-overlapping");
        }
        prev_end = stages[i].end_s;
    }
}

const HifStageSpec* HifStageSchedule::active_at(double t) const {
    for (const auto& s : stages) {
        if (t >= s.start_s && t < s.end_s) return &s;
    }
    return nullptr;
}

void FaultSpec::validate(double sim_duration_s, std::size_t feeder_node_count) const {
    if (onset_s < 0.0 || onset_s > sim_duration_s) {
        throw std::invalid_argument("FaultSpec: onset outside sim duration");
    }
    if (kind == FaultKind::Lif) {
        if (limiting_resistance_ohm <= 0.0) {
            throw std::invalid_argument("FaultSpec: LIF limiting resistance must be > 0");
        }
    } else {
        schedule.validate(sim_duration_s);
    }
    if (feeder_node_count > 0) {
        if (node_index < 1 || static_cast<std::size_t>(node_index) >= feeder_node_count) {
            throw std::invalid_argument("FaultSpec: node index does not name a feeder node");
        }
    }
}

double lif_limiting_resistance(double target_rms_a, const SourceSpec& source) {
    source.validate();
    if (target_rms_a <= 0.0) {
        throw std::invalid_argument("lif_limiting_resistance: target current must be > 0");
    }
    if (target_rms_a > source.phase_voltage_v / 0.1) {
        throw std::invalid_argument("lif_limiting_resistance: target exceeds the 0.1 ohm bound");
    }
    return source.phase_voltage_v / target_rms_a;
}

FaultBranch::FaultBranch(const FaultSpec& spec, double fundamental_hz, std::uint64_t seed)
    : spec_(spec), fundamental_hz_(fundamental_hz), period_s_(1.0 / fundamental_hz),
      rng_(seed) {
    if (fundamental_hz <= 0.0) {
        throw std::invalid_argument("FaultBranch: fundamental must be > 0");
    }
    on_half_cycle(true);
}

void FaultBranch::on_half_cycle(bool to_positive) {
    std::uniform_real_distribution<double> centered(-1.0, 1.0);
    jitter_pos_ = centered(rng_);
    jitter_neg_ = centered(rng_);
    if (!to_positive) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        ignition_u_ = unit(rng_);
    }
}

void FaultBranch::observe(double t, double v) {
    if (have_prev_) {
        const bool up = last_v_ <= 0.0 && v > 0.0;
        const bool down = last_v_ >= 0.0 && v < 0.0;
        if (up || down) {
            double tx = last_t_;
            if (v != last_v_) {
                tx = last_t_ + (0.0 - last_v_) * (t - last_t_) / (v - last_v_);
            }
            if (up) last_up_cross_s_ = tx;
            on_half_cycle(up);
        }
    }
    last_v_ = v;
    last_t_ = t;
    have_prev_ = true;
}

double FaultBranch::current(double v, double t) const {
    if (spec_.kind == FaultKind::Lif) {
        return t >= spec_.onset_s ? v / spec_.limiting_resistance_ohm : 0.0;
    }
    const HifStageSpec* st = spec_.schedule.active_at(t);
    if (st == nullptr) return 0.0;
    switch (st->kind) {
    case HifStageKind::InitialSawtooth: {
        // Full-cycle ramp -peak .. +peak locked to the voltage up-crossing.
        double frac = (t - last_up_cross_s_) / period_s_;
        frac -= std::floor(frac);
        return st->peak_a * (2.0 * frac - 1.0);
    }
    case HifStageKind::Sizzling:
        return st->peak_a *
               std::abs(std::sin(kTwoPi * fundamental_hz_ * (t - last_up_cross_s_)));
    case HifStageKind::NegativeHalfArc: {
        // Leakage in parallel with the arc keeps the law continuous at the
        // threshold, which the inner Newton solve relies on.
        const double vn =
            st->arc.negative_threshold_v * (1.0 + st->arc.threshold_jitter * jitter_neg_);
        double i = leakage_s * v;
        if (ignition_u_ < st->ignition_probability && v < -vn) {
            i += (v + vn) / st->arc.negative_resistance_ohm;
        }
        return i;
    }
    case HifStageKind::StableArc: {
        const double vp =
            st->arc.positive_threshold_v * (1.0 + st->arc.threshold_jitter * jitter_pos_);
        const double vn =
            st->arc.negative_threshold_v * (1.0 + st->arc.threshold_jitter * jitter_neg_);
        double i = leakage_s * v;
        if (v > vp) i += (v - vp) / st->arc.positive_resistance_ohm;
        if (v < -vn) i += (v + vn) / st->arc.negative_resistance_ohm;
        return i;
    }
    }
    return 0.0;
}

double FaultBranch::conductance(double v, double t) const {
    if (spec_.kind == FaultKind::Lif) {
        return t >= spec_.onset_s ? 1.0 / spec_.limiting_resistance_ohm : 0.0;
    }
    const HifStageSpec* st = spec_.schedule.active_at(t);
    if (st == nullptr) return 0.0;
    switch (st->kind) {
    case HifStageKind::InitialSawtooth:
    case HifStageKind::Sizzling:
        return 0.0;
    case HifStageKind::NegativeHalfArc: {
        const double vn =
            st->arc.negative_threshold_v * (1.0 + st->arc.threshold_jitter * jitter_neg_);
        double g = leakage_s;
        if (ignition_u_ < st->ignition_probability && v < -vn) {
            g += 1.0 / st->arc.negative_resistance_ohm;
        }
        return g;
    }
    case HifStageKind::StableArc: {
        const double vp =
            st->arc.positive_threshold_v * (1.0 + st->arc.threshold_jitter * jitter_pos_);
        const double vn =
            st->arc.negative_threshold_v * (1.0 + st->arc.threshold_jitter * jitter_neg_);
        double g = leakage_s;
        if (v > vp) g += 1.0 / st->arc.positive_resistance_ohm;
        if (v < -vn) g += 1.0 / st->arc.negative_resistance_ohm;
        return g;
    }
    }
    return 0.0;
}

bool FaultBranch::needs_newton(double t) const {
    if (spec_.kind != FaultKind::Hif) return false;
    const HifStageSpec* st = spec_.schedule.active_at(t);
    return st != nullptr && (st->kind == HifStageKind::NegativeHalfArc ||
                             st->kind == HifStageKind::StableArc);
}

bool FaultBranch::lif_active(double t) const {
    return spec_.kind == FaultKind::Lif && t >= spec_.onset_s;
}

double fault_branch_current(const FaultBranch& branch, double node_voltage_v, double t) {
    return branch.current(node_voltage_v, t);
}

WaveformRecord render_fault_current(const FaultSpec& spec, const SourceSpec& source,
                                    double duration_s, double sample_rate_hz,
                                    std::uint64_t seed) {
    source.validate();
    if (duration_s <= 0.0) throw std::invalid_argument("render_fault_current: duration must be > 0");
    if (sample_rate_hz <= 0.0) {
        throw std::invalid_argument("render_fault_current: sample rate must be > 0");
    }
    spec.validate(duration_s, 0);

    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    std::vector<double> current(n, 0.0);
    std::vector<double> voltage(n, 0.0);

    FaultBranch branch(spec, source.frequency_hz, seed);
    const int phase = static_cast<int>(spec.phase);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        const double v = source.instantaneous(phase, t);
        branch.observe(t, v);
        voltage[i] = v;
        current[i] = branch.current(v, t);
    }

    WaveformRecord rec(sample_rate_hz);
    rec.add_channel({"i_fault", "A", ChannelRole::FaultCurrent}, std::move(current));
    rec.add_channel({"v_drive", "V", ChannelRole::NodeVoltage}, std::move(voltage));
    return rec;
}

} // namespace hifsense

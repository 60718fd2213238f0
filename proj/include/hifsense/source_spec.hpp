#pragma once

#include <stdexcept>

namespace hifsense {

/// Ideal three-phase source behind the feeder: phase-to-neutral RMS voltage,
/// A -> B -> C sequence with 120 degree separation (A at angle zero).
struct SourceSpec {
    double phase_voltage_v = 230.0;
    double frequency_hz = 50.0;

    void validate() const {
        if (phase_voltage_v <= 0.0) throw std::invalid_argument("SourceSpec: voltage must be > 0");
        if (frequency_hz <= 0.0) throw std::invalid_argument("SourceSpec: frequency must be > 0");
    }

    /// Source angle of a phase (0, -2pi/3, +2pi/3 for A, B, C).
    [[nodiscard]] double phase_angle(int phase_index) const;
    /// Instantaneous phase-to-neutral voltage.
    [[nodiscard]] double instantaneous(int phase_index, double t) const;
};

} // namespace hifsense

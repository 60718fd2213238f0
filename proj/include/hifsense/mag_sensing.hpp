#pragma once

#include "hifsense/line_network.hpp"
#include "hifsense/waveform.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hifsense {

enum class SensorAxis : std::uint8_t { X = 0, Y = 1, Z = 2 };

char axis_letter(SensorAxis a);
SensorAxis parse_axis(char c);

/// Pole-mounted magnetometer head in the conductor cross-section frame.
struct SensorHead {
    std::string label;
    double x_m = 0.0;
    double height_m = 0.0;
    std::vector<SensorAxis> axes{SensorAxis::X, SensorAxis::Z};

    void validate(const ConductorGeometry& geom) const;
};

/// GMR transduction model: volts out per tesla in, white noise floor,
/// hard saturation, constant output offset.
struct SensorModel {
    double sensitivity_v_per_t = 1e4;          // 10 mV/uT after bridge amplification
    double noise_density_t_per_sqrt_hz = 1e-10; // 100 pT/sqrt(Hz)
    double saturation_t = 1e-3;
    double offset_v = 0.0;

    void validate() const;
    /// Standard deviation of the sampled noise: density * sqrt(rate/2).
    [[nodiscard]] double noise_sigma_t(double sample_rate_hz) const;
};

struct FieldSample {
    double bx_t = 0.0;
    double by_t = 0.0;
    double bz_t = 0.0;

    [[nodiscard]] double component(SensorAxis a) const;
};

/// Flux density at a point from the four instantaneous conductor currents
/// (A, B, C, N order), conductors as infinite lines along y. By is zero for
/// this geometry by construction.
FieldSample field_at_point(const std::array<double, 4>& currents_a,
                           const ConductorGeometry& geom, double x_m, double height_m);

/// Per-ampere field of one conductor at a point (the geometry-matrix kernel).
FieldSample unit_field_at_point(const Conductor& conductor, double x_m, double height_m);

/// Closed-form |B| of a finite straight segment of half-length L at its
/// perpendicular bisector, distance d: (mu0 I / 2 pi d) * L / sqrt(L^2+d^2).
double finite_segment_field(double current_a, double half_length_m, double distance_m);

/// finite_segment_field / infinite-line field at the same distance.
double segment_to_infinite_ratio(double half_length_m, double distance_m);

/// Distance at which the +/-L segment supplies the given fraction of the
/// infinite-line field (bisection on the ratio).
double distance_for_segment_ratio(double half_length_m, double ratio);

/// Synthesizes field-axis channels ("<head>_b<axis>", tesla) at each head
/// from the record's i_a/i_b/i_c/i_n channels. Sample-parallel when
/// `parallel` and OpenMP are available; results are identical either way.
WaveformRecord compute_fields(const WaveformRecord& currents, const ConductorGeometry& geom,
                              std::span<const SensorHead> heads, bool parallel = true);

/// Applies the sensor model to every field-axis channel:
/// out = sensitivity * clamp(B, +/-saturation) + offset + noise.
/// Channels are renamed "<head>_v<axis>" with role SensorOutput (volts).
WaveformRecord transduce(const WaveformRecord& fields, const SensorModel& model,
                         std::uint64_t seed);

/// Inverts the deterministic part of the sensor model on sensor-output
/// channels: (v - offset) / sensitivity, back to tesla field-axis channels.
WaveformRecord to_field_units(const WaveformRecord& sensor_outputs, const SensorModel& model);

} // namespace hifsense

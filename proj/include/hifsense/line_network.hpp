#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

namespace hifsense {

/// One overhead conductor in the pole cross-section frame: x horizontal
/// across the arm, height above ground. GMR and outer radius in meters,
/// AC resistance in ohm/km.
struct Conductor {
    char label = 'A'; // one of A, B, C, N
    double x_m = 0.0;
    double height_m = 0.0;
    double gmr_m = 0.0;
    double radius_m = 0.0;
    double r_ac_ohm_per_km = 0.0;
};

/// Four-wire layout, labels A, B, C, N each exactly once.
struct ConductorGeometry {
    std::array<Conductor, 4> conductors;

    /// Flat cross-arm: phases at 0.0 / 0.4 / 0.8 m, neutral at 1.2 m,
    /// all 5.5 m above ground.
    static ConductorGeometry default_flat();

    void validate() const;
    [[nodiscard]] std::size_t index_of(char label) const;
    /// Mean conductor height (the sensing frame's "conductor plane").
    [[nodiscard]] double plane_height() const;
};

/// Per-unit-length electrical parameters of the four-wire line.
struct LineParameters {
    Eigen::Matrix4cd series_impedance_ohm_per_km;
    Eigen::Matrix4d shunt_capacitance_nf_per_km;
    double frequency_hz = 50.0;
    double earth_resistivity_ohm_m = 100.0;
};

/// Lumped pi section: full series impedance, half the section capacitance
/// hung at each end.
struct PiSection {
    double length_m = 0.0;
    Eigen::Matrix4cd series_impedance_ohm;
    Eigen::Matrix4d end_capacitance_f;
};

struct FeederTopology {
    std::vector<PiSection> sections;
    double total_length_m = 0.0;
    double step_m = 0.0;

    [[nodiscard]] std::size_t node_count() const { return sections.size() + 1; }
};

/// Series impedance matrix (ohm/km) via the modified Carson equations for
/// an arbitrary set of conductors. Self terms use the conductor GMR, mutual
/// terms the direct spacing; the earth return enters through the equivalent
/// return depth sqrt-scaled by resistivity/frequency.
Eigen::MatrixXcd carson_impedance_matrix(std::span<const Conductor> conductors,
                                         double frequency_hz,
                                         double earth_resistivity_ohm_m);

/// Maxwell capacitance matrix (nF/km) from the method-of-images potential
/// coefficients, inverted.
Eigen::MatrixXd capacitance_matrix(std::span<const Conductor> conductors);

/// Four-wire wrappers over the general routines.
Eigen::Matrix4cd carson_series_impedance(const ConductorGeometry& geom,
                                         double frequency_hz,
                                         double earth_resistivity_ohm_m);
Eigen::Matrix4d shunt_capacitance(const ConductorGeometry& geom);

LineParameters line_parameters(const ConductorGeometry& geom, double frequency_hz,
                               double earth_resistivity_ohm_m);

/// Chains equal pi sections; total_length must be a positive integer
/// multiple of step.
FeederTopology build_feeder(const LineParameters& params, double total_length_m,
                            double step_m);

} // namespace hifsense

#include "hifsense/line_network.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hifsense {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMu0 = 4.0e-7 * kPi;            // H/m
constexpr double kEps0 = 8.8541878128e-12;       // F/m
// Equivalent earth-return depth constant: 2160 ft expressed in meters.
constexpr double kReturnDepthM = 658.368;

double distance(const Conductor& a, const Conductor& b) {
    return std::hypot(a.x_m - b.x_m, a.height_m - b.height_m);
}

} // namespace

ConductorGeometry ConductorGeometry::default_flat() {
    ConductorGeometry g;
    const double h = 5.5;
    const double gmr = 0.0037;
    const double radius = 0.00475;
    const double r_ac = 0.727;
    g.conductors = {
        Conductor{'A', 0.0, h, gmr, radius, r_ac},
        Conductor{'B', 0.4, h, gmr, radius, r_ac},
        Conductor{'C', 0.8, h, gmr, radius, r_ac},
        Conductor{'N', 1.2, h, gmr, radius, r_ac},
    };
    return g;
}

void ConductorGeometry::validate() const {
    bool seen[4] = {false, false, false, false};
    auto slot = [](char l) -> int {
        switch (l) {
        case 'A': return 0;
        case 'B': return 1;
        case 'C': return 2;
        case 'N': return 3;
        default: return -1;
        }
    };
    for (const auto& c : conductors) {
        int s = slot(c.label);
        if (s < 0) throw std::invalid_argument("ConductorGeometry: label must be A, B, C or N");
        if (seen[s]) throw std::invalid_argument("ConductorGeometry: duplicate label");
        seen[s] = true;
        if (c.height_m <= 0.0) throw std::invalid_argument("ConductorGeometry: height must be > 0");
        if (c.gmr_m <= 0.0 || c.radius_m <= 0.0) {
            throw std::invalid_argument("ConductorGeometry: GMR and radius must be > 0");
        }
        if (c.r_ac_ohm_per_km < 0.0) {
            throw std::invalid_argument("ConductorGeometry: AC resistance must be >= 0");
        }
    }
    for (std::size_t i = 0; i < conductors.size(); ++i) {
        for (std::size_t j = i + 1; j < conductors.size(); ++j) {
            if (distance(conductors[i], conductors[j]) == 0.0) {
                throw std::invalid_argument("ConductorGeometry: coincident conductors");
            }
        }
    }
}

std::size_t ConductorGeometry::index_of(char label) const {
    for (std::size_t i = 0; i < conductors.size(); ++i) {
        if (conductors[i].label == label) return i;
    }
    throw std::out_of_range(std::string("ConductorGeometry: no conductor '") + label + "'");
}

double ConductorGeometry::plane_height() const {
    double sum = 0.0;
    for (const auto& c : conductors) sum += c.height_m;
    return sum / static_cast<double>(conductors.size());
}

Eigen::MatrixXcd carson_impedance_matrix(std::span<const Conductor> conductors,
                                         double frequency_hz,
                                         double earth_resistivity_ohm_m) {
    if (frequency_hz <= 0.0) throw std::invalid_argument("carson: frequency must be > 0");
    if (earth_resistivity_ohm_m <= 0.0) {
        throw std::invalid_argument("carson: earth resistivity must be > 0");
    }
    const auto n = static_cast<Eigen::Index>(conductors.size());
    for (const auto& c : conductors) {
        if (c.gmr_m <= 0.0) throw std::invalid_argument("carson: GMR must be > 0");
    }

    // Earth-return correction, SI form of the two-term modified Carson
    // equations: a resistance pi^2 f 1e-7 ohm/m added to every term and the
    // reactance referenced to the equivalent return depth De.
    const double r_earth = kPi * kPi * frequency_hz * 1e-7;        // ohm/m
    const double x_coef = 4.0 * kPi * 1e-7 * frequency_hz;         // ohm/m per unit ln
    const double de = kReturnDepthM * std::sqrt(earth_resistivity_ohm_m / frequency_hz);

    Eigen::MatrixXcd z(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& ci = conductors[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) {
                const double r = ci.r_ac_ohm_per_km / 1000.0 + r_earth;
                const double x = x_coef * std::log(de / ci.gmr_m);
                z(i, j) = std::complex<double>(r, x) * 1000.0; // ohm/m -> ohm/km
            } else {
                const double d = distance(ci, conductors[static_cast<std::size_t>(j)]);
                if (d == 0.0) throw std::invalid_argument("carson: coincident conductors");
                const double x = x_coef * std::log(de / d);
                z(i, j) = std::complex<double>(r_earth, x) * 1000.0;
            }
        }
    }
    return z;
}

Eigen::MatrixXd capacitance_matrix(std::span<const Conductor> conductors) {
    const auto n = static_cast<Eigen::Index>(conductors.size());
    const double p_coef = 1.0 / (2.0 * kPi * kEps0); // m/F per unit ln

    Eigen::MatrixXd p(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& ci = conductors[static_cast<std::size_t>(i)];
        if (ci.height_m <= 0.0) throw std::invalid_argument("capacitance: height must be > 0");
        if (ci.radius_m <= 0.0) throw std::invalid_argument("capacitance: radius must be > 0");
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& cj = conductors[static_cast<std::size_t>(j)];
            if (i == j) {
                p(i, j) = p_coef * std::log(2.0 * ci.height_m / ci.radius_m);
            } else {
                const double direct = distance(ci, cj);
                const double image =
                    std::hypot(ci.x_m - cj.x_m, ci.height_m + cj.height_m);
                if (direct == 0.0) {
                    throw std::invalid_argument("capacitance: coincident conductors");
                }
                p(i, j) = p_coef * std::log(image / direct);
            }
        }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(p);
    if (!lu.isInvertible()) {
        throw std::invalid_argument("capacitance: singular potential matrix (degenerate geometry)");
    }
    // F/m -> nF/km
    return lu.inverse() * 1e12;
}

Eigen::Matrix4cd carson_series_impedance(const ConductorGeometry& geom, double frequency_hz,
                                         double earth_resistivity_ohm_m) {
    geom.validate();
    return carson_impedance_matrix(std::span<const Conductor>(geom.conductors), frequency_hz,
                                   earth_resistivity_ohm_m);
}

Eigen::Matrix4d shunt_capacitance(const ConductorGeometry& geom) {
    geom.validate();
    return capacitance_matrix(std::span<const Conductor>(geom.conductors));
}

LineParameters line_parameters(const ConductorGeometry& geom, double frequency_hz,
                               double earth_resistivity_ohm_m) {
    LineParameters p;
    p.series_impedance_ohm_per_km =
        carson_series_impedance(geom, frequency_hz, earth_resistivity_ohm_m);
    p.shunt_capacitance_nf_per_km = shunt_capacitance(geom);
    p.frequency_hz = frequency_hz;
    p.earth_resistivity_ohm_m = earth_resistivity_ohm_m;
    return p;
}

FeederTopology build_feeder(const LineParameters& params, double total_length_m,
                            double step_m) {
    if (step_m <= 0.0) throw std::invalid_argument("build_feeder: step must be > 0");
    if (total_length_m <= 0.0) throw std::invalid_argument("build_feeder: length must be > 0");
    const double ratio = total_length_m / step_m;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 || rounded < 1.0) {
        throw std::invalid_argument(
            "build_feeder: total length must be a positive integer multiple of step");
    }
    const auto count = static_cast<std::size_t>(rounded);

    PiSection section;
    section.length_m = step_m;
    const double km = step_m / 1000.0;
    section.series_impedance_ohm = params.series_impedance_ohm_per_km * km;
    // nF/km -> F for the section, half at each end.
    section.end_capacitance_f = params.shunt_capacitance_nf_per_km * (1e-9 * km / 2.0);

    FeederTopology feeder;
    feeder.sections.assign(count, section);
    feeder.total_length_m = total_length_m;
    feeder.step_m = step_m;
    return feeder;
}

} // namespace hifsense

#include "hifsense/mag_sensing.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace hifsense {

namespace {
constexpr double kMu0 = 4.0e-7 * std::numbers::pi;
constexpr double kMu0Over2Pi = 2.0e-7;
} // namespace

char axis_letter(SensorAxis a) {
    switch (a) {
    case SensorAxis::X: return 'x';
    case SensorAxis::Y: return 'y';
    case SensorAxis::Z: return 'z';
    }
    return '?';
}

SensorAxis parse_axis(char c) {
    switch (c) {
    case 'x': return SensorAxis::X;
    case 'y': return SensorAxis::Y;
    case 'z': return SensorAxis::Z;
    default: throw std::invalid_argument("sensor axis must be x, y or z");
    }
}

void SensorHead::validate(const ConductorGeometry& geom) const {
    if (axes.empty()) throw std::invalid_argument("SensorHead: at least one axis required");
    for (const auto& c : geom.conductors) {
        if (c.x_m == x_m && c.height_m == height_m) {
            throw std::invalid_argument("SensorHead: head coincides with conductor '" +
                                        std::string(1, c.label) + "'");
        }
    }
}

void SensorModel::validate() const {
    if (sensitivity_v_per_t <= 0.0) {
        throw std::invalid_argument("SensorModel: sensitivity must be > 0");
    }
    if (noise_density_t_per_sqrt_hz < 0.0) {
        throw std::invalid_argument("SensorModel: noise density must be >= 0");
    }
    if (saturation_t <= 0.0) throw std::invalid_argument("SensorModel: saturation must be > 0");
}

double SensorModel::noise_sigma_t(double sample_rate_hz) const {
    return noise_density_t_per_sqrt_hz * std::sqrt(sample_rate_hz / 2.0);
}

double FieldSample::component(SensorAxis a) const {
    switch (a) {
    case SensorAxis::X: return bx_t;
    case SensorAxis::Y: return by_t;
    case SensorAxis::Z: return bz_t;
    }
    return 0.0;
}

FieldSample unit_field_at_point(const Conductor& conductor, double x_m, double height_m) {
    const double dx = x_m - conductor.x_m;
    const double dz = height_m - conductor.height_m;
    const double d2 = dx * dx + dz * dz;
    if (d2 == 0.0) {
        throw std::invalid_argument("field_at_point: point lies on conductor '" +
                                    std::string(1, conductor.label) + "'");
    }
    // Infinite line along +y carrying +1 A: B = (mu0 / 2 pi d^2) (dz, 0, -dx).
    const double scale = kMu0Over2Pi / d2;
    return FieldSample{scale * dz, 0.0, -scale * dx};
}

FieldSample field_at_point(const std::array<double, 4>& currents_a,
                           const ConductorGeometry& geom, double x_m, double height_m) {
    FieldSample total;
    static constexpr char kOrder[4] = {'A', 'B', 'C', 'N'};
    for (int i = 0; i < 4; ++i) {
        const auto& c = geom.conductors[geom.index_of(kOrder[i])];
        const FieldSample unit = unit_field_at_point(c, x_m, height_m);
        total.bx_t += currents_a[static_cast<std::size_t>(i)] * unit.bx_t;
        total.bz_t += currents_a[static_cast<std::size_t>(i)] * unit.bz_t;
    }
    return total;
}

double finite_segment_field(double current_a, double half_length_m, double distance_m) {
    if (half_length_m <= 0.0) {
        throw std::invalid_argument("finite_segment_field: half-length must be > 0");
    }
    if (distance_m <= 0.0) {
        throw std::invalid_argument("finite_segment_field: distance must be > 0");
    }
    // (mu0 I / 4 pi d)(sin t1 + sin t2) at the bisector, sin t = L / sqrt(L^2 + d^2).
    const double sin_theta =
        half_length_m / std::sqrt(half_length_m * half_length_m + distance_m * distance_m);
    return kMu0 * current_a / (4.0 * std::numbers::pi * distance_m) * 2.0 * sin_theta;
}

double segment_to_infinite_ratio(double half_length_m, double distance_m) {
    const double infinite = kMu0Over2Pi / distance_m;
    return finite_segment_field(1.0, half_length_m, distance_m) / infinite;
}

double distance_for_segment_ratio(double half_length_m, double ratio) {
    if (half_length_m <= 0.0) {
        throw std::invalid_argument("distance_for_segment_ratio: half-length must be > 0");
    }
    if (ratio <= 0.0 || ratio >= 1.0) {
        throw std::invalid_argument("distance_for_segment_ratio: ratio must be in (0, 1)");
    }
    // The ratio decreases monotonically with distance; bisect.
    double lo = 1e-9;
    double hi = half_length_m;
    while (segment_to_infinite_ratio(half_length_m, hi) > ratio) hi *= 2.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (segment_to_infinite_ratio(half_length_m, mid) > ratio) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

WaveformRecord compute_fields(const WaveformRecord& currents, const ConductorGeometry& geom,
                              std::span<const SensorHead> heads, bool parallel) {
    geom.validate();
    if (heads.empty()) throw std::invalid_argument("compute_fields: no sensor heads");
    for (const auto& h : heads) h.validate(geom);

    const std::array<std::span<const double>, 4> cur = {
        currents.samples("i_a"), currents.samples("i_b"), currents.samples("i_c"),
        currents.samples("i_n")};
    const auto n = currents.sample_count();

    // Per-ampere field components, one row per (head, axis).
    struct Row {
        std::array<double, 4> gain;
        std::string name;
    };
    std::vector<Row> rows;
    static constexpr char kOrder[4] = {'A', 'B', 'C', 'N'};
    for (const auto& head : heads) {
        for (SensorAxis axis : head.axes) {
            Row row;
            for (int c = 0; c < 4; ++c) {
                const auto& cond = geom.conductors[geom.index_of(kOrder[c])];
                row.gain[static_cast<std::size_t>(c)] =
                    unit_field_at_point(cond, head.x_m, head.height_m).component(axis);
            }
            row.name = head.label + "_b" + axis_letter(axis);
            rows.push_back(std::move(row));
        }
    }

    std::vector<std::vector<double>> out(rows.size(), std::vector<double>(n, 0.0));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& g = rows[r].gain;
        double* dst = out[r].data();
        const auto count = static_cast<std::int64_t>(n);
#ifdef _OPENMP
#pragma omp parallel for if (parallel) schedule(static)
#endif
        for (std::int64_t i = 0; i < count; ++i) {
            const auto u = static_cast<std::size_t>(i);
            dst[u] = g[0] * cur[0][u] + g[1] * cur[1][u] + g[2] * cur[2][u] + g[3] * cur[3][u];
        }
    }
    (void)parallel;

    WaveformRecord rec(currents.sample_rate(), currents.start_time());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        rec.add_channel({rows[r].name, "T", ChannelRole::FieldAxis}, std::move(out[r]));
    }
    return rec;
}

WaveformRecord transduce(const WaveformRecord& fields, const SensorModel& model,
                         std::uint64_t seed) {
    model.validate();
    const double sigma = model.noise_sigma_t(fields.sample_rate());

    WaveformRecord rec(fields.sample_rate(), fields.start_time());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t ch = 0; ch < fields.channel_count(); ++ch) {
        const auto& info = fields.channel(ch);
        if (info.role != ChannelRole::FieldAxis) {
            throw std::invalid_argument("transduce: channel '" + info.name +
                                        "' is not a field-axis channel");
        }
        auto in = fields.samples(ch);
        std::vector<double> v(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) {
            const double b = std::clamp(in[i], -model.saturation_t, model.saturation_t);
            const double noisy = sigma > 0.0 ? b + sigma * noise(rng) : b;
            v[i] = model.sensitivity_v_per_t * noisy + model.offset_v;
        }
        std::string name = info.name;
        const auto pos = name.rfind("_b");
        if (pos != std::string::npos) name = name.substr(0, pos) + "_v" + name.substr(pos + 2);
        rec.add_channel({name, "V", ChannelRole::SensorOutput}, std::move(v));
    }
    return rec;
}

WaveformRecord to_field_units(const WaveformRecord& sensor_outputs, const SensorModel& model) {
    model.validate();
    WaveformRecord rec(sensor_outputs.sample_rate(), sensor_outputs.start_time());
    for (std::size_t ch = 0; ch < sensor_outputs.channel_count(); ++ch) {
        const auto& info = sensor_outputs.channel(ch);
        if (info.role != ChannelRole::SensorOutput) {
            throw std::invalid_argument("to_field_units: channel '" + info.name +
                                        "' is not a sensor-output channel");
        }
        auto in = sensor_outputs.samples(ch);
        std::vector<double> v(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) {
            v[i] = (in[i] - model.offset_v) / model.sensitivity_v_per_t;
        }
        std::string name = info.name;
        const auto pos = name.rfind("_v");
        if (pos != std::string::npos) name = name.substr(0, pos) + "_b" + name.substr(pos + 2);
        rec.add_channel({name, "T", ChannelRole::FieldAxis}, std::move(v));
    }
    return rec;
}

} // namespace hifsense

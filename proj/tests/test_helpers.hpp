#pragma once

#include "hifsense/line_network.hpp"
#include "hifsense/waveform.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace hifsense::testing {

inline constexpr double kPi = std::numbers::pi;

/// Random but electrically plausible four-wire geometry.
inline ConductorGeometry random_geometry(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> x(-2.0, 2.0);
    std::uniform_real_distribution<double> h(4.0, 12.0);
    std::uniform_real_distribution<double> gmr(1e-3, 8e-3);
    std::uniform_real_distribution<double> r(0.1, 1.5);

    ConductorGeometry g;
    const char labels[4] = {'A', 'B', 'C', 'N'};
    for (int i = 0; i < 4; ++i) {
        while (true) {
            Conductor c;
            c.label = labels[i];
            c.x_m = x(rng);
            c.height_m = h(rng);
            c.gmr_m = gmr(rng);
            c.radius_m = c.gmr_m * 1.3;
            c.r_ac_ohm_per_km = r(rng);
            bool clash = false;
            for (int j = 0; j < i; ++j) {
                const auto& o = g.conductors[static_cast<std::size_t>(j)];
                if (std::hypot(o.x_m - c.x_m, o.height_m - c.height_m) < 0.05) clash = true;
            }
            if (!clash) {
                g.conductors[static_cast<std::size_t>(i)] = c;
                break;
            }
        }
    }
    return g;
}

inline WaveformRecord sine_record(double rate, double duration, double freq, double amplitude,
                                  const std::string& name = "x", double phase = 0.0) {
    const auto n = static_cast<std::size_t>(std::llround(rate * duration));
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = amplitude * std::sin(2.0 * kPi * freq * static_cast<double>(i) / rate + phase);
    }
    WaveformRecord rec(rate);
    rec.add_channel({name, "A", ChannelRole::PhaseCurrent}, std::move(v));
    return rec;
}

inline double rms_of(std::span<const double> x, std::size_t from = 0) {
    double s = 0.0;
    for (std::size_t i = from; i < x.size(); ++i) s += x[i] * x[i];
    return std::sqrt(s / static_cast<double>(x.size() - from));
}

} // namespace hifsense::testing

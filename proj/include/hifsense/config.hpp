#pragma once

#include "hifsense/fault_detector.hpp"
#include "hifsense/feeder_sim.hpp"
#include "hifsense/line_network.hpp"
#include "hifsense/mag_sensing.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hifsense {

/// Config error with the offending JSON key path in the message.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything the CLI commands need, with built-in defaults; a JSON config
/// file overrides any subset. The schema is documented in docs/formats.md.
struct AppConfig {
    ConductorGeometry geometry = ConductorGeometry::default_flat();
    double frequency_hz = 50.0;
    double earth_resistivity_ohm_m = 100.0;

    double feeder_length_m = 600.0;
    double feeder_step_m = 100.0;

    SourceSpec source;
    LoadSpec loads;
    std::optional<FaultSpec> fault;

    double duration_s = 1.0;
    double sample_rate_hz = 27700.0;

    std::vector<SensorHead> heads;
    SensorModel sensor;
    double condition_threshold = 1e8;

    int cycles_per_window = 10;
    double overlap = 0.5;

    DatasetConfig dataset;
    TrainConfig train;

    static AppConfig defaults();
};

AppConfig load_config(const std::filesystem::path& path);
AppConfig parse_config(const std::string& json_text);

/// Default two-head arrangement: 2-axis (x, z) heads on the pole axis at
/// 0.42 m and 1.00 m below the conductor plane.
std::vector<SensorHead> default_heads(const ConductorGeometry& geom, double pole_x_m = 0.6,
                                      double top_offset_m = 0.42, double separation_m = 0.58);

/// Assembles the runnable SimConfig: Carson parameters from the geometry,
/// feeder chain of the configured length, loads and fault from the config.
SimConfig make_sim_config(const AppConfig& config);

} // namespace hifsense

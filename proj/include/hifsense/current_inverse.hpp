#pragma once

#include "hifsense/line_network.hpp"
#include "hifsense/mag_sensing.hpp"
#include "hifsense/waveform.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hifsense {

/// Linear map from the four conductor currents (columns A, B, C, N) to the
/// sensor-axis field measurements (rows in head/axis declaration order).
struct GeometryMatrix {
    Eigen::MatrixXd tesla_per_ampere;                        // m x 4
    std::vector<std::pair<std::string, SensorAxis>> row_labels;
    double condition_number = 0.0;
    bool full_rank = false;

    [[nodiscard]] std::string row_channel_name(std::size_t row) const;
};

/// Builds the geometry matrix from the forward field model. Requires at
/// least four measured axes in total.
GeometryMatrix build_geometry_matrix(const ConductorGeometry& geom,
                                     std::span<const SensorHead> heads);

struct ReconstructOptions {
    double condition_threshold = 1e8;
    bool parallel = true;
};

struct ReconstructionResult {
    WaveformRecord currents;              // i_a, i_b, i_c, i_n (A)
    std::vector<double> residual_norm_t;  // per-sample ||M i - b||
    double condition_number = 0.0;
};

/// Per-sample least squares M i = b over the field channels named by the
/// geometry-matrix rows. The orthogonal factorization is computed once and
/// applied per sample; samples are solved independently (block-parallel).
ReconstructionResult reconstruct(const WaveformRecord& fields, const GeometryMatrix& m,
                                 const ReconstructOptions& options = {});

struct ChannelError {
    std::string channel;
    double rms_error_pct = 0.0; // 100 * ||x - xhat|| / ||x||
    double max_abs_error = 0.0;
};

/// Per-channel error metrics between a truth record and an estimate with
/// matching rate and length. Channels are matched by position.
std::vector<ChannelError> rms_error_report(const WaveformRecord& truth,
                                           const WaveformRecord& estimate);

/// CSV form: "channel,rms_error_pct,max_abs_error" header plus one row each.
std::string error_report_csv(std::span<const ChannelError> report);

} // namespace hifsense

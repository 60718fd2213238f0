#include "hifsense/current_inverse.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hifsense {

std::string GeometryMatrix::row_channel_name(std::size_t row) const {
    const auto& [head, axis] = row_labels.at(row);
    return head + "_b" + axis_letter(axis);
}

GeometryMatrix build_geometry_matrix(const ConductorGeometry& geom,
                                     std::span<const SensorHead> heads) {
    geom.validate();
    std::size_t axis_count = 0;
    for (const auto& h : heads) {
        h.validate(geom);
        axis_count += h.axes.size();
    }
    if (axis_count < 4) {
        throw std::invalid_argument(
            "build_geometry_matrix: need at least 4 measured axes for 4 conductors");
    }

    GeometryMatrix m;
    m.tesla_per_ampere.resize(static_cast<Eigen::Index>(axis_count), 4);
    static constexpr char kOrder[4] = {'A', 'B', 'C', 'N'};
    Eigen::Index row = 0;
    for (const auto& head : heads) {
        for (SensorAxis axis : head.axes) {
            for (int c = 0; c < 4; ++c) {
                const auto& cond = geom.conductors[geom.index_of(kOrder[c])];
                m.tesla_per_ampere(row, c) =
                    unit_field_at_point(cond, head.x_m, head.height_m).component(axis);
            }
            m.row_labels.emplace_back(head.label, axis);
            ++row;
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.tesla_per_ampere);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (smin <= smax * 1e-15) {
        m.condition_number = std::numeric_limits<double>::infinity();
        m.full_rank = false;
    } else {
        m.condition_number = smax / smin;
        m.full_rank = true;
    }
    return m;
}

ReconstructionResult reconstruct(const WaveformRecord& fields, const GeometryMatrix& m,
                                 const ReconstructOptions& options) {
    if (!m.full_rank || m.condition_number > options.condition_threshold) {
        std::ostringstream msg;
        msg << "reconstruct: geometry matrix condition number ";
        if (m.full_rank) {
            msg << m.condition_number;
        } else {
            msg << "infinite (rank-deficient)";
        }
        msg << " exceeds " << options.condition_threshold
            << "; reposition the sensor heads for an independent view of the conductors";
        throw std::runtime_error(msg.str());
    }

    const auto rows = static_cast<std::size_t>(m.tesla_per_ampere.rows());
    std::vector<std::span<const double>> inputs;
    inputs.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        inputs.push_back(fields.samples(m.row_channel_name(r)));
    }
    const auto n = fields.sample_count();

    // Factor once, apply per sample: x = R^-1 Q^T b.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.tesla_per_ampere);
    const Eigen::MatrixXd thin_q =
        qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(rows), 4);
    const Eigen::MatrixXd r_top =
        qr.matrixQR().topRows(4).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd solver =
        r_top.triangularView<Eigen::Upper>().solve(thin_q.transpose()); // 4 x rows

    std::vector<std::vector<double>> out(4, std::vector<double>(n, 0.0));
    std::vector<double> residual(n, 0.0);

    const auto count = static_cast<std::int64_t>(n);
#ifdef _OPENMP
#pragma omp parallel for if (options.parallel) schedule(static)
#endif
    for (std::int64_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        Eigen::VectorXd b(static_cast<Eigen::Index>(rows));
        for (std::size_t r = 0; r < rows; ++r) b[static_cast<Eigen::Index>(r)] = inputs[r][u];
        const Eigen::Vector4d x = solver * b;
        for (int c = 0; c < 4; ++c) out[static_cast<std::size_t>(c)][u] = x[c];
        residual[u] = (m.tesla_per_ampere * x - b).norm();
    }

    ReconstructionResult result;
    result.condition_number = m.condition_number;
    result.residual_norm_t = std::move(residual);
    result.currents = WaveformRecord(fields.sample_rate(), fields.start_time());
    result.currents.add_channel({"i_a", "A", ChannelRole::PhaseCurrent}, std::move(out[0]));
    result.currents.add_channel({"i_b", "A", ChannelRole::PhaseCurrent}, std::move(out[1]));
    result.currents.add_channel({"i_c", "A", ChannelRole::PhaseCurrent}, std::move(out[2]));
    result.currents.add_channel({"i_n", "A", ChannelRole::NeutralCurrent}, std::move(out[3]));
    return result;
}

std::vector<ChannelError> rms_error_report(const WaveformRecord& truth,
                                           const WaveformRecord& estimate) {
    if (truth.sample_rate() != estimate.sample_rate()) {
        throw std::invalid_argument("rms_error_report: sample rate mismatch");
    }
    if (truth.sample_count() != estimate.sample_count()) {
        throw std::invalid_argument("rms_error_report: length mismatch");
    }
    const std::size_t channels = std::min(truth.channel_count(), estimate.channel_count());
    std::vector<ChannelError> report;
    report.reserve(channels);
    for (std::size_t ch = 0; ch < channels; ++ch) {
        auto x = truth.samples(ch);
        auto xhat = estimate.samples(ch);
        double err2 = 0.0;
        double ref2 = 0.0;
        double max_abs = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double e = x[i] - xhat[i];
            err2 += e * e;
            ref2 += x[i] * x[i];
            max_abs = std::max(max_abs, std::abs(e));
        }
        ChannelError ce;
        ce.channel = truth.channel(ch).name;
        ce.max_abs_error = max_abs;
        if (ref2 > 0.0) {
            ce.rms_error_pct = 100.0 * std::sqrt(err2 / ref2);
        } else {
            // Zero-signal reference: 0% only if the estimate is also zero.
            ce.rms_error_pct = err2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        }
        report.push_back(std::move(ce));
    }
    return report;
}

std::string error_report_csv(std::span<const ChannelError> report) {
    std::ostringstream out;
    out << "channel,rms_error_pct,max_abs_error\n";
    out.precision(12);
    for (const auto& ce : report) {
        out << ce.channel << ',' << ce.rms_error_pct << ',' << ce.max_abs_error << '\n';
    }
    return out.str();
}

} // namespace hifsense

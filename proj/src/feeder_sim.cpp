#include "hifsense/feeder_sim.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace hifsense {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMaxNewtonIterations = 50;
constexpr double kNewtonTolerance = 1e-9; // relative, on the branch current
constexpr int kMaxHalvings = 4;

using Eigen::Matrix4d;
using Eigen::MatrixXd;
using Eigen::Vector4d;
using Eigen::VectorXd;

} // namespace

void LoadElement::validate() const {
    if (resistance_ohm < 0.0 || inductance_h < 0.0) {
        throw std::invalid_argument("LoadElement: resistance and inductance must be >= 0");
    }
    if (resistance_ohm == 0.0 && inductance_h == 0.0) {
        throw std::invalid_argument("LoadElement: resistance and inductance cannot both be zero");
    }
    if (off_s && *off_s <= on_s) {
        throw std::invalid_argument("LoadElement: switch-off must come after switch-on");
    }
}

void LoadSpec::validate() const {
    for (const auto& phase : per_phase) {
        for (const auto& e : phase) e.validate();
    }
}

LoadElement LoadSpec::heater() { return LoadElement{23.0, 1e-3, 0.0, std::nullopt}; }
LoadElement LoadSpec::light() { return LoadElement{529.0, 50e-3, 0.0, std::nullopt}; }

void SimConfig::validate() const {
    source.validate();
    loads.validate();
    if (duration_s <= 0.0) throw std::invalid_argument("SimConfig: duration must be > 0");
    if (sample_interval_s <= 0.0) {
        throw std::invalid_argument("SimConfig: sample interval must be > 0");
    }
    if (sample_interval_s > 1.0 / (20.0 * source.frequency_hz)) {
        throw std::invalid_argument("SimConfig: need at least 20 samples per cycle");
    }
    if (feeder.sections.empty()) throw std::invalid_argument("SimConfig: feeder has no sections");
    if (fault) fault->validate(duration_s, feeder.node_count());
}

namespace {

// Trapezoidal companion of a coupled series R-L branch: i = Y*(va - vb) - hist
// with Y = (R + (2/h)L)^-1 and hist = -Y*(d_prev + B*i_prev), B = (2/h)L - R.
struct SectionBranch {
    Matrix4d resistance;
    Matrix4d inductance;
    Matrix4d companion_y;  // for the current step size
    Matrix4d companion_b;
    Vector4d state_i = Vector4d::Zero();
    int node_a = 0; // 0 is the source group
    int node_b = 0;

    void build(double h) {
        Matrix4d a = resistance + (2.0 / h) * inductance;
        Eigen::FullPivLU<Matrix4d> lu(a);
        if (!lu.isInvertible()) {
            throw std::runtime_error("feeder_sim: singular section companion matrix");
        }
        companion_y = lu.inverse();
        companion_b = (2.0 / h) * inductance - resistance;
    }
};

struct CapBranch {
    Matrix4d capacitance;
    Matrix4d companion_y;
    Vector4d state_i = Vector4d::Zero();
    Vector4d prev_v = Vector4d::Zero();
    int node = 0;
    bool active = false;

    void build(double h) {
        active = capacitance.norm() > 0.0;
        companion_y = (2.0 / h) * capacitance;
    }
};

struct LoadBranch {
    LoadElement element;
    int phase = 0;
    bool closed = false;
    bool fresh = false; // first step after closing integrates backward-Euler
    double y = 0.0;
    double y_be = 0.0;
    double state_i = 0.0;
    double prev_d = 0.0;

    void build(double h) {
        y = 1.0 / (element.resistance_ohm + 2.0 * element.inductance_h / h);
        y_be = 1.0 / (element.resistance_ohm + element.inductance_h / h);
    }
    [[nodiscard]] bool is_resistive() const { return element.inductance_h == 0.0; }
};

class FeederSimulator {
public:
    FeederSimulator(const SimConfig& config, std::uint64_t seed) : config_(config) {
        config_.validate();
        section_count_ = config_.feeder.sections.size();
        unknowns_ = static_cast<int>(4 * section_count_);

        sections_.resize(section_count_);
        for (std::size_t s = 0; s < section_count_; ++s) {
            const auto& sec = config_.feeder.sections[s];
            sections_[s].resistance = sec.series_impedance_ohm.real();
            sections_[s].inductance =
                sec.series_impedance_ohm.imag() / (kTwoPi * config_.source.frequency_hz);
            sections_[s].node_a = static_cast<int>(s);
            sections_[s].node_b = static_cast<int>(s + 1);
        }

        caps_.resize(section_count_); // internal nodes 1..K; source-end caps load the ideal source
        for (std::size_t k = 1; k <= section_count_; ++k) {
            Matrix4d c = config_.feeder.sections[k - 1].end_capacitance_f;
            if (k < section_count_) c += config_.feeder.sections[k].end_capacitance_f;
            caps_[k - 1].capacitance = c;
            caps_[k - 1].node = static_cast<int>(k);
        }

        for (int p = 0; p < 3; ++p) {
            for (const auto& e : config_.loads.per_phase[static_cast<std::size_t>(p)]) {
                LoadBranch b;
                b.element = e;
                b.phase = p;
                loads_.push_back(b);
            }
        }

        if (config_.fault) {
            fault_.emplace(*config_.fault, config_.source.frequency_hz, seed);
            fault_node_ = config_.fault->node_index;
            fault_phase_ = static_cast<int>(config_.fault->phase);
        }

        prev_u_ = VectorXd::Zero(unknowns_);
        if (fault_) fault_->observe(0.0, fault_voltage(prev_u_));
    }

    WaveformRecord run(SimDiagnostics& diag) {
        const double h = config_.sample_interval_s;
        const auto total =
            static_cast<std::size_t>(std::llround(config_.duration_s / h));
        if (total < 2) throw std::invalid_argument("feeder_sim: duration shorter than two samples");

        std::vector<std::vector<double>> out(6, std::vector<double>(total, 0.0));

        for (std::size_t n = 1; n < total; ++n) {
            const double t0 = static_cast<double>(n - 1) * h;
            const double t1 = static_cast<double>(n) * h;
            StepResult r = advance(t0, t1, 0);
            out[0][n] = r.span_current[0];
            out[1][n] = r.span_current[1];
            out[2][n] = r.span_current[2];
            out[3][n] = r.span_current[3];
            out[4][n] = r.fault_current;
            out[5][n] = r.fault_voltage;
            diag.max_kcl_residual_rel = std::max(diag.max_kcl_residual_rel, r.kcl_residual_rel);
            diag.max_newton_iterations = std::max(diag.max_newton_iterations, r.newton_iterations);
            diag.step_halvings += r.halvings;
            ++diag.steps;
        }

        WaveformRecord rec(1.0 / h);
        rec.add_channel({"i_a", "A", ChannelRole::PhaseCurrent}, std::move(out[0]));
        rec.add_channel({"i_b", "A", ChannelRole::PhaseCurrent}, std::move(out[1]));
        rec.add_channel({"i_c", "A", ChannelRole::PhaseCurrent}, std::move(out[2]));
        rec.add_channel({"i_n", "A", ChannelRole::NeutralCurrent}, std::move(out[3]));
        rec.add_channel({"i_fault", "A", ChannelRole::FaultCurrent}, std::move(out[4]));
        rec.add_channel({"v_fault", "V", ChannelRole::NodeVoltage}, std::move(out[5]));
        return rec;
    }

private:
    struct StepResult {
        Vector4d span_current = Vector4d::Zero();
        double fault_current = 0.0;
        double fault_voltage = 0.0;
        double kcl_residual_rel = 0.0;
        int newton_iterations = 0;
        int halvings = 0;
    };

    [[nodiscard]] Vector4d source_voltage(double t) const {
        Vector4d v;
        v[0] = config_.source.instantaneous(0, t);
        v[1] = config_.source.instantaneous(1, t);
        v[2] = config_.source.instantaneous(2, t);
        v[3] = 0.0;
        return v;
    }

    [[nodiscard]] int unknown_index(int node, int conductor) const {
        return (node - 1) * 4 + conductor;
    }

    [[nodiscard]] Vector4d group_voltage(const VectorXd& u, int node, double t) const {
        if (node == 0) return source_voltage(t);
        return u.segment<4>(unknown_index(node, 0));
    }

    [[nodiscard]] double fault_voltage(const VectorXd& u) const {
        if (!fault_) return 0.0;
        return u[unknown_index(fault_node_, fault_phase_)];
    }

    [[nodiscard]] double end_phase_a_voltage(const VectorXd& u) const {
        return u[unknown_index(static_cast<int>(section_count_), 0)];
    }

    void rebuild(double h, double t1) {
        for (auto& s : sections_) s.build(h);
        for (auto& c : caps_) c.build(h);
        bool any_fresh = false;
        for (auto& l : loads_) {
            const bool closed = l.element.closed_at(t1);
            l.fresh = closed && !l.closed;
            any_fresh = any_fresh || l.fresh;
            if (!closed && l.closed) l.state_i = 0.0;
            l.closed = closed;
            l.build(h);
        }
        lif_closed_ = fault_ && fault_->lif_active(t1);

        MatrixXd g = MatrixXd::Zero(unknowns_, unknowns_);
        for (const auto& s : sections_) {
            const Matrix4d& y = s.companion_y;
            if (s.node_a >= 1) {
                const int ia = unknown_index(s.node_a, 0);
                const int ib = unknown_index(s.node_b, 0);
                g.block<4, 4>(ia, ia) += y;
                g.block<4, 4>(ia, ib) -= y;
                g.block<4, 4>(ib, ib) += y;
                g.block<4, 4>(ib, ia) -= y;
            } else {
                const int ib = unknown_index(s.node_b, 0);
                g.block<4, 4>(ib, ib) += y;
            }
        }
        for (const auto& c : caps_) {
            if (!c.active) continue;
            const int ik = unknown_index(c.node, 0);
            g.block<4, 4>(ik, ik) += c.companion_y;
        }
        const int end_node = static_cast<int>(section_count_);
        for (const auto& l : loads_) {
            if (!l.closed) continue;
            const double y = l.fresh ? l.y_be : l.y;
            const int ip = unknown_index(end_node, l.phase);
            const int in = unknown_index(end_node, 3);
            g(ip, ip) += y;
            g(ip, in) -= y;
            g(in, in) += y;
            g(in, ip) -= y;
        }
        if (lif_closed_) {
            const int f = unknown_index(fault_node_, fault_phase_);
            g(f, f) += 1.0 / fault_->spec().limiting_resistance_ohm;
        }

        lu_.compute(g);
        if (!lu_.isInvertible()) {
            throw std::runtime_error("feeder_sim: singular nodal matrix");
        }
        if (fault_) {
            VectorXd e = VectorXd::Zero(unknowns_);
            e[unknown_index(fault_node_, fault_phase_)] = 1.0;
            fault_z_ = lu_.solve(e);
        }
        built_h_ = h;
        // Fresh loads revert to the trapezoidal stamp next step.
        needs_rebuild_after_fresh_ = any_fresh;
    }

    [[nodiscard]] bool epoch_changed(double h, double t1) const {
        if (h != built_h_) return true;
        if (needs_rebuild_after_fresh_) return true;
        for (const auto& l : loads_) {
            if (l.element.closed_at(t1) != l.closed) return true;
        }
        if (fault_ && fault_->lif_active(t1) != lif_closed_) return true;
        return false;
    }

    StepResult advance(double t0, double t1, int depth) {
        if (built_h_ == 0.0 || epoch_changed(t1 - t0, t1)) rebuild(t1 - t0, t1);

        const Vector4d v0_new = source_voltage(t1);
        VectorXd rhs = VectorXd::Zero(unknowns_);

        for (const auto& s : sections_) {
            const Vector4d d_prev = group_voltage(prev_u_, s.node_a, t0) -
                                    group_voltage(prev_u_, s.node_b, t0);
            const Vector4d hist =
                -s.companion_y * (d_prev + s.companion_b * s.state_i);
            const int ib = unknown_index(s.node_b, 0);
            if (s.node_a >= 1) {
                const int ia = unknown_index(s.node_a, 0);
                rhs.segment<4>(ia) += hist;
                rhs.segment<4>(ib) -= hist;
            } else {
                rhs.segment<4>(ib) += s.companion_y * v0_new - hist;
            }
        }
        for (const auto& c : caps_) {
            if (!c.active) continue;
            const Vector4d hist = c.companion_y * c.prev_v + c.state_i;
            rhs.segment<4>(unknown_index(c.node, 0)) += hist;
        }
        const int end_node = static_cast<int>(section_count_);
        for (const auto& l : loads_) {
            if (!l.closed) continue;
            double hist = 0.0;
            if (!l.fresh && !l.is_resistive()) {
                const double b = 2.0 * l.element.inductance_h / (t1 - t0) -
                                 l.element.resistance_ohm;
                hist = -l.y * (l.prev_d + b * l.state_i);
            } else if (l.fresh) {
                hist = 0.0; // backward-Euler first step from zero current
            } else {
                hist = 0.0; // memoryless resistor
            }
            rhs[unknown_index(end_node, l.phase)] += hist;
            rhs[unknown_index(end_node, 3)] -= hist;
        }

        // Fault branch contribution and solve.
        VectorXd u_new;
        double fault_i = 0.0;
        int newton_iters = 0;
        const int f_index = fault_ ? unknown_index(fault_node_, fault_phase_) : -1;
        if (fault_ && fault_->needs_newton(t1)) {
            double v_guess = fault_voltage(prev_u_);
            double i_prev = fault_->current(v_guess, t1);
            bool converged = false;
            for (int iter = 1; iter <= kMaxNewtonIterations; ++iter) {
                const double g = fault_->conductance(v_guess, t1);
                const double c = fault_->current(v_guess, t1) - g * v_guess;
                VectorXd r = rhs;
                r[f_index] -= c;
                VectorXd y = lu_.solve(r);
                // Sherman-Morrison update for the rank-1 arc conductance.
                const double denom = 1.0 + g * fault_z_[f_index];
                u_new = y - fault_z_ * (g * y[f_index] / denom);
                const double v_new = u_new[f_index];
                const double i_new = fault_->current(v_new, t1);
                newton_iters = iter;
                if (std::abs(i_new - i_prev) <=
                    kNewtonTolerance * std::max(std::abs(i_new), 1e-3)) {
                    fault_i = i_new;
                    converged = true;
                    break;
                }
                v_guess = v_new;
                i_prev = i_new;
            }
            if (!converged) {
                if (depth < kMaxHalvings) {
                    const double tm = 0.5 * (t0 + t1);
                    StepResult first = advance(t0, tm, depth + 1);
                    StepResult second = advance(tm, t1, depth + 1);
                    second.halvings += first.halvings + 1;
                    second.newton_iterations =
                        std::max(first.newton_iterations, second.newton_iterations);
                    second.kcl_residual_rel =
                        std::max(first.kcl_residual_rel, second.kcl_residual_rel);
                    return second;
                }
                std::ostringstream msg;
                msg << "feeder_sim: fault branch Newton iteration failed to converge at t="
                    << t1 << " s (step " << t0 << " -> " << t1 << ")";
                throw std::runtime_error(msg.str());
            }
        } else {
            if (fault_ && !lif_closed_ && fault_->spec().kind == FaultKind::Hif) {
                // Sawtooth/sizzling stages inject a known current.
                fault_i = fault_->current(fault_voltage(prev_u_), t1);
                rhs[f_index] -= fault_i;
            }
            u_new = lu_.solve(rhs);
            if (fault_ && lif_closed_) {
                fault_i = u_new[f_index] / fault_->spec().limiting_resistance_ohm;
            }
        }

        StepResult result;
        result.newton_iterations = newton_iters;
        result.fault_current = fault_i;
        result.fault_voltage = fault_ ? u_new[f_index] : end_phase_a_voltage(u_new);

        // Commit branch states and collect currents for the conservation check.
        std::vector<Vector4d> section_i(section_count_);
        for (std::size_t s = 0; s < section_count_; ++s) {
            auto& br = sections_[s];
            const Vector4d d_prev = group_voltage(prev_u_, br.node_a, t0) -
                                    group_voltage(prev_u_, br.node_b, t0);
            const Vector4d d_new = group_voltage(u_new, br.node_a, t1) -
                                   group_voltage(u_new, br.node_b, t1);
            br.state_i = br.companion_y * (d_new + d_prev + br.companion_b * br.state_i);
            section_i[s] = br.state_i;
        }
        std::vector<Vector4d> cap_i(caps_.size(), Vector4d::Zero());
        for (std::size_t k = 0; k < caps_.size(); ++k) {
            auto& c = caps_[k];
            if (!c.active) continue;
            const Vector4d v_new = u_new.segment<4>(unknown_index(c.node, 0));
            c.state_i = c.companion_y * (v_new - c.prev_v) - c.state_i;
            c.prev_v = v_new;
            cap_i[k] = c.state_i;
        }
        std::vector<double> load_i(loads_.size(), 0.0);
        for (std::size_t li = 0; li < loads_.size(); ++li) {
            auto& l = loads_[li];
            if (!l.closed) continue;
            const double d_new = u_new[unknown_index(end_node, l.phase)] -
                                 u_new[unknown_index(end_node, 3)];
            if (l.fresh) {
                l.state_i = l.y_be * d_new;
            } else if (l.is_resistive()) {
                l.state_i = d_new / l.element.resistance_ohm;
            } else {
                const double b = 2.0 * l.element.inductance_h / (t1 - t0) -
                                 l.element.resistance_ohm;
                l.state_i = l.y * (d_new + l.prev_d + b * l.state_i);
            }
            l.prev_d = d_new;
            load_i[li] = l.state_i;
        }

        // Kirchhoff residual at every solved node.
        double max_residual = 0.0;
        double max_branch = 1e-30;
        for (std::size_t s = 0; s < section_count_; ++s) {
            max_branch = std::max(max_branch, section_i[s].cwiseAbs().maxCoeff());
        }
        for (double li : load_i) max_branch = std::max(max_branch, std::abs(li));
        max_branch = std::max(max_branch, std::abs(fault_i));
        for (std::size_t k = 1; k <= section_count_; ++k) {
            Vector4d leave = -section_i[k - 1];
            if (k < section_count_) leave += section_i[k];
            if (caps_[k - 1].active) leave += cap_i[k - 1];
            if (k == section_count_) {
                for (std::size_t li = 0; li < loads_.size(); ++li) {
                    if (!loads_[li].closed) continue;
                    leave[loads_[li].phase] += load_i[li];
                    leave[3] -= load_i[li];
                }
            }
            if (fault_ && static_cast<int>(k) == fault_node_) {
                leave[fault_phase_] += fault_i;
            }
            max_residual = std::max(max_residual, leave.cwiseAbs().maxCoeff());
        }
        result.kcl_residual_rel = max_residual / max_branch;
        result.span_current = section_i[0];

        prev_u_ = u_new;
        if (fault_) fault_->observe(t1, u_new[f_index]);
        return result;
    }

    SimConfig config_;
    std::size_t section_count_ = 0;
    int unknowns_ = 0;

    std::vector<SectionBranch> sections_;
    std::vector<CapBranch> caps_;
    std::vector<LoadBranch> loads_;
    std::optional<FaultBranch> fault_;
    int fault_node_ = 0;
    int fault_phase_ = 0;
    bool lif_closed_ = false;
    bool needs_rebuild_after_fresh_ = false;

    Eigen::FullPivLU<MatrixXd> lu_;
    VectorXd fault_z_;
    double built_h_ = 0.0;

    VectorXd prev_u_;
};

} // namespace

WaveformRecord simulate(const SimConfig& config, std::uint64_t seed) {
    SimDiagnostics diag;
    return simulate(config, seed, diag);
}

WaveformRecord simulate(const SimConfig& config, std::uint64_t seed, SimDiagnostics& diag) {
    FeederSimulator sim(config, seed);
    return sim.run(diag);
}

std::complex<double> PhasorSolution::at(const std::string& name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i) {
        if (channel_names[i] == name) return phasors[i];
    }
    throw std::out_of_range("PhasorSolution: no channel named '" + name + "'");
}

double PhasorSolution::rms(const std::string& name) const {
    return std::abs(at(name)) / std::sqrt(2.0);
}

PhasorSolution steady_state_phasor(const SimConfig& config) {
    config.validate();
    if (config.fault && config.fault->kind == FaultKind::Hif) {
        throw std::invalid_argument(
            "steady_state_phasor: nonlinear HIF stages have no phasor solution");
    }

    using Eigen::MatrixXcd;
    using Eigen::Vector4cd;
    using Eigen::VectorXcd;
    const std::complex<double> j(0.0, 1.0);
    const double omega = kTwoPi * config.source.frequency_hz;

    const auto sections = config.feeder.sections.size();
    const int n = static_cast<int>(4 * sections);
    auto index = [](std::size_t node, int c) { return static_cast<int>((node - 1) * 4) + c; };

    // Peak-value phasors, x(t) = Im(X e^{j w t}); A at angle 0.
    Vector4cd v0;
    const double peak = std::sqrt(2.0) * config.source.phase_voltage_v;
    v0[0] = peak;
    v0[1] = peak * std::exp(j * config.source.phase_angle(1));
    v0[2] = peak * std::exp(j * config.source.phase_angle(2));
    v0[3] = 0.0;

    MatrixXcd g = MatrixXcd::Zero(n, n);
    VectorXcd rhs = VectorXcd::Zero(n);

    std::vector<Eigen::Matrix4cd> section_y(sections);
    for (std::size_t s = 0; s < sections; ++s) {
        Eigen::FullPivLU<Eigen::Matrix4cd> lu(config.feeder.sections[s].series_impedance_ohm);
        if (!lu.isInvertible()) {
            throw std::runtime_error("steady_state_phasor: singular section impedance");
        }
        section_y[s] = lu.inverse();
        const auto& y = section_y[s];
        if (s == 0) {
            g.block<4, 4>(index(1, 0), index(1, 0)) += y;
            rhs.segment<4>(index(1, 0)) += y * v0;
        } else {
            const int ia = index(s, 0);
            const int ib = index(s + 1, 0);
            g.block<4, 4>(ia, ia) += y;
            g.block<4, 4>(ia, ib) -= y;
            g.block<4, 4>(ib, ib) += y;
            g.block<4, 4>(ib, ia) -= y;
        }
    }
    for (std::size_t k = 1; k <= sections; ++k) {
        Eigen::Matrix4d c = config.feeder.sections[k - 1].end_capacitance_f;
        if (k < sections) c += config.feeder.sections[k].end_capacitance_f;
        g.block<4, 4>(index(k, 0), index(k, 0)) += j * omega * c;
    }
    for (int p = 0; p < 3; ++p) {
        for (const auto& e : config.loads.per_phase[static_cast<std::size_t>(p)]) {
            if (!e.closed_at(config.duration_s)) continue;
            const std::complex<double> y =
                1.0 / std::complex<double>(e.resistance_ohm, omega * e.inductance_h);
            const int ip = index(sections, p);
            const int in = index(sections, 3);
            g(ip, ip) += y;
            g(ip, in) -= y;
            g(in, in) += y;
            g(in, ip) -= y;
        }
    }
    bool lif = false;
    int f_index = -1;
    if (config.fault && config.fault->kind == FaultKind::Lif &&
        config.fault->onset_s <= config.duration_s) {
        lif = true;
        f_index = index(static_cast<std::size_t>(config.fault->node_index),
                        static_cast<int>(config.fault->phase));
        g(f_index, f_index) += 1.0 / config.fault->limiting_resistance_ohm;
    }

    Eigen::FullPivLU<MatrixXcd> lu(g);
    if (!lu.isInvertible()) {
        throw std::runtime_error("steady_state_phasor: singular nodal matrix");
    }
    const VectorXcd u = lu.solve(rhs);

    const Vector4cd span = section_y[0] * (v0 - u.segment<4>(index(1, 0)));
    PhasorSolution sol;
    sol.channel_names = {"i_a", "i_b", "i_c", "i_n", "i_fault", "v_fault"};
    sol.phasors.resize(6);
    sol.phasors[0] = span[0];
    sol.phasors[1] = span[1];
    sol.phasors[2] = span[2];
    sol.phasors[3] = span[3];
    sol.phasors[4] = lif ? u[f_index] / config.fault->limiting_resistance_ohm
                         : std::complex<double>(0.0, 0.0);
    sol.phasors[5] = lif ? u[f_index] : u[index(sections, 0)];
    return sol;
}

} // namespace hifsense

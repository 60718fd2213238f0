#include "hifsense/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace hifsense {

namespace {

using nlohmann::json;

/// Cursor into a JSON document that carries its own key path so errors can
/// name exactly what is wrong ("sensors.model.sensitivity_v_per_t: ...").
class Cursor {
public:
    Cursor(const json* node, std::string path) : node_(node), path_(std::move(path)) {}

    [[nodiscard]] bool present() const { return node_ != nullptr && !node_->is_null(); }

    [[nodiscard]] Cursor operator[](const std::string& key) const {
        if (!present()) return Cursor(nullptr, join(key));
        if (!node_->is_object()) {
            throw ConfigError(path_ + ": expected an object");
        }
        auto it = node_->find(key);
        return Cursor(it == node_->end() ? nullptr : &*it, join(key));
    }

    [[nodiscard]] Cursor at(std::size_t i) const {
        if (!present() || !node_->is_array() || i >= node_->size()) {
            throw ConfigError(path_ + "[" + std::to_string(i) + "]: missing array element");
        }
        return Cursor(&(*node_)[i], path_ + "[" + std::to_string(i) + "]");
    }

    [[nodiscard]] std::size_t array_size() const {
        require();
        if (!node_->is_array()) throw ConfigError(path_ + ": expected an array");
        return node_->size();
    }

    template <typename T>
    [[nodiscard]] T get() const {
        require();
        try {
            return node_->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + ": wrong value type");
        }
    }

    template <typename T>
    [[nodiscard]] T get_or(T fallback) const {
        if (!present()) return fallback;
        return get<T>();
    }

    void require() const {
        if (!present()) throw ConfigError(path_ + ": missing required key");
    }

    [[nodiscard]] const std::string& path() const { return path_; }

private:
    [[nodiscard]] std::string join(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    const json* node_;
    std::string path_;
};

LoadElement parse_load_element(const Cursor& c) {
    LoadElement e;
    e.resistance_ohm = c["resistance_ohm"].get<double>();
    e.inductance_h = c["inductance_h"].get_or(0.0);
    e.on_s = c["on_s"].get_or(0.0);
    if (c["off_s"].present()) e.off_s = c["off_s"].get<double>();
    return e;
}

ArcParams parse_arc(const Cursor& c, const ArcParams& defaults) {
    ArcParams a = defaults;
    if (!c.present()) return a;
    a.positive_threshold_v = c["positive_threshold_v"].get_or(a.positive_threshold_v);
    a.negative_threshold_v = c["negative_threshold_v"].get_or(a.negative_threshold_v);
    a.positive_resistance_ohm = c["positive_resistance_ohm"].get_or(a.positive_resistance_ohm);
    a.negative_resistance_ohm = c["negative_resistance_ohm"].get_or(a.negative_resistance_ohm);
    a.threshold_jitter = c["threshold_jitter"].get_or(a.threshold_jitter);
    return a;
}

FaultSpec parse_fault(const Cursor& c) {
    FaultSpec f;
    const std::string kind = c["kind"].get<std::string>();
    if (kind == "lif") {
        f.kind = FaultKind::Lif;
    } else if (kind == "hif") {
        f.kind = FaultKind::Hif;
    } else {
        throw ConfigError(c["kind"].path() + ": must be 'lif' or 'hif'");
    }
    const std::string phase = c["phase"].get<std::string>();
    if (phase.size() != 1) throw ConfigError(c["phase"].path() + ": must be 'A', 'B' or 'C'");
    f.phase = parse_phase(phase[0]);
    f.node_index = c["node"].get<int>();
    f.onset_s = c["onset_s"].get_or(0.0);
    if (f.kind == FaultKind::Lif) {
        f.limiting_resistance_ohm = c["limiting_ohm"].get<double>();
    } else {
        const Cursor stages = c["stages"];
        stages.require();
        double min_start = -1.0;
        for (std::size_t i = 0; i < stages.array_size(); ++i) {
            const Cursor sc = stages.at(i);
            HifStageSpec st;
            st.kind = parse_stage_name(sc["stage"].get<std::string>());
            st.start_s = sc["start_s"].get<double>();
            st.end_s = sc["end_s"].get<double>();
            switch (st.kind) {
            case HifStageKind::InitialSawtooth:
                st.peak_a = sc["peak_a"].get_or(0.5);
                break;
            case HifStageKind::Sizzling:
                st.peak_a = sc["peak_a"].get_or(2.0);
                break;
            case HifStageKind::NegativeHalfArc:
                st.arc = parse_arc(sc["arc"], ArcParams{});
                st.ignition_probability = sc["ignition_probability"].get_or(0.7);
                break;
            case HifStageKind::StableArc:
                st.arc = parse_arc(sc["arc"], ArcParams{});
                break;
            }
            if (min_start < 0.0 || st.start_s < min_start) min_start = st.start_s;
            f.schedule.stages.push_back(st);
        }
        if (min_start >= 0.0) f.onset_s = c["onset_s"].get_or(min_start);
    }
    return f;
}

} // namespace

AppConfig AppConfig::defaults() {
    AppConfig c;
    c.loads.per_phase[0].push_back(LoadSpec::heater());
    c.loads.per_phase[1].push_back(LoadSpec::heater());
    c.loads.per_phase[2].push_back(LoadSpec::light());
    c.heads = default_heads(c.geometry);
    return c;
}

std::vector<SensorHead> default_heads(const ConductorGeometry& geom, double pole_x_m,
                                      double top_offset_m, double separation_m) {
    const double plane = geom.plane_height();
    std::vector<SensorHead> heads(2);
    heads[0] = SensorHead{"h1", pole_x_m, plane - top_offset_m, {SensorAxis::X, SensorAxis::Z}};
    heads[1] = SensorHead{"h2", pole_x_m, plane - top_offset_m - separation_m,
                          {SensorAxis::X, SensorAxis::Z}};
    return heads;
}

AppConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    const Cursor root(&doc, "");
    AppConfig c = AppConfig::defaults();

    if (const Cursor g = root["geometry"]; g.present()) {
        const Cursor conductors = g["conductors"];
        conductors.require();
        if (conductors.array_size() != 4) {
            throw ConfigError(conductors.path() + ": exactly 4 conductors required");
        }
        for (std::size_t i = 0; i < 4; ++i) {
            const Cursor cc = conductors.at(i);
            Conductor& dst = c.geometry.conductors[i];
            const std::string label = cc["label"].get<std::string>();
            if (label.size() != 1) {
                throw ConfigError(cc["label"].path() + ": must be 'A', 'B', 'C' or 'N'");
            }
            dst.label = label[0];
            dst.x_m = cc["x_m"].get<double>();
            dst.height_m = cc["height_m"].get<double>();
            dst.gmr_m = cc["gmr_m"].get<double>();
            dst.radius_m = cc["radius_m"].get<double>();
            dst.r_ac_ohm_per_km = cc["r_ac_ohm_per_km"].get<double>();
        }
        c.geometry.validate();
    }

    if (const Cursor l = root["line"]; l.present()) {
        c.frequency_hz = l["frequency_hz"].get_or(c.frequency_hz);
        c.earth_resistivity_ohm_m =
            l["earth_resistivity_ohm_m"].get_or(c.earth_resistivity_ohm_m);
    }
    if (const Cursor f = root["feeder"]; f.present()) {
        c.feeder_length_m = f["length_m"].get_or(c.feeder_length_m);
        c.feeder_step_m = f["step_m"].get_or(c.feeder_step_m);
    }
    if (const Cursor s = root["source"]; s.present()) {
        c.source.phase_voltage_v = s["phase_voltage_v"].get_or(c.source.phase_voltage_v);
        c.source.frequency_hz = s["frequency_hz"].get_or(c.frequency_hz);
    } else {
        c.source.frequency_hz = c.frequency_hz;
    }

    if (const Cursor l = root["loads"]; l.present()) {
        for (int p = 0; p < 3; ++p) {
            const std::string key(1, static_cast<char>('A' + p));
            const Cursor pc = l[key];
            if (!pc.present()) continue;
            auto& dst = c.loads.per_phase[static_cast<std::size_t>(p)];
            dst.clear();
            for (std::size_t i = 0; i < pc.array_size(); ++i) {
                dst.push_back(parse_load_element(pc.at(i)));
            }
        }
        c.loads.validate();
    }

    if (const Cursor f = root["fault"]; f.present()) {
        c.fault = parse_fault(f);
    }

    if (const Cursor s = root["sim"]; s.present()) {
        c.duration_s = s["duration_s"].get_or(c.duration_s);
        c.sample_rate_hz = s["sample_rate_hz"].get_or(c.sample_rate_hz);
    }

    if (const Cursor s = root["sensors"]; s.present()) {
        if (const Cursor heads = s["heads"]; heads.present()) {
            c.heads.clear();
            for (std::size_t i = 0; i < heads.array_size(); ++i) {
                const Cursor hc = heads.at(i);
                SensorHead head;
                head.label = hc["label"].get_or(std::string("h") + std::to_string(i + 1));
                head.x_m = hc["x_m"].get<double>();
                head.height_m = hc["height_m"].get<double>();
                if (const Cursor axes = hc["axes"]; axes.present()) {
                    head.axes.clear();
                    for (std::size_t a = 0; a < axes.array_size(); ++a) {
                        const std::string ax = axes.at(a).get<std::string>();
                        if (ax.size() != 1) {
                            throw ConfigError(axes.at(a).path() + ": axis must be x, y or z");
                        }
                        head.axes.push_back(parse_axis(ax[0]));
                    }
                }
                c.heads.push_back(std::move(head));
            }
        }
        if (const Cursor m = s["model"]; m.present()) {
            c.sensor.sensitivity_v_per_t =
                m["sensitivity_v_per_t"].get_or(c.sensor.sensitivity_v_per_t);
            c.sensor.noise_density_t_per_sqrt_hz =
                m["noise_t_per_sqrt_hz"].get_or(c.sensor.noise_density_t_per_sqrt_hz);
            c.sensor.saturation_t = m["saturation_t"].get_or(c.sensor.saturation_t);
            c.sensor.offset_v = m["offset_v"].get_or(c.sensor.offset_v);
            c.sensor.validate();
        }
        c.condition_threshold = s["condition_threshold"].get_or(c.condition_threshold);
    }

    if (const Cursor f = root["features"]; f.present()) {
        c.cycles_per_window = f["cycles_per_window"].get_or(c.cycles_per_window);
        c.overlap = f["overlap"].get_or(c.overlap);
    }

    c.dataset.geometry = c.geometry;
    c.dataset.source = c.source;
    c.dataset.earth_resistivity_ohm_m = c.earth_resistivity_ohm_m;
    c.dataset.step_m = c.feeder_step_m;
    c.dataset.sensor = c.sensor;
    c.dataset.sample_rate_hz = c.sample_rate_hz;
    c.dataset.cycles_per_window = c.cycles_per_window;
    c.dataset.overlap = c.overlap;
    if (const Cursor d = root["dataset"]; d.present()) {
        if (const Cursor lengths = d["lengths_m"]; lengths.present()) {
            c.dataset.lengths_m.clear();
            for (std::size_t i = 0; i < lengths.array_size(); ++i) {
                c.dataset.lengths_m.push_back(lengths.at(i).get<double>());
            }
        }
        if (const Cursor offsets = d["head_offsets_m"]; offsets.present()) {
            c.dataset.head_offsets_m.clear();
            for (std::size_t i = 0; i < offsets.array_size(); ++i) {
                c.dataset.head_offsets_m.push_back(offsets.at(i).get<double>());
            }
        }
        c.dataset.head_separation_m = d["head_separation_m"].get_or(c.dataset.head_separation_m);
        c.dataset.pole_x_m = d["pole_x_m"].get_or(c.dataset.pole_x_m);
        c.dataset.runs_per_class = d["runs_per_class"].get_or(c.dataset.runs_per_class);
        c.dataset.duration_s = d["duration_s"].get_or(c.dataset.duration_s);
        c.dataset.features_from_reconstruction =
            d["features_from_reconstruction"].get_or(c.dataset.features_from_reconstruction);
        c.dataset.label_coverage = d["label_coverage"].get_or(c.dataset.label_coverage);
    }

    if (const Cursor t = root["train"]; t.present()) {
        c.train.model_kind = t["model"].get_or(c.train.model_kind);
        c.train.hidden_width = t["hidden_width"].get_or(c.train.hidden_width);
        c.train.epochs = t["epochs"].get_or(c.train.epochs);
        c.train.batch_size = t["batch_size"].get_or(c.train.batch_size);
        c.train.learning_rate = t["learning_rate"].get_or(c.train.learning_rate);
        c.train.validation_fraction =
            t["validation_fraction"].get_or(c.train.validation_fraction);
        c.train.feature_mode = t["feature_mode"].get_or(c.train.feature_mode);
        c.train.validate();
    }
    return c;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

SimConfig make_sim_config(const AppConfig& config) {
    SimConfig sim;
    sim.source = config.source;
    const auto params =
        line_parameters(config.geometry, config.source.frequency_hz,
                        config.earth_resistivity_ohm_m);
    sim.feeder = build_feeder(params, config.feeder_length_m, config.feeder_step_m);
    sim.loads = config.loads;
    sim.fault = config.fault;
    sim.duration_s = config.duration_s;
    sim.sample_interval_s = 1.0 / config.sample_rate_hz;
    sim.validate();
    return sim;
}

} // namespace hifsense

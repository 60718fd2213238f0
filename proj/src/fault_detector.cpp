#include "hifsense/fault_detector.hpp"

#include "hifsense/current_inverse.hpp"

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace hifsense {

namespace {

using nlohmann::json;

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash = 14695981039346656037ull) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ull;
    }
    return hash;
}

std::uint64_t mix_seed(std::uint64_t seed, const std::string& tag) {
    return fnv1a64(tag.data(), tag.size(), seed ^ 0x9e3779b97f4a7c15ull);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

const char* class_name(ClassLabel label) {
    switch (label) {
    case ClassLabel::Normal: return "normal";
    case ClassLabel::Lif: return "lif";
    case ClassLabel::NonArcingHif: return "non_arcing_hif";
    case ClassLabel::ArcingHif: return "arcing_hif";
    }
    return "unknown";
}

ClassLabel parse_class_name(const std::string& name) {
    for (int i = 0; i < kClassCount; ++i) {
        if (name == class_name(static_cast<ClassLabel>(i))) return static_cast<ClassLabel>(i);
    }
    throw std::invalid_argument("unknown class label '" + name + "'");
}

void DatasetConfig::validate() const {
    geometry.validate();
    source.validate();
    sensor.validate();
    if (lengths_m.empty()) throw std::invalid_argument("DatasetConfig: no circuit lengths");
    if (head_offsets_m.empty()) throw std::invalid_argument("DatasetConfig: no head offsets");
    if (runs_per_class < 1) throw std::invalid_argument("DatasetConfig: runs_per_class must be >= 1");
    if (duration_s <= 0.0) throw std::invalid_argument("DatasetConfig: duration must be > 0");
    if (label_coverage <= 0.5 || label_coverage > 1.0) {
        throw std::invalid_argument("DatasetConfig: label coverage must be in (0.5, 1]");
    }
}

namespace {

struct Scenario {
    ClassLabel cls = ClassLabel::Normal;
    double length_m = 600.0;
    double head_offset_m = 0.42;
    int run = 0;
    std::string id;
    std::uint64_t seed = 0;
};

/// Piecewise-constant label timeline of one scenario.
struct LabelTimeline {
    struct Piece {
        double start, end;
        ClassLabel label;
    };
    std::vector<Piece> pieces;

    void add(double start, double end, ClassLabel label) {
        if (end > start) pieces.push_back({start, end, label});
    }

    [[nodiscard]] ClassLabel dominant(double a, double b, double min_coverage,
                                      bool& accept) const {
        std::array<double, kClassCount> measure{};
        double total = b - a;
        double faulted = 0.0;
        for (const auto& p : pieces) {
            const double lo = std::max(a, p.start);
            const double hi = std::min(b, p.end);
            if (hi > lo) {
                measure[static_cast<std::size_t>(p.label)] += hi - lo;
                faulted += hi - lo;
            }
        }
        measure[0] += total - faulted; // anything uncovered is normal
        std::size_t best = 0;
        for (std::size_t i = 1; i < measure.size(); ++i) {
            if (measure[i] > measure[best]) best = i;
        }
        accept = measure[best] >= min_coverage * total;
        return static_cast<ClassLabel>(best);
    }
};

ClassLabel stage_class(HifStageKind kind) {
    switch (kind) {
    case HifStageKind::InitialSawtooth:
    case HifStageKind::Sizzling:
        return ClassLabel::NonArcingHif;
    case HifStageKind::NegativeHalfArc:
    case HifStageKind::StableArc:
        return ClassLabel::ArcingHif;
    }
    return ClassLabel::Normal;
}

std::vector<LabeledWindow> run_scenario(const DatasetConfig& cfg, const Scenario& sc) {
    std::mt19937_64 rng(sc.seed);
    auto uniform = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    // Unbalanced household load mix with a mid-run switching event.
    LoadSpec loads;
    const double heater_a = uniform(18.0, 30.0);
    const double heater_b = uniform(18.0, 30.0);
    const double light_c = uniform(420.0, 650.0);
    loads.per_phase[0].push_back({heater_a, 1e-3, 0.0, std::nullopt});
    loads.per_phase[1].push_back({heater_b, 1e-3, 0.0, std::nullopt});
    loads.per_phase[2].push_back({light_c, 50e-3, 0.0, std::nullopt});
    const int switch_phase = static_cast<int>(rng() % 3);
    const double switch_on = uniform(0.3, 0.6) * cfg.duration_s;
    loads.per_phase[static_cast<std::size_t>(switch_phase)].push_back(
        {uniform(25.0, 60.0), 2e-3, switch_on, std::nullopt});

    const auto params =
        line_parameters(cfg.geometry, cfg.source.frequency_hz, cfg.earth_resistivity_ohm_m);
    const auto feeder = build_feeder(params, sc.length_m, cfg.step_m);
    const int node_count = static_cast<int>(feeder.node_count());

    SimConfig sim_cfg;
    sim_cfg.source = cfg.source;
    sim_cfg.feeder = feeder;
    sim_cfg.loads = loads;
    sim_cfg.duration_s = cfg.duration_s;
    sim_cfg.sample_interval_s = 1.0 / cfg.sample_rate_hz;

    const Phase fault_phase = static_cast<Phase>(sc.run % 3);
    LabelTimeline timeline;
    if (sc.cls != ClassLabel::Normal) {
        FaultSpec fault;
        fault.phase = fault_phase;
        fault.node_index = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(node_count - 1));
        if (sc.cls == ClassLabel::Lif) {
            fault.kind = FaultKind::Lif;
            fault.onset_s = uniform(0.2, 0.4) * cfg.duration_s;
            fault.limiting_resistance_ohm =
                lif_limiting_resistance(uniform(26.0, 46.0), cfg.source);
            timeline.add(fault.onset_s, cfg.duration_s, ClassLabel::Lif);
        } else {
            fault.kind = FaultKind::Hif;
            const double t0 = uniform(0.1, 0.2) * cfg.duration_s;
            const double tm = uniform(0.5, 0.6) * cfg.duration_s;
            const double t1 = cfg.duration_s;
            fault.onset_s = t0;
            if (sc.cls == ClassLabel::NonArcingHif) {
                HifStageSpec saw;
                saw.kind = HifStageKind::InitialSawtooth;
                saw.start_s = t0;
                saw.end_s = tm;
                saw.peak_a = uniform(0.3, 0.8);
                HifStageSpec sizzle;
                sizzle.kind = HifStageKind::Sizzling;
                sizzle.start_s = tm;
                sizzle.end_s = t1;
                sizzle.peak_a = uniform(1.2, 3.0);
                fault.schedule.stages = {saw, sizzle};
            } else {
                ArcParams arc;
                arc.positive_threshold_v = uniform(60.0, 100.0);
                arc.negative_threshold_v = uniform(60.0, 100.0);
                arc.positive_resistance_ohm = uniform(30.0, 60.0);
                arc.negative_resistance_ohm = uniform(30.0, 60.0);
                HifStageSpec neg;
                neg.kind = HifStageKind::NegativeHalfArc;
                neg.start_s = t0;
                neg.end_s = tm;
                neg.arc = arc;
                neg.ignition_probability = 0.7;
                HifStageSpec stable;
                stable.kind = HifStageKind::StableArc;
                stable.start_s = tm;
                stable.end_s = t1;
                stable.arc = arc;
                fault.schedule.stages = {neg, stable};
            }
            for (const auto& st : fault.schedule.stages) {
                timeline.add(st.start_s, st.end_s, stage_class(st.kind));
            }
        }
        sim_cfg.fault = fault;
    }

    const WaveformRecord record = simulate(sim_cfg, sc.seed);

    // Sensing chain at this grid point's head pair.
    const double plane = cfg.geometry.plane_height();
    std::vector<SensorHead> heads(2);
    heads[0] = SensorHead{"h1", cfg.pole_x_m, plane - sc.head_offset_m, {SensorAxis::X, SensorAxis::Z}};
    heads[1] = SensorHead{"h2", cfg.pole_x_m,
                          plane - sc.head_offset_m - cfg.head_separation_m,
                          {SensorAxis::X, SensorAxis::Z}};

    const WaveformRecord fields = compute_fields(record, cfg.geometry, heads, false);
    const WaveformRecord sensed = transduce(fields, cfg.sensor, mix_seed(sc.seed, "noise"));

    std::string channel;
    WaveformRecord source_record;
    if (cfg.features_from_reconstruction) {
        const GeometryMatrix m = build_geometry_matrix(cfg.geometry, heads);
        ReconstructOptions opts;
        opts.parallel = false;
        source_record = reconstruct(to_field_units(sensed, cfg.sensor), m, opts).currents;
        channel = std::string("i_") + static_cast<char>('a' + static_cast<int>(fault_phase));
    } else {
        source_record = sensed;
        channel = heads[0].label + "_vx";
    }

    auto windows = make_windows(source_record, channel, cfg.cycles_per_window, cfg.overlap,
                                cfg.source.frequency_hz);
    const auto features = extract_features_batch(windows, false);

    std::vector<LabeledWindow> out;
    const double window_len =
        static_cast<double>(windows.empty() ? 0 : windows.front().samples.size()) /
        cfg.sample_rate_hz;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        bool accept = true;
        const double a = windows[i].start_time_s;
        const ClassLabel label = timeline.dominant(a, a + window_len, cfg.label_coverage, accept);
        if (!accept) continue;
        LabeledWindow lw;
        lw.features = features[i];
        lw.label = label;
        lw.scenario_id = sc.id;
        lw.seed = sc.seed;
        lw.window_start_s = a;
        out.push_back(std::move(lw));
    }
    return out;
}

} // namespace

Corpus generate_dataset(const DatasetConfig& config, std::uint64_t seed) {
    config.validate();

    std::vector<Scenario> scenarios;
    for (int cls = 0; cls < kClassCount; ++cls) {
        for (double length : config.lengths_m) {
            for (double offset : config.head_offsets_m) {
                for (int run = 0; run < config.runs_per_class; ++run) {
                    Scenario sc;
                    sc.cls = static_cast<ClassLabel>(cls);
                    sc.length_m = length;
                    sc.head_offset_m = offset;
                    sc.run = run;
                    std::ostringstream id;
                    id << class_name(sc.cls) << "_L" << length << "_o" << offset << "_r" << run;
                    sc.id = id.str();
                    sc.seed = mix_seed(seed, sc.id);
                    scenarios.push_back(std::move(sc));
                }
            }
        }
    }

    std::vector<std::vector<LabeledWindow>> results(scenarios.size());
    std::vector<std::string> errors(scenarios.size());
    const auto count = static_cast<std::int64_t>(scenarios.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::int64_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        try {
            results[u] = run_scenario(config, scenarios[u]);
        } catch (const std::exception& e) {
            errors[u] = e.what();
        }
    }
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        if (!errors[i].empty()) {
            throw std::runtime_error("generate_dataset: scenario '" + scenarios[i].id +
                                     "' failed: " + errors[i]);
        }
    }

    Corpus corpus;
    for (auto& r : results) {
        corpus.insert(corpus.end(), std::make_move_iterator(r.begin()),
                      std::make_move_iterator(r.end()));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

namespace {

/// Transformed input the model actually sees. "shape" drops the absolute
/// scale: amplitude features are divided by the window RMS.
std::vector<double> transform_features(const FeatureVector& f, const std::string& mode) {
    const auto flat = f.flat();
    if (mode == "full") {
        return {flat.begin(), flat.end()};
    }
    if (mode != "shape") {
        throw std::invalid_argument("unknown feature mode '" + mode + "'");
    }
    const double rms = flat[0];
    auto rel = [rms](double v) { return rms > 0.0 ? v / rms : 0.0; };
    std::vector<double> out;
    out.reserve(FeatureVector::size - 1);
    out.push_back(rel(flat[1])); // dc
    out.push_back(rel(flat[2])); // fundamental
    for (std::size_t i = 3; i <= 14; ++i) out.push_back(rel(flat[i]));
    out.push_back(flat[15]); // thd
    out.push_back(flat[16]); // even/odd
    out.push_back(flat[17]); // asymmetry
    out.push_back(flat[18]); // crest
    out.push_back(rel(flat[19])); // envelope mean
    out.push_back(rel(flat[20])); // envelope std
    out.push_back(flat[21]); // modulation index
    out.push_back(flat[22]); // interharmonic fraction
    return out;
}

struct Mlp {
    std::vector<int> sizes; // input, hidden..., output
    std::vector<double> params;

    [[nodiscard]] static std::size_t param_count(const std::vector<int>& sizes) {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            n += static_cast<std::size_t>(sizes[l]) * static_cast<std::size_t>(sizes[l + 1]) +
                 static_cast<std::size_t>(sizes[l + 1]);
        }
        return n;
    }

    void init(std::uint64_t seed) {
        params.assign(param_count(sizes), 0.0);
        std::mt19937_64 rng(seed);
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const int fan_in = sizes[l];
            const int fan_out = sizes[l + 1];
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> u(-limit, limit);
            for (int i = 0; i < fan_in * fan_out; ++i) params[off++] = u(rng);
            off += static_cast<std::size_t>(fan_out); // biases start at zero
        }
    }

    /// Forward pass; per-layer activations are written to `acts` (layer 0 is
    /// the input) for use by the backward pass.
    void forward(const std::vector<double>& x, std::vector<std::vector<double>>& acts) const {
        acts.assign(sizes.size(), {});
        acts[0] = x;
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const int in = sizes[l];
            const int out = sizes[l + 1];
            acts[l + 1].assign(static_cast<std::size_t>(out), 0.0);
            const double* w = params.data() + off;
            const double* b = params.data() + off + static_cast<std::size_t>(in) * out;
            for (int o = 0; o < out; ++o) {
                double z = b[o];
                const double* wrow = w + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) z += wrow[i] * acts[l][static_cast<std::size_t>(i)];
                const bool last = (l + 2 == sizes.size());
                acts[l + 1][static_cast<std::size_t>(o)] = last ? z : std::tanh(z);
            }
            off += static_cast<std::size_t>(in) * out + static_cast<std::size_t>(out);
        }
    }

    /// Cross-entropy gradient accumulation for one sample; returns the loss.
    double backward(const std::vector<std::vector<double>>& acts, int target,
                    std::vector<double>& grad) const {
        const auto layers = sizes.size();
        const auto& logits = acts[layers - 1];
        std::vector<double> probs = softmax(logits);
        std::vector<double> delta(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
            delta[i] = probs[i] - (static_cast<int>(i) == target ? 1.0 : 0.0);
        }
        const double loss = -std::log(std::max(probs[static_cast<std::size_t>(target)], 1e-300));

        // Layer offsets, innermost last.
        std::vector<std::size_t> offsets(layers - 1);
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < layers; ++l) {
            offsets[l] = off;
            off += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] +
                   static_cast<std::size_t>(sizes[l + 1]);
        }
        for (std::size_t l = layers - 1; l-- > 0;) {
            const int in = sizes[l];
            const int out = sizes[l + 1];
            const double* w = params.data() + offsets[l];
            double* gw = grad.data() + offsets[l];
            double* gb = grad.data() + offsets[l] + static_cast<std::size_t>(in) * out;
            std::vector<double> prev_delta(static_cast<std::size_t>(in), 0.0);
            for (int o = 0; o < out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                gb[o] += d;
                const double* wrow = w + static_cast<std::size_t>(o) * in;
                double* gwrow = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) {
                    gwrow[i] += d * acts[l][static_cast<std::size_t>(i)];
                    prev_delta[static_cast<std::size_t>(i)] += d * wrow[i];
                }
            }
            if (l > 0) {
                for (int i = 0; i < in; ++i) {
                    const double a = acts[l][static_cast<std::size_t>(i)];
                    prev_delta[static_cast<std::size_t>(i)] *= (1.0 - a * a); // tanh'
                }
            }
            delta = std::move(prev_delta);
        }
        return loss;
    }

    static std::vector<double> softmax(const std::vector<double>& logits) {
        const double mx = *std::max_element(logits.begin(), logits.end());
        std::vector<double> p(logits.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            p[i] = std::exp(logits[i] - mx);
            sum += p[i];
        }
        for (auto& v : p) v /= sum;
        return p;
    }
};

std::vector<double> normalize(const std::vector<double>& x, const ClassifierModel& model) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = (x[i] - model.feature_mean[i]) / model.feature_scale[i];
    }
    return out;
}

std::array<double, kClassCount> score_sample(const ClassifierModel& model,
                                             const std::vector<double>& transformed) {
    if (transformed.size() != model.feature_count()) {
        throw std::invalid_argument("classify: feature dimension mismatch with model");
    }
    for (double v : transformed) {
        if (!std::isfinite(v)) throw std::invalid_argument("classify: non-finite feature");
    }
    const std::vector<double> x = normalize(transformed, model);

    std::vector<double> probs;
    if (model.kind == "mlp") {
        Mlp net;
        net.sizes = model.layer_sizes;
        net.params = model.parameters;
        std::vector<std::vector<double>> acts;
        net.forward(x, acts);
        probs = Mlp::softmax(acts.back());
    } else if (model.kind == "nearest_centroid") {
        const std::size_t f = model.feature_count();
        std::vector<double> neg_d2(kClassCount);
        for (int c = 0; c < kClassCount; ++c) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < f; ++i) {
                const double d = x[i] - model.parameters[static_cast<std::size_t>(c) * f + i];
                d2 += d * d;
            }
            neg_d2[static_cast<std::size_t>(c)] = -d2;
        }
        probs = Mlp::softmax(neg_d2);
    } else {
        throw std::invalid_argument("unknown model kind '" + model.kind + "'");
    }

    std::array<double, kClassCount> scores{};
    for (int i = 0; i < kClassCount; ++i) scores[static_cast<std::size_t>(i)] = probs[static_cast<std::size_t>(i)];
    return scores;
}

std::uint64_t corpus_hash(const Corpus& corpus) {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& lw : corpus) {
        const auto flat = lw.features.flat();
        h = fnv1a64(flat.data(), flat.size() * sizeof(double), h);
        const int label = static_cast<int>(lw.label);
        h = fnv1a64(&label, sizeof(label), h);
    }
    return h;
}

} // namespace

void TrainConfig::validate() const {
    if (model_kind != "mlp" && model_kind != "nearest_centroid") {
        throw std::invalid_argument("TrainConfig: model kind must be mlp or nearest_centroid");
    }
    if (feature_mode != "shape" && feature_mode != "full") {
        throw std::invalid_argument("TrainConfig: feature mode must be shape or full");
    }
    if (hidden_width < 1 || epochs < 1 || batch_size < 1) {
        throw std::invalid_argument("TrainConfig: invalid sizes");
    }
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0) {
        throw std::invalid_argument("TrainConfig: validation fraction must be in (0, 1)");
    }
}

ClassifierModel train(const Corpus& corpus, const TrainConfig& config, std::uint64_t seed) {
    config.validate();
    if (corpus.empty()) throw std::invalid_argument("train: empty corpus");

    // Transform features, rejecting non-finite rows.
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t rejected = 0;
    for (const auto& lw : corpus) {
        auto t = transform_features(lw.features, config.feature_mode);
        const bool finite = std::all_of(t.begin(), t.end(),
                                        [](double v) { return std::isfinite(v); });
        if (!finite) {
            ++rejected;
            continue;
        }
        rows.push_back(std::move(t));
        labels.push_back(static_cast<int>(lw.label));
    }
    if (rows.empty()) throw std::invalid_argument("train: no finite feature rows");

    std::array<int, kClassCount> class_counts{};
    for (int l : labels) class_counts[static_cast<std::size_t>(l)]++;
    const int present =
        static_cast<int>(std::count_if(class_counts.begin(), class_counts.end(),
                                       [](int c) { return c > 0; }));
    if (present < 2) {
        throw std::invalid_argument(
            "train: corpus must contain at least 2 classes (got 1); "
            "add scenarios for the missing labels");
    }

    // Stratified train/validation split.
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    for (int c = 0; c < kClassCount; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) idx.push_back(i);
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto val_count = static_cast<std::size_t>(
            std::floor(config.validation_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < val_count ? val_idx : train_idx).push_back(idx[i]);
        }
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    const std::size_t features = rows.front().size();
    ClassifierModel model;
    model.kind = config.model_kind;
    model.feature_mode = config.feature_mode;
    model.feature_mean.assign(features, 0.0);
    model.feature_scale.assign(features, 1.0);

    for (std::size_t i : train_idx) {
        for (std::size_t fidx = 0; fidx < features; ++fidx) model.feature_mean[fidx] += rows[i][fidx];
    }
    for (auto& m : model.feature_mean) m /= static_cast<double>(train_idx.size());
    std::vector<double> var(features, 0.0);
    for (std::size_t i : train_idx) {
        for (std::size_t fidx = 0; fidx < features; ++fidx) {
            const double d = rows[i][fidx] - model.feature_mean[fidx];
            var[fidx] += d * d;
        }
    }
    for (std::size_t fidx = 0; fidx < features; ++fidx) {
        model.feature_scale[fidx] =
            std::max(std::sqrt(var[fidx] / static_cast<double>(train_idx.size())), 1e-12);
    }

    auto normalized = [&](std::size_t i) {
        std::vector<double> x(features);
        for (std::size_t fidx = 0; fidx < features; ++fidx) {
            x[fidx] = (rows[i][fidx] - model.feature_mean[fidx]) / model.feature_scale[fidx];
        }
        return x;
    };

    if (config.model_kind == "mlp") {
        Mlp net;
        net.sizes = {static_cast<int>(features), config.hidden_width, config.hidden_width,
                     kClassCount};
        net.init(mix_seed(seed, "init"));

        const std::size_t pcount = net.params.size();
        std::vector<double> m_adam(pcount, 0.0);
        std::vector<double> v_adam(pcount, 0.0);
        std::vector<double> grad(pcount, 0.0);
        const double b1 = 0.9;
        const double b2 = 0.999;
        const double eps = 1e-8;
        long step = 0;

        std::vector<std::size_t> order = train_idx;
        std::vector<std::vector<double>> acts;
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t stop =
                    std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
                std::fill(grad.begin(), grad.end(), 0.0);
                for (std::size_t k = start; k < stop; ++k) {
                    const std::size_t i = order[k];
                    net.forward(normalized(i), acts);
                    net.backward(acts, labels[i], grad);
                }
                const double scale = 1.0 / static_cast<double>(stop - start);
                ++step;
                const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
                const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
                for (std::size_t p = 0; p < pcount; ++p) {
                    const double g = grad[p] * scale;
                    m_adam[p] = b1 * m_adam[p] + (1.0 - b1) * g;
                    v_adam[p] = b2 * v_adam[p] + (1.0 - b2) * g * g;
                    net.params[p] -= config.learning_rate * (m_adam[p] / bc1) /
                                     (std::sqrt(v_adam[p] / bc2) + eps);
                }
            }
        }
        model.layer_sizes = net.sizes;
        model.parameters = std::move(net.params);
    } else {
        // Nearest centroid in normalized feature space.
        model.layer_sizes = {static_cast<int>(features), kClassCount};
        model.parameters.assign(static_cast<std::size_t>(kClassCount) * features, 0.0);
        std::array<int, kClassCount> counts{};
        for (std::size_t i : train_idx) {
            const auto x = normalized(i);
            const auto c = static_cast<std::size_t>(labels[i]);
            counts[c]++;
            for (std::size_t fidx = 0; fidx < features; ++fidx) {
                model.parameters[c * features + fidx] += x[fidx];
            }
        }
        for (int c = 0; c < kClassCount; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) continue;
            for (std::size_t fidx = 0; fidx < features; ++fidx) {
                model.parameters[static_cast<std::size_t>(c) * features + fidx] /=
                    counts[static_cast<std::size_t>(c)];
            }
        }
    }

    // Validation metrics.
    int correct = 0;
    int fault_total = 0;
    int fault_detected = 0;
    for (std::size_t i : val_idx) {
        const auto scores = score_sample(model, rows[i]);
        const int pred = static_cast<int>(
            std::max_element(scores.begin(), scores.end()) - scores.begin());
        if (pred == labels[i]) ++correct;
        if (labels[i] != 0) {
            ++fault_total;
            if (pred != 0) ++fault_detected;
        }
    }
    const double val_acc =
        val_idx.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(val_idx.size());
    const double val_fault_recall =
        fault_total == 0 ? 0.0 : static_cast<double>(fault_detected) / fault_total;

    json meta;
    meta["seed"] = seed;
    meta["corpus_hash"] = corpus_hash(corpus);
    meta["corpus_rows"] = rows.size();
    meta["rejected_rows"] = rejected;
    meta["validation_rows"] = val_idx.size();
    meta["validation_accuracy"] = val_acc;
    meta["validation_fault_recall"] = val_fault_recall;
    meta["epochs"] = config.epochs;
    meta["learning_rate"] = config.learning_rate;
    const auto now = std::chrono::system_clock::now();
    meta["timestamp_unix"] = std::chrono::duration_cast<std::chrono::seconds>(
                                 now.time_since_epoch())
                                 .count();
    model.metadata_json = meta.dump();
    return model;
}

std::pair<ClassLabel, std::array<double, kClassCount>> classify(const ClassifierModel& model,
                                                                const FeatureVector& features) {
    const auto scores = score_sample(model, transform_features(features, model.feature_mode));
    const auto best = static_cast<int>(
        std::max_element(scores.begin(), scores.end()) - scores.begin());
    return {static_cast<ClassLabel>(best), scores};
}

EvaluationReport evaluate(const ClassifierModel& model, const Corpus& corpus) {
    if (corpus.empty()) throw std::invalid_argument("evaluate: empty corpus");
    std::array<std::array<int, kClassCount>, kClassCount> confusion{};
    for (const auto& lw : corpus) {
        const auto [pred, scores] = classify(model, lw.features);
        confusion[static_cast<std::size_t>(lw.label)][static_cast<std::size_t>(pred)]++;
    }
    return report_from_confusion(confusion);
}

EvaluationReport report_from_confusion(
    const std::array<std::array<int, kClassCount>, kClassCount>& confusion) {
    EvaluationReport report;
    report.confusion = confusion;

    int correct = 0;
    std::array<int, kClassCount> row_sums{};
    std::array<int, kClassCount> col_sums{};
    for (int t = 0; t < kClassCount; ++t) {
        for (int p = 0; p < kClassCount; ++p) {
            const int c = report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
            row_sums[static_cast<std::size_t>(t)] += c;
            col_sums[static_cast<std::size_t>(p)] += c;
            report.total += c;
            if (t == p) correct += c;
        }
    }
    if (report.total == 0) throw std::invalid_argument("report_from_confusion: empty matrix");
    report.accuracy = static_cast<double>(correct) / report.total;
    for (int c = 0; c < kClassCount; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        report.recall[ci] = row_sums[ci] > 0
                                ? static_cast<double>(report.confusion[ci][ci]) / row_sums[ci]
                                : 0.0;
        report.precision[ci] = col_sums[ci] > 0
                                   ? static_cast<double>(report.confusion[ci][ci]) / col_sums[ci]
                                   : 0.0;
    }

    int fault_total = 0;
    int fault_detected = 0;
    for (int t = 1; t < kClassCount; ++t) {
        for (int p = 0; p < kClassCount; ++p) {
            const int c = report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
            fault_total += c;
            if (p != 0) fault_detected += c;
        }
    }
    report.fault_vs_normal_recall =
        fault_total > 0 ? static_cast<double>(fault_detected) / fault_total : 0.0;
    report.normal_correct_rate = report.recall[0];
    const int arcing_total = row_sums[static_cast<std::size_t>(ClassLabel::ArcingHif)];
    report.arcing_to_nonarcing_rate =
        arcing_total > 0
            ? static_cast<double>(
                  report.confusion[static_cast<std::size_t>(ClassLabel::ArcingHif)]
                                  [static_cast<std::size_t>(ClassLabel::NonArcingHif)]) /
                  arcing_total
            : 0.0;
    return report;
}

std::string report_table(const EvaluationReport& report) {
    std::ostringstream out;
    out << "confusion matrix (rows = true, cols = predicted)\n";
    out << "                ";
    for (int p = 0; p < kClassCount; ++p) {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%16s", class_name(static_cast<ClassLabel>(p)));
        out << buf;
    }
    out << '\n';
    for (int t = 0; t < kClassCount; ++t) {
        char name[20];
        std::snprintf(name, sizeof(name), "%16s", class_name(static_cast<ClassLabel>(t)));
        out << name;
        for (int p = 0; p < kClassCount; ++p) {
            char buf[20];
            std::snprintf(buf, sizeof(buf), "%16d",
                          report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
            out << buf;
        }
        out << '\n';
    }
    out << '\n';
    char line[160];
    out << "per-class precision / recall\n";
    for (int c = 0; c < kClassCount; ++c) {
        std::snprintf(line, sizeof(line), "%16s  precision %.4f  recall %.4f\n",
                      class_name(static_cast<ClassLabel>(c)),
                      report.precision[static_cast<std::size_t>(c)],
                      report.recall[static_cast<std::size_t>(c)]);
        out << line;
    }
    out << '\n';
    std::snprintf(line, sizeof(line), "overall accuracy        %.4f\n", report.accuracy);
    out << line;
    out << '\n';
    out << "aggregate                   measured   reference\n";
    std::snprintf(line, sizeof(line), "fault detected as fault     %.4f     %.4f\n",
                  report.fault_vs_normal_recall, EvaluationReport::reference_fault_detection);
    out << line;
    std::snprintf(line, sizeof(line), "normal correct              %.4f     %.4f\n",
                  report.normal_correct_rate, EvaluationReport::reference_normal_correct);
    out << line;
    std::snprintf(line, sizeof(line), "arcing -> non-arcing        %.4f     %.4f\n",
                  report.arcing_to_nonarcing_rate, EvaluationReport::reference_arcing_confusion);
    out << line;
    return out.str();
}

std::string report_json(const EvaluationReport& report) {
    json j;
    for (int t = 0; t < kClassCount; ++t) {
        for (int p = 0; p < kClassCount; ++p) {
            j["confusion"][class_name(static_cast<ClassLabel>(t))]
             [class_name(static_cast<ClassLabel>(p))] =
                 report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        }
    }
    for (int c = 0; c < kClassCount; ++c) {
        j["precision"][class_name(static_cast<ClassLabel>(c))] =
            report.precision[static_cast<std::size_t>(c)];
        j["recall"][class_name(static_cast<ClassLabel>(c))] =
            report.recall[static_cast<std::size_t>(c)];
    }
    j["accuracy"] = report.accuracy;
    j["total"] = report.total;
    j["fault_vs_normal_recall"] = report.fault_vs_normal_recall;
    j["normal_correct_rate"] = report.normal_correct_rate;
    j["arcing_to_nonarcing_rate"] = report.arcing_to_nonarcing_rate;
    j["reference"]["fault_vs_normal_recall"] = EvaluationReport::reference_fault_detection;
    j["reference"]["normal_correct_rate"] = EvaluationReport::reference_normal_correct;
    j["reference"]["arcing_to_nonarcing_rate"] = EvaluationReport::reference_arcing_confusion;
    return j.dump(2);
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double holdout_fraction,
                                       std::uint64_t seed) {
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
        throw std::invalid_argument("split_corpus: fraction must be in (0, 1)");
    }
    std::mt19937_64 rng(seed);
    Corpus rest;
    Corpus holdout;
    for (int c = 0; c < kClassCount; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (static_cast<int>(corpus[i].label) == c) idx.push_back(i);
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto hold = static_cast<std::size_t>(
            std::floor(holdout_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < hold ? holdout : rest).push_back(corpus[idx[i]]);
        }
    }
    return {std::move(rest), std::move(holdout)};
}

// ---------------------------------------------------------------------------
// Corpus and model files
// ---------------------------------------------------------------------------

void write_corpus_csv(const Corpus& corpus, const std::filesystem::path& path) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("write_corpus_csv: cannot open " + tmp);
        for (std::size_t i = 0; i < FeatureVector::size; ++i) {
            out << FeatureVector::names()[i] << ',';
        }
        out << "label,scenario_id,seed,window_start_s\n";
        for (const auto& lw : corpus) {
            const auto flat = lw.features.flat();
            for (double v : flat) out << format_double(v) << ',';
            out << class_name(lw.label) << ',' << lw.scenario_id << ',' << lw.seed << ','
                << format_double(lw.window_start_s) << '\n';
        }
        if (!out) throw std::runtime_error("write_corpus_csv: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Corpus read_corpus_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_corpus_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_corpus_csv: empty file");

    Corpus corpus;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != FeatureVector::size + 4) {
            throw std::runtime_error("read_corpus_csv: bad column count on line " +
                                     std::to_string(line_no));
        }
        std::array<double, FeatureVector::size> flat{};
        for (std::size_t i = 0; i < FeatureVector::size; ++i) flat[i] = std::stod(cells[i]);
        LabeledWindow lw;
        lw.features = FeatureVector::from_flat(flat);
        lw.label = parse_class_name(cells[FeatureVector::size]);
        lw.scenario_id = cells[FeatureVector::size + 1];
        lw.seed = std::stoull(cells[FeatureVector::size + 2]);
        lw.window_start_s = std::stod(cells[FeatureVector::size + 3]);
        corpus.push_back(std::move(lw));
    }
    return corpus;
}

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw std::runtime_error(std::string("model file truncated reading ") + what);
    }
    return value;
}

} // namespace

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("save_model: cannot open " + tmp);
        out.write("HIFM", 4);
        write_le<std::uint8_t>(out, 1);

        json meta = model.metadata_json.empty() ? json::object()
                                                : json::parse(model.metadata_json);
        meta["kind"] = model.kind;
        meta["feature_mode"] = model.feature_mode;
        const std::string meta_text = meta.dump();
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
        out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));

        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.feature_mean.size()));
        for (double v : model.feature_mean) write_le<double>(out, v);
        for (double v : model.feature_scale) write_le<double>(out, v);
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.layer_sizes.size()));
        for (int v : model.layer_sizes) write_le<std::int32_t>(out, v);
        write_le<std::uint64_t>(out, model.parameters.size());
        for (double v : model.parameters) write_le<double>(out, v);
        if (!out) throw std::runtime_error("save_model: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "HIFM", 4) != 0) {
        throw std::runtime_error("load_model: bad magic (expected HIFM)");
    }
    const auto version = read_le<std::uint8_t>(in, "version");
    if (version != 1) {
        throw std::runtime_error("load_model: unsupported format version " +
                                 std::to_string(version));
    }
    const auto meta_len = read_le<std::uint32_t>(in, "metadata length");
    std::string meta_text(meta_len, '\0');
    if (!in.read(meta_text.data(), meta_len)) {
        throw std::runtime_error("load_model: truncated metadata");
    }
    const json meta = json::parse(meta_text);

    ClassifierModel model;
    model.kind = meta.at("kind").get<std::string>();
    model.feature_mode = meta.at("feature_mode").get<std::string>();
    model.metadata_json = meta_text;

    const auto features = read_le<std::uint32_t>(in, "feature count");
    model.feature_mean.resize(features);
    model.feature_scale.resize(features);
    for (auto& v : model.feature_mean) v = read_le<double>(in, "feature mean");
    for (auto& v : model.feature_scale) v = read_le<double>(in, "feature scale");
    const auto layers = read_le<std::uint32_t>(in, "layer count");
    model.layer_sizes.resize(layers);
    for (auto& v : model.layer_sizes) v = read_le<std::int32_t>(in, "layer size");
    const auto params = read_le<std::uint64_t>(in, "parameter count");
    model.parameters.resize(params);
    for (auto& v : model.parameters) v = read_le<double>(in, "parameter");
    return model;
}

} // namespace hifsense

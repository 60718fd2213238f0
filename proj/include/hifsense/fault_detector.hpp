#pragma once

#include "hifsense/feeder_sim.hpp"
#include "hifsense/line_network.hpp"
#include "hifsense/mag_sensing.hpp"
#include "hifsense/signal_features.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hifsense {

/// Four-class problem: Normal covers steady load and load switching; the
/// non-arcing class covers the sawtooth and sizzling stages; the arcing
/// class covers negative-half-cycle and stable arcing.
enum class ClassLabel : int {
    Normal = 0,
    Lif = 1,
    NonArcingHif = 2,
    ArcingHif = 3,
};

constexpr int kClassCount = 4;
const char* class_name(ClassLabel label);
ClassLabel parse_class_name(const std::string& name);

struct LabeledWindow {
    FeatureVector features;
    ClassLabel label = ClassLabel::Normal;
    std::string scenario_id;
    std::uint64_t seed = 0;
    double window_start_s = 0.0;
};

using Corpus = std::vector<LabeledWindow>;

/// Scenario grid for corpus generation: circuit lengths and sensor-head
/// offsets are swept per class; every run goes through the full chain
/// (simulate -> fields -> transduce -> reconstruct -> windows) unless
/// features_from_reconstruction is off, in which case features come from a
/// raw sensor-output channel.
struct DatasetConfig {
    ConductorGeometry geometry = ConductorGeometry::default_flat();
    SourceSpec source;
    double earth_resistivity_ohm_m = 100.0;
    double step_m = 100.0;
    std::vector<double> lengths_m{100, 200, 300, 400, 500, 600};
    std::vector<double> head_offsets_m{0.42, 0.6, 1.0}; // top head depth below the conductor plane
    double head_separation_m = 0.58;                    // second head this far below the first
    double pole_x_m = 0.6;
    SensorModel sensor;
    int runs_per_class = 2;
    double duration_s = 2.0;
    double sample_rate_hz = 27700.0;
    int cycles_per_window = 10;
    double overlap = 0.5;
    bool features_from_reconstruction = true;
    /// Windows whose dominant state covers less than this fraction are
    /// discarded as boundary windows.
    double label_coverage = 0.8;

    void validate() const;
};

Corpus generate_dataset(const DatasetConfig& config, std::uint64_t seed);

struct TrainConfig {
    std::string model_kind = "mlp"; // "mlp" or "nearest_centroid"
    int hidden_width = 32;
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double validation_fraction = 0.2;
    /// "shape": amplitude features divided by window RMS, absolute scale
    /// discarded (classification invariant under window scaling).
    /// "full": raw feature vector including absolute amplitudes.
    std::string feature_mode = "shape";

    void validate() const;
};

struct ClassifierModel {
    std::string kind;
    std::string feature_mode;
    std::vector<double> feature_mean;   // per transformed feature
    std::vector<double> feature_scale;
    std::vector<int> layer_sizes;       // mlp: input, hidden..., output
    std::vector<double> parameters;     // flat weight/bias blob
    std::string metadata_json;          // seed, corpus hash, validation metrics, timestamp

    [[nodiscard]] std::size_t feature_count() const { return feature_mean.size(); }
};

/// Fits the configured classifier on a stratified train/validation split of
/// the corpus; validation metrics land in the model metadata. Deterministic
/// for a given (corpus, config, seed).
ClassifierModel train(const Corpus& corpus, const TrainConfig& config, std::uint64_t seed);

/// Scores sum to 1 within 1e-6; the label is their argmax.
std::pair<ClassLabel, std::array<double, kClassCount>> classify(const ClassifierModel& model,
                                                                const FeatureVector& features);

struct EvaluationReport {
    std::array<std::array<int, kClassCount>, kClassCount> confusion{}; // [true][predicted]
    std::array<double, kClassCount> precision{};
    std::array<double, kClassCount> recall{};
    double accuracy = 0.0;
    /// Fraction of fault-class windows predicted as any fault class.
    double fault_vs_normal_recall = 0.0;
    double normal_correct_rate = 0.0;
    /// Fraction of arcing windows predicted as non-arcing.
    double arcing_to_nonarcing_rate = 0.0;
    int total = 0;

    /// Lab-reported reference aggregates printed beside the measured ones.
    static constexpr double reference_fault_detection = 1.0;
    static constexpr double reference_normal_correct = 0.9998;
    static constexpr double reference_arcing_confusion = 0.015;
};

EvaluationReport evaluate(const ClassifierModel& model, const Corpus& corpus);

/// Derives every metric from an already-counted confusion matrix.
EvaluationReport report_from_confusion(
    const std::array<std::array<int, kClassCount>, kClassCount>& confusion);

std::string report_table(const EvaluationReport& report);
std::string report_json(const EvaluationReport& report);

/// Stratified split into (rest, holdout); deterministic per seed.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double holdout_fraction,
                                       std::uint64_t seed);

/// Corpus CSV: feature columns in FeatureVector::names() order, then
/// label, scenario_id, seed, window_start_s.
void write_corpus_csv(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus_csv(const std::filesystem::path& path);

/// Versioned binary model file (magic "HIFM"); parameters round-trip
/// bit-exactly.
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

} // namespace hifsense

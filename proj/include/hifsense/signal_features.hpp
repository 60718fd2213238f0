#pragma once

#include "hifsense/waveform.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace hifsense {

/// A cycle-synchronous slice of one channel: the length is an integer number
/// of fundamental cycles (>= 2), enforced at construction.
struct AnalysisWindow {
    std::vector<double> samples;
    double sample_rate_hz = 0.0;
    double fundamental_hz = 50.0;
    std::string channel;
    double start_time_s = 0.0;
    int cycles = 0;

    void validate() const;
    [[nodiscard]] std::size_t samples_per_cycle() const { return samples.size() / cycles; }
};

/// Slices a channel into windows of `cycles_per_window` fundamental cycles
/// with fractional overlap in [0, 0.9]. Window length is the nearest integer
/// to cycles * rate / fundamental.
std::vector<AnalysisWindow> make_windows(const WaveformRecord& record,
                                         const std::string& channel,
                                         int cycles_per_window, double overlap,
                                         double fundamental_hz = 50.0);

/// Amplitudes/phases at exact multiples of the fundamental (bin-aligned by
/// construction): a pure sine of amplitude A reports A at k = 1.
struct HarmonicSpectrum {
    double dc = 0.0;
    std::vector<double> amplitude; // amplitude[k-1] = harmonic k
    std::vector<double> phase;

    [[nodiscard]] double harmonic(int k) const { return amplitude.at(k - 1); }
};

HarmonicSpectrum harmonic_spectrum(const AnalysisWindow& window, int max_harmonic);

/// Analytic-signal envelope and instantaneous frequency. The first and last
/// 5% of samples carry the transform's edge artifacts; edge_margin tells
/// downstream statistics what to skip.
struct HilbertResult {
    std::vector<double> envelope;
    std::vector<double> inst_frequency_hz;
    std::size_t edge_margin = 0;
};

HilbertResult hilbert_envelope(const AnalysisWindow& window);

/// Per-window scalar features feeding classification. All-zero windows
/// yield zero for every entry (ratios defined as 0 when undefined).
struct FeatureVector {
    double rms = 0.0;
    double dc = 0.0;
    double fundamental = 0.0;
    std::array<double, 12> harmonics{}; // harmonics 2..13
    double thd = 0.0;                   // sqrt(sum A_k^2, k=2..13) / A_1
    double even_odd_ratio = 0.0;        // even harmonic energy / (even + odd), k >= 2
    double half_cycle_asymmetry = 0.0;  // |E+ - E-| / (E+ + E-)
    double crest_factor = 0.0;          // peak / rms
    double envelope_mean = 0.0;
    double envelope_std = 0.0;
    double modulation_index = 0.0;      // (env_max - env_min) / (env_max + env_min)
    double interharmonic_fraction = 0.0; // energy outside DC + harmonics 1..13

    static constexpr std::size_t size = 23;
    [[nodiscard]] std::array<double, size> flat() const;
    static FeatureVector from_flat(std::span<const double> values);
    /// Stable CSV column names in flat() order.
    static const std::array<std::string, size>& names();
};

FeatureVector extract_features(const AnalysisWindow& window);

/// Batch extraction, window-parallel when OpenMP is available; output is
/// identical to the serial path.
std::vector<FeatureVector> extract_features_batch(std::span<const AnalysisWindow> windows,
                                                  bool parallel = true);

} // namespace hifsense

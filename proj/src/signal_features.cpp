#include "hifsense/signal_features.hpp"

#include <fftw3.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace hifsense {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Process-lifetime FFTW plan cache. Plan creation is serialized; execution
/// uses the new-array interface, which is safe across threads.
class FftPlanCache {
public:
    static FftPlanCache& instance() {
        static FftPlanCache cache;
        return cache;
    }

    void transform(std::vector<std::complex<double>>& data, int sign) {
        const auto n = data.size();
        if (n == 0) return;
        fftw_plan plan = nullptr;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            const std::uint64_t key = (static_cast<std::uint64_t>(n) << 1) |
                                      (sign == FFTW_BACKWARD ? 1u : 0u);
            auto it = plans_.find(key);
            if (it == plans_.end()) {
                auto* scratch = static_cast<fftw_complex*>(
                    fftw_malloc(sizeof(fftw_complex) * n));
                plan = fftw_plan_dft_1d(static_cast<int>(n), scratch, scratch, sign,
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
                if (plan == nullptr) throw std::runtime_error("FFTW plan creation failed");
                plans_.emplace(key, plan);
                scratch_.push_back(scratch);
            } else {
                plan = it->second;
            }
        }
        auto* buf = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(plan, buf, buf);
    }

private:
    std::mutex mutex_;
    std::unordered_map<std::uint64_t, fftw_plan> plans_;
    std::vector<fftw_complex*> scratch_;
};

} // namespace

void AnalysisWindow::validate() const {
    if (sample_rate_hz <= 0.0) throw std::invalid_argument("AnalysisWindow: sample rate must be > 0");
    if (fundamental_hz <= 0.0) throw std::invalid_argument("AnalysisWindow: fundamental must be > 0");
    if (cycles < 2) throw std::invalid_argument("AnalysisWindow: need at least 2 cycles");
    const double expected = cycles * sample_rate_hz / fundamental_hz;
    if (samples.empty() ||
        std::abs(static_cast<double>(samples.size()) - expected) > 0.5) {
        throw std::invalid_argument(
            "AnalysisWindow: length must be the nearest integer to cycles * rate / fundamental");
    }
}

std::vector<AnalysisWindow> make_windows(const WaveformRecord& record,
                                         const std::string& channel,
                                         int cycles_per_window, double overlap,
                                         double fundamental_hz) {
    if (cycles_per_window < 2) {
        throw std::invalid_argument("make_windows: need at least 2 cycles per window");
    }
    if (overlap < 0.0 || overlap > 0.9) {
        throw std::invalid_argument("make_windows: overlap must be in [0, 0.9]");
    }
    const auto samples = record.samples(channel);
    const auto len = static_cast<std::size_t>(
        std::llround(cycles_per_window * record.sample_rate() / fundamental_hz));
    if (len < 2) throw std::invalid_argument("make_windows: window degenerates to < 2 samples");
    if (samples.size() < len) {
        throw std::invalid_argument("make_windows: record shorter than one window");
    }
    const auto stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(len) * (1.0 - overlap))));

    std::vector<AnalysisWindow> windows;
    for (std::size_t start = 0; start + len <= samples.size(); start += stride) {
        AnalysisWindow w;
        w.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(start),
                         samples.begin() + static_cast<std::ptrdiff_t>(start + len));
        w.sample_rate_hz = record.sample_rate();
        w.fundamental_hz = fundamental_hz;
        w.channel = channel;
        w.start_time_s = record.start_time() + static_cast<double>(start) / record.sample_rate();
        w.cycles = cycles_per_window;
        windows.push_back(std::move(w));
    }
    return windows;
}

HarmonicSpectrum harmonic_spectrum(const AnalysisWindow& window, int max_harmonic) {
    window.validate();
    if (max_harmonic < 1) throw std::invalid_argument("harmonic_spectrum: max harmonic must be >= 1");
    if (max_harmonic * window.fundamental_hz >= window.sample_rate_hz / 2.0) {
        throw std::invalid_argument("harmonic_spectrum: harmonic above Nyquist");
    }

    const auto n = window.samples.size();
    const double nd = static_cast<double>(n);
    HarmonicSpectrum spec;
    spec.amplitude.resize(static_cast<std::size_t>(max_harmonic), 0.0);
    spec.phase.resize(static_cast<std::size_t>(max_harmonic), 0.0);

    double dc = 0.0;
    for (double v : window.samples) dc += v;
    spec.dc = dc / nd;

    // Harmonic k sits in bin k * cycles exactly; correlate directly.
    for (int k = 1; k <= max_harmonic; ++k) {
        const double theta = kTwoPi * static_cast<double>(k) * window.cycles / nd;
        const std::complex<double> w(std::cos(theta), -std::sin(theta));
        std::complex<double> rot(1.0, 0.0);
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            acc += window.samples[i] * rot;
            rot *= w;
        }
        spec.amplitude[static_cast<std::size_t>(k - 1)] = 2.0 * std::abs(acc) / nd;
        spec.phase[static_cast<std::size_t>(k - 1)] = std::arg(acc);
    }
    return spec;
}

HilbertResult hilbert_envelope(const AnalysisWindow& window) {
    window.validate();
    const auto n = window.samples.size();

    std::vector<std::complex<double>> spectrum(n);
    for (std::size_t i = 0; i < n; ++i) spectrum[i] = window.samples[i];
    FftPlanCache::instance().transform(spectrum, FFTW_FORWARD);

    // Analytic signal: keep DC (and Nyquist for even n), double the positive
    // frequencies, zero the negative half.
    const std::size_t last_pos = (n % 2 == 0) ? n / 2 - 1 : n / 2;
    for (std::size_t k = 1; k <= last_pos; ++k) spectrum[k] *= 2.0;
    for (std::size_t k = n / 2 + 1; k < n; ++k) spectrum[k] = 0.0;
    FftPlanCache::instance().transform(spectrum, FFTW_BACKWARD);

    HilbertResult result;
    result.envelope.resize(n);
    result.inst_frequency_hz.resize(n);
    result.edge_margin = std::max<std::size_t>(1, n / 20);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        spectrum[i] *= inv_n;
        result.envelope[i] = std::abs(spectrum[i]);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::complex<double> step = spectrum[i + 1] * std::conj(spectrum[i]);
        result.inst_frequency_hz[i] = std::arg(step) * window.sample_rate_hz / kTwoPi;
    }
    if (n > 1) result.inst_frequency_hz[n - 1] = result.inst_frequency_hz[n - 2];
    return result;
}

namespace {

/// Sign of the bin-exact fundamental at each sample; falls back to the raw
/// signal sign when the window has no usable fundamental.
double fundamental_energy_split(const AnalysisWindow& window, double fundamental_amp,
                                double fundamental_phase_threshold, double& e_pos,
                                double& e_neg) {
    const auto n = window.samples.size();
    const double nd = static_cast<double>(n);
    const double theta = kTwoPi * window.cycles / nd;

    e_pos = 0.0;
    e_neg = 0.0;
    if (fundamental_amp > fundamental_phase_threshold) {
        const std::complex<double> w(std::cos(theta), -std::sin(theta));
        std::complex<double> rot(1.0, 0.0);
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            acc += window.samples[i] * rot;
            rot *= w;
        }
        const std::complex<double> fwd(std::cos(theta), std::sin(theta));
        std::complex<double> run(1.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double fund = 2.0 / nd * (acc * run).real();
            const double x2 = window.samples[i] * window.samples[i];
            if (fund >= 0.0) {
                e_pos += x2;
            } else {
                e_neg += x2;
            }
            run *= fwd;
        }
    } else {
        for (double v : window.samples) {
            if (v >= 0.0) {
                e_pos += v * v;
            } else {
                e_neg += v * v;
            }
        }
    }
    return e_pos + e_neg;
}

} // namespace

std::array<double, FeatureVector::size> FeatureVector::flat() const {
    std::array<double, size> out{};
    out[0] = rms;
    out[1] = dc;
    out[2] = fundamental;
    for (std::size_t i = 0; i < harmonics.size(); ++i) out[3 + i] = harmonics[i];
    out[15] = thd;
    out[16] = even_odd_ratio;
    out[17] = half_cycle_asymmetry;
    out[18] = crest_factor;
    out[19] = envelope_mean;
    out[20] = envelope_std;
    out[21] = modulation_index;
    out[22] = interharmonic_fraction;
    return out;
}

FeatureVector FeatureVector::from_flat(std::span<const double> values) {
    if (values.size() != size) {
        throw std::invalid_argument("FeatureVector: expected 23 values");
    }
    FeatureVector f;
    f.rms = values[0];
    f.dc = values[1];
    f.fundamental = values[2];
    for (std::size_t i = 0; i < f.harmonics.size(); ++i) f.harmonics[i] = values[3 + i];
    f.thd = values[15];
    f.even_odd_ratio = values[16];
    f.half_cycle_asymmetry = values[17];
    f.crest_factor = values[18];
    f.envelope_mean = values[19];
    f.envelope_std = values[20];
    f.modulation_index = values[21];
    f.interharmonic_fraction = values[22];
    return f;
}

const std::array<std::string, FeatureVector::size>& FeatureVector::names() {
    static const std::array<std::string, size> names = {
        "rms",  "dc",   "fundamental", "h2",  "h3",  "h4",  "h5",  "h6",
        "h7",   "h8",   "h9",          "h10", "h11", "h12", "h13", "thd",
        "even_odd_ratio", "half_cycle_asymmetry", "crest_factor", "envelope_mean",
        "envelope_std", "modulation_index", "interharmonic_fraction"};
    return names;
}

FeatureVector extract_features(const AnalysisWindow& window) {
    window.validate();
    constexpr int kMaxHarmonic = 13;
    const auto n = window.samples.size();
    const double nd = static_cast<double>(n);

    FeatureVector f;
    double sum2 = 0.0;
    double peak = 0.0;
    for (double v : window.samples) {
        sum2 += v * v;
        peak = std::max(peak, std::abs(v));
    }
    const double mean_square = sum2 / nd;
    f.rms = std::sqrt(mean_square);
    if (f.rms == 0.0) return f; // all-zero window: every ratio is 0 by convention

    const HarmonicSpectrum spec = harmonic_spectrum(window, kMaxHarmonic);
    f.dc = spec.dc;
    f.fundamental = spec.amplitude[0];
    for (int k = 2; k <= kMaxHarmonic; ++k) {
        f.harmonics[static_cast<std::size_t>(k - 2)] = spec.amplitude[static_cast<std::size_t>(k - 1)];
    }

    double harm2 = 0.0;
    double even2 = 0.0;
    double odd2 = 0.0;
    for (int k = 2; k <= kMaxHarmonic; ++k) {
        const double a = spec.amplitude[static_cast<std::size_t>(k - 1)];
        harm2 += a * a;
        if (k % 2 == 0) {
            even2 += a * a;
        } else {
            odd2 += a * a;
        }
    }
    const double fund_floor = 1e-12 * f.rms;
    f.thd = f.fundamental > fund_floor ? std::sqrt(harm2) / f.fundamental : 0.0;
    f.even_odd_ratio = (even2 + odd2) > 0.0 ? even2 / (even2 + odd2) : 0.0;

    double e_pos = 0.0;
    double e_neg = 0.0;
    const double e_total =
        fundamental_energy_split(window, f.fundamental, fund_floor, e_pos, e_neg);
    f.half_cycle_asymmetry = e_total > 0.0 ? std::abs(e_pos - e_neg) / e_total : 0.0;

    f.crest_factor = peak / f.rms;

    const HilbertResult hil = hilbert_envelope(window);
    const std::size_t lo = hil.edge_margin;
    const std::size_t hi = n - hil.edge_margin;
    double env_sum = 0.0;
    double env_sum2 = 0.0;
    double env_min = std::numeric_limits<double>::infinity();
    double env_max = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double e = hil.envelope[i];
        env_sum += e;
        env_sum2 += e * e;
        env_min = std::min(env_min, e);
        env_max = std::max(env_max, e);
    }
    const double m = static_cast<double>(hi - lo);
    f.envelope_mean = env_sum / m;
    const double var = std::max(0.0, env_sum2 / m - f.envelope_mean * f.envelope_mean);
    f.envelope_std = std::sqrt(var);
    f.modulation_index =
        (env_max + env_min) > 0.0 ? (env_max - env_min) / (env_max + env_min) : 0.0;

    const double in_band = f.dc * f.dc + (f.fundamental * f.fundamental + harm2) / 2.0;
    f.interharmonic_fraction = std::max(0.0, mean_square - in_band) / mean_square;
    return f;
}

std::vector<FeatureVector> extract_features_batch(std::span<const AnalysisWindow> windows,
                                                  bool parallel) {
    std::vector<FeatureVector> out(windows.size());
    const auto count = static_cast<std::int64_t>(windows.size());
#ifdef _OPENMP
#pragma omp parallel for if (parallel) schedule(dynamic)
#endif
    for (std::int64_t i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] = extract_features(windows[static_cast<std::size_t>(i)]);
    }
    (void)parallel;
    return out;
}

} // namespace hifsense

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hifsense {

/// What a channel physically represents. The numeric values are the role
/// bytes of the binary waveform format and must stay stable.
enum class ChannelRole : std::uint8_t {
    PhaseCurrent = 0,
    NeutralCurrent = 1,
    FaultCurrent = 2,
    NodeVoltage = 3,
    FieldAxis = 4,
    SensorOutput = 5,
};

const char* channel_role_name(ChannelRole role);

struct ChannelInfo {
    std::string name;
    std::string unit;
    ChannelRole role = ChannelRole::PhaseCurrent;
};

/// Multichannel sampled time series: the exchange type between the
/// simulator, the sensing chain, reconstruction and feature extraction.
/// All channels share one sample rate and length; names are unique.
class WaveformRecord {
public:
    WaveformRecord() = default;
    explicit WaveformRecord(double sample_rate_hz, double start_time_s = 0.0)
        : sample_rate_(sample_rate_hz), start_time_(start_time_s) {
        if (sample_rate_ <= 0.0) {
            throw std::invalid_argument("WaveformRecord: sample rate must be > 0");
        }
    }

    /// Adds a channel and returns its index. Sample count must match the
    /// existing channels (any length is accepted for the first channel).
    std::size_t add_channel(ChannelInfo info, std::vector<double> samples);

    [[nodiscard]] double sample_rate() const { return sample_rate_; }
    [[nodiscard]] double start_time() const { return start_time_; }
    void set_start_time(double t) { start_time_ = t; }

    [[nodiscard]] std::size_t channel_count() const { return channels_.size(); }
    [[nodiscard]] std::size_t sample_count() const {
        return samples_.empty() ? 0 : samples_.front().size();
    }
    [[nodiscard]] double duration() const { return sample_count() / sample_rate_; }

    [[nodiscard]] const ChannelInfo& channel(std::size_t i) const { return channels_.at(i); }
    [[nodiscard]] std::span<const double> samples(std::size_t i) const { return samples_.at(i); }
    [[nodiscard]] std::vector<double>& mutable_samples(std::size_t i) { return samples_.at(i); }

    /// Index of the named channel, or -1.
    [[nodiscard]] int find_channel(const std::string& name) const;
    /// Like find_channel but throws with the channel name on miss.
    [[nodiscard]] std::size_t channel_index(const std::string& name) const;
    [[nodiscard]] std::span<const double> samples(const std::string& name) const {
        return samples_.at(channel_index(name));
    }

    [[nodiscard]] double time_of(std::size_t sample) const {
        return start_time_ + static_cast<double>(sample) / sample_rate_;
    }

    bool operator==(const WaveformRecord& other) const;

private:
    double sample_rate_ = 0.0;
    double start_time_ = 0.0;
    std::vector<ChannelInfo> channels_;
    std::vector<std::vector<double>> samples_;
};

} // namespace hifsense

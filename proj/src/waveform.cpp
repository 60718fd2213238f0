#include "hifsense/waveform.hpp"

#include <algorithm>

namespace hifsense {

const char* channel_role_name(ChannelRole role) {
    switch (role) {
    case ChannelRole::PhaseCurrent: return "phase-current";
    case ChannelRole::NeutralCurrent: return "neutral-current";
    case ChannelRole::FaultCurrent: return "fault-current";
    case ChannelRole::NodeVoltage: return "node-voltage";
    case ChannelRole::FieldAxis: return "field-axis";
    case ChannelRole::SensorOutput: return "sensor-output";
    }
    return "unknown";
}

std::size_t WaveformRecord::add_channel(ChannelInfo info, std::vector<double> samples) {
    if (info.name.empty()) {
        throw std::invalid_argument("WaveformRecord: channel name must not be empty");
    }
    if (find_channel(info.name) >= 0) {
        throw std::invalid_argument("WaveformRecord: duplicate channel name '" + info.name + "'");
    }
    if (!samples_.empty() && samples.size() != samples_.front().size()) {
        throw std::invalid_argument("WaveformRecord: channel '" + info.name +
                                    "' length mismatch");
    }
    channels_.push_back(std::move(info));
    samples_.push_back(std::move(samples));
    return channels_.size() - 1;
}

int WaveformRecord::find_channel(const std::string& name) const {
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        if (channels_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

std::size_t WaveformRecord::channel_index(const std::string& name) const {
    int i = find_channel(name);
    if (i < 0) {
        throw std::out_of_range("WaveformRecord: no channel named '" + name + "'");
    }
    return static_cast<std::size_t>(i);
}

bool WaveformRecord::operator==(const WaveformRecord& other) const {
    if (sample_rate_ != other.sample_rate_ || start_time_ != other.start_time_ ||
        channels_.size() != other.channels_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        const auto& a = channels_[i];
        const auto& b = other.channels_[i];
        if (a.name != b.name || a.unit != b.unit || a.role != b.role) return false;
        if (samples_[i] != other.samples_[i]) return false;
    }
    return true;
}

} // namespace hifsense

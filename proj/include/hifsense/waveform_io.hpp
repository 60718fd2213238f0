#pragma once

#include "hifsense/waveform.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <variant>

namespace hifsense {

enum class WaveformFormat { Binary, Csv };

/// Binary layout (all integers little-endian):
///   magic "GMRW" | version u8 (=1) | channel count u16 | sample rate u32 (Hz)
///   per channel: name len u8 + UTF-8, unit len u8 + UTF-8, role u8
///   frames: length u32 (bytes after the length field) | start index u64 |
///           interleaved float32 samples, <= 1 MiB of payload per frame.
/// CSV: header "time,<name>[unit],...", one row per sample.
/// Writes go to a temp file renamed into place, so failures leave no
/// partial output.
void write_waveform(const WaveformRecord& record, const std::filesystem::path& path,
                    WaveformFormat format);

/// Reads either format (sniffed from the magic bytes).
WaveformRecord read_waveform(const std::filesystem::path& path);

/// A hole in the sample index sequence, surfaced instead of concatenating
/// across it.
struct GapEvent {
    std::uint64_t expected_index = 0;
    std::uint64_t actual_index = 0;
    [[nodiscard]] std::uint64_t missing_samples() const { return actual_index - expected_index; }
};

/// Incremental reader for the framed binary stream. Corruption is fatal:
/// bad magic or version, truncated frames (with the byte offset), and
/// sample-index regressions all throw; gaps are reported as events.
class StreamReader {
public:
    explicit StreamReader(std::istream& in);

    struct Chunk {
        WaveformRecord record;
        std::uint64_t start_index = 0;
    };
    using Event = std::variant<Chunk, GapEvent>;

    /// Next chunk or gap event; nullopt at a clean end of stream.
    std::optional<Event> next();

    [[nodiscard]] double sample_rate() const { return sample_rate_; }
    [[nodiscard]] std::size_t channel_count() const { return channels_.size(); }
    [[nodiscard]] const ChannelInfo& channel(std::size_t i) const { return channels_.at(i); }

private:
    void read_header();

    std::istream& in_;
    std::uint64_t offset_ = 0;
    double sample_rate_ = 0.0;
    std::vector<ChannelInfo> channels_;
    std::optional<std::uint64_t> next_expected_index_;
    // Set while a gap event is being surfaced; the frame that revealed the
    // gap is delivered on the following next() call.
    std::optional<std::uint64_t> pending_index_;
    std::vector<float> pending_payload_;
};

/// Stream writer counterpart; used by the CLI and tests to produce framed
/// streams with explicit start indices.
void write_stream_header(std::ostream& out, const WaveformRecord& meta);
void write_stream_frame(std::ostream& out, const WaveformRecord& chunk, std::uint64_t start_index);

} // namespace hifsense

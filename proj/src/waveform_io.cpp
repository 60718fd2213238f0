#include "hifsense/waveform_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace hifsense {

namespace {

constexpr char kMagic[4] = {'G', 'M', 'R', 'W'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kMaxFramePayload = 1 << 20; // 1 MiB

template <typename T>
void put_le(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

struct ByteReader {
    std::istream& in;
    std::uint64_t offset = 0;

    bool read_exact(void* dst, std::size_t n, bool eof_ok = false) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got == 0 && eof_ok && in.eof()) return false;
        if (got != n) {
            throw std::runtime_error("stream truncated at byte offset " +
                                     std::to_string(offset + got));
        }
        offset += n;
        return true;
    }

    template <typename T>
    T get() {
        T value{};
        read_exact(&value, sizeof(T));
        return value;
    }
};

std::string header_bytes(const WaveformRecord& record) {
    if (record.channel_count() == 0) {
        throw std::invalid_argument("waveform_io: record has no channels");
    }
    std::string out;
    out.append(kMagic, 4);
    put_le<std::uint8_t>(out, kVersion);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(record.channel_count()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(std::llround(record.sample_rate())));
    for (std::size_t c = 0; c < record.channel_count(); ++c) {
        const auto& info = record.channel(c);
        if (info.name.size() > 255 || info.unit.size() > 255) {
            throw std::invalid_argument("waveform_io: channel name/unit longer than 255 bytes");
        }
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(info.name.size()));
        out.append(info.name);
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(info.unit.size()));
        out.append(info.unit);
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(info.role));
    }
    return out;
}

std::string frame_bytes(const WaveformRecord& record, std::size_t first, std::size_t count,
                        std::uint64_t start_index) {
    const auto channels = record.channel_count();
    std::string out;
    const auto payload = count * channels * sizeof(float);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sizeof(std::uint64_t) + payload));
    put_le<std::uint64_t>(out, start_index);
    for (std::size_t i = first; i < first + count; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
            put_le<float>(out, static_cast<float>(record.samples(c)[i]));
        }
    }
    return out;
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("waveform_io: cannot open " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("waveform_io: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

WaveformRecord read_binary(std::istream& in) {
    StreamReader reader(in);
    std::vector<std::vector<double>> samples(reader.channel_count());
    double start_time = 0.0;
    bool first = true;
    while (auto event = reader.next()) {
        if (std::holds_alternative<GapEvent>(*event)) {
            const auto& gap = std::get<GapEvent>(*event);
            throw std::runtime_error("waveform file has a sample gap of " +
                                     std::to_string(gap.missing_samples()) + " samples");
        }
        auto& chunk = std::get<StreamReader::Chunk>(*event);
        if (first) {
            start_time = static_cast<double>(chunk.start_index) / reader.sample_rate();
            first = false;
        }
        for (std::size_t c = 0; c < samples.size(); ++c) {
            auto s = chunk.record.samples(c);
            samples[c].insert(samples[c].end(), s.begin(), s.end());
        }
    }
    WaveformRecord rec(reader.sample_rate(), start_time);
    for (std::size_t c = 0; c < samples.size(); ++c) {
        rec.add_channel(reader.channel(c), std::move(samples[c]));
    }
    return rec;
}

WaveformRecord read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("waveform CSV: empty file");
    std::vector<std::string> headers;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) headers.push_back(cell);
    }
    if (headers.size() < 2 || headers[0] != "time") {
        throw std::runtime_error("waveform CSV: header must start with 'time'");
    }

    std::vector<ChannelInfo> infos;
    for (std::size_t i = 1; i < headers.size(); ++i) {
        ChannelInfo info;
        const auto open = headers[i].find('[');
        const auto close = headers[i].rfind(']');
        if (open != std::string::npos && close != std::string::npos && close > open) {
            info.name = headers[i].substr(0, open);
            info.unit = headers[i].substr(open + 1, close - open - 1);
        } else {
            info.name = headers[i];
        }
        infos.push_back(std::move(info));
    }

    std::vector<double> times;
    std::vector<std::vector<double>> samples(infos.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col == 0) {
                times.push_back(std::stod(cell));
            } else if (col - 1 < samples.size()) {
                samples[col - 1].push_back(std::stod(cell));
            }
            ++col;
        }
        if (col != infos.size() + 1) {
            throw std::runtime_error("waveform CSV: bad column count on row " +
                                     std::to_string(times.size()));
        }
    }

    double rate = 27700.0;
    double start = 0.0;
    if (times.size() >= 2) {
        rate = 1.0 / (times[1] - times[0]);
        start = times[0];
    } else if (times.size() == 1) {
        start = times[0];
    }
    WaveformRecord rec(rate, start);
    for (std::size_t c = 0; c < infos.size(); ++c) {
        rec.add_channel(infos[c], std::move(samples[c]));
    }
    return rec;
}

} // namespace

void write_waveform(const WaveformRecord& record, const std::filesystem::path& path,
                    WaveformFormat format) {
    if (format == WaveformFormat::Binary) {
        std::string bytes = header_bytes(record);
        const auto n = record.sample_count();
        const auto channels = record.channel_count();
        const std::size_t samples_per_frame =
            std::max<std::size_t>(1, kMaxFramePayload / (channels * sizeof(float)));
        const auto base_index =
            static_cast<std::uint64_t>(std::llround(record.start_time() * record.sample_rate()));
        if (n == 0) {
            bytes += frame_bytes(record, 0, 0, base_index);
        }
        for (std::size_t first = 0; first < n; first += samples_per_frame) {
            const std::size_t count = std::min(samples_per_frame, n - first);
            bytes += frame_bytes(record, first, count, base_index + first);
        }
        atomic_write(path, bytes);
        return;
    }

    std::string out;
    out += "time";
    for (std::size_t c = 0; c < record.channel_count(); ++c) {
        out += ',';
        out += record.channel(c).name;
        out += '[';
        out += record.channel(c).unit;
        out += ']';
    }
    out += '\n';
    char buf[40];
    for (std::size_t i = 0; i < record.sample_count(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", record.time_of(i));
        out += buf;
        for (std::size_t c = 0; c < record.channel_count(); ++c) {
            std::snprintf(buf, sizeof(buf), ",%.12g", record.samples(c)[i]);
            out += buf;
        }
        out += '\n';
    }
    atomic_write(path, out);
}

WaveformRecord read_waveform(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_waveform: cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    in.seekg(0);
    if (in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0) {
        return read_binary(in);
    }
    in.clear();
    in.seekg(0);
    return read_csv(in);
}

StreamReader::StreamReader(std::istream& in) : in_(in) { read_header(); }

void StreamReader::read_header() {
    ByteReader r{in_, 0};
    char magic[4];
    r.read_exact(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error(std::string("bad stream magic '") + std::string(magic, 4) +
                                 "' (expected GMRW)");
    }
    const auto version = r.get<std::uint8_t>();
    if (version != kVersion) {
        throw std::runtime_error("unsupported stream format version " + std::to_string(version));
    }
    const auto channel_count = r.get<std::uint16_t>();
    if (channel_count < 1) throw std::runtime_error("stream declares zero channels");
    const auto rate = r.get<std::uint32_t>();
    if (rate == 0) throw std::runtime_error("stream declares zero sample rate");
    sample_rate_ = static_cast<double>(rate);
    for (std::uint16_t c = 0; c < channel_count; ++c) {
        ChannelInfo info;
        const auto name_len = r.get<std::uint8_t>();
        info.name.resize(name_len);
        r.read_exact(info.name.data(), name_len);
        const auto unit_len = r.get<std::uint8_t>();
        info.unit.resize(unit_len);
        r.read_exact(info.unit.data(), unit_len);
        const auto role = r.get<std::uint8_t>();
        if (role > static_cast<std::uint8_t>(ChannelRole::SensorOutput)) {
            throw std::runtime_error("stream channel '" + info.name + "' has unknown role byte " +
                                     std::to_string(role));
        }
        info.role = static_cast<ChannelRole>(role);
        channels_.push_back(std::move(info));
    }
    offset_ = r.offset;
}

std::optional<StreamReader::Event> StreamReader::next() {
    std::uint64_t start_index = 0;
    std::size_t sample_count = 0;
    std::vector<float> payload;

    if (pending_index_) {
        // The frame that revealed the gap was already parsed; re-deliver it.
        start_index = *pending_index_;
        pending_index_.reset();
        // fallthrough: payload was stashed
        payload = std::move(pending_payload_);
        sample_count = payload.size() / channels_.size();
    } else {
        ByteReader r{in_, offset_};
        std::uint32_t frame_len = 0;
        if (!r.read_exact(&frame_len, sizeof(frame_len), /*eof_ok=*/true)) {
            return std::nullopt; // clean end of stream
        }
        if (frame_len < sizeof(std::uint64_t)) {
            throw std::runtime_error("stream frame shorter than its index field at byte offset " +
                                     std::to_string(offset_));
        }
        start_index = r.get<std::uint64_t>();
        const std::size_t payload_bytes = frame_len - sizeof(std::uint64_t);
        if (payload_bytes % (channels_.size() * sizeof(float)) != 0) {
            throw std::runtime_error("stream frame payload is not a whole number of samples at byte offset " +
                                     std::to_string(offset_));
        }
        sample_count = payload_bytes / (channels_.size() * sizeof(float));
        payload.resize(sample_count * channels_.size());
        if (payload_bytes > 0) {
            r.read_exact(payload.data(), payload_bytes);
        }
        offset_ = r.offset;

        if (next_expected_index_) {
            if (start_index < *next_expected_index_) {
                throw std::runtime_error("stream sample index regressed from " +
                                         std::to_string(*next_expected_index_) + " to " +
                                         std::to_string(start_index));
            }
            if (start_index > *next_expected_index_) {
                GapEvent gap{*next_expected_index_, start_index};
                next_expected_index_ = start_index + sample_count;
                pending_index_ = start_index;
                pending_payload_ = std::move(payload);
                return Event{gap};
            }
        }
        next_expected_index_ = start_index + sample_count;
    }

    Chunk chunk;
    chunk.start_index = start_index;
    chunk.record = WaveformRecord(sample_rate_, static_cast<double>(start_index) / sample_rate_);
    for (std::size_t c = 0; c < channels_.size(); ++c) {
        std::vector<double> v(sample_count);
        for (std::size_t i = 0; i < sample_count; ++i) {
            v[i] = static_cast<double>(payload[i * channels_.size() + c]);
        }
        chunk.record.add_channel(channels_[c], std::move(v));
    }
    return Event{std::move(chunk)};
}

void write_stream_header(std::ostream& out, const WaveformRecord& meta) {
    const std::string bytes = header_bytes(meta);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_stream_frame(std::ostream& out, const WaveformRecord& chunk,
                        std::uint64_t start_index) {
    const std::string bytes = frame_bytes(chunk, 0, chunk.sample_count(), start_index);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace hifsense

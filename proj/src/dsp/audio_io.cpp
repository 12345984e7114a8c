#include "hh/dsp/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "hh/error.hpp"
#include "hh/util.hpp"

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace hh::dsp {

namespace {

void put_u32(std::string& s, std::uint32_t v) { s.append(reinterpret_cast<const char*>(&v), 4); }
void put_u16(std::string& s, std::uint16_t v) { s.append(reinterpret_cast<const char*>(&v), 2); }

template <typename T>
T get(const std::string& s, std::size_t off) {
    if (off + sizeof(T) > s.size()) throw ValidationError("truncated WAV data");
    T v;
    std::memcpy(&v, s.data() + off, sizeof(T));
    return v;
}

}  // namespace

std::string encode_wav(const Waveform& w) {
    const auto n = static_cast<std::uint32_t>(w.samples.size());
    std::string s;
    s.reserve(44 + 2 * n);
    s += "RIFF";
    put_u32(s, 36 + 2 * n);
    s += "WAVEfmt ";
    put_u32(s, 16);
    put_u16(s, 1);  // PCM
    put_u16(s, 1);  // mono
    put_u32(s, static_cast<std::uint32_t>(w.sample_rate));
    put_u32(s, static_cast<std::uint32_t>(w.sample_rate) * 2);
    put_u16(s, 2);
    put_u16(s, 16);
    s += "data";
    put_u32(s, 2 * n);
    for (float x : w.samples) {
        const double c = std::clamp(double(x), -1.0, 1.0);
        put_u16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
    }
    return s;
}

Waveform decode_wav(const std::string& bytes) {
    if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
        throw ValidationError("not a RIFF/WAVE file");
    Waveform w;
    bool have_fmt = false;
    std::size_t off = 12;
    while (off + 8 <= bytes.size()) {
        const std::string id = bytes.substr(off, 4);
        const auto len = get<std::uint32_t>(bytes, off + 4);
        const std::size_t body = off + 8;
        if (id == "fmt ") {
            const auto format = get<std::uint16_t>(bytes, body);
            const auto channels = get<std::uint16_t>(bytes, body + 2);
            w.sample_rate = static_cast<int>(get<std::uint32_t>(bytes, body + 4));
            const auto bits = get<std::uint16_t>(bytes, body + 14);
            if (format != 1 || channels != 1 || bits != 16)
                throw ValidationError("only 16-bit PCM mono WAV is supported");
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw ValidationError("WAV data chunk before fmt chunk");
            if (body + len > bytes.size()) throw ValidationError("truncated WAV data");
            w.samples.resize(len / 2);
            for (std::size_t i = 0; i < w.samples.size(); ++i)
                w.samples[i] = static_cast<float>(get<std::int16_t>(bytes, body + 2 * i) / 32767.0);
            return w;
        }
        off = body + len + (len & 1);
    }
    throw ValidationError("WAV file has no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) { write_file_atomic(path, encode_wav(w)); }

Waveform read_wav(const std::filesystem::path& path) {
    try {
        return decode_wav(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string encode_mel(const MelSpectrogram& m) {
    nlohmann::json header{{"shape", {m.n_frames(), m.n_mels()}},
                          {"frame_rate", m.frame_rate},
                          {"fingerprint", m.fingerprint},
                          {"dtype", "float32"}};
    std::string s = header.dump();
    s += '\n';
    s.append(reinterpret_cast<const char*>(m.frames.data.data()), m.frames.data.size() * sizeof(float));
    return s;
}

MelSpectrogram decode_mel(const std::string& bytes) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw ValidationError("mel file has no header line");
    const auto header = nlohmann::json::parse(bytes.substr(0, nl));
    MelSpectrogram m;
    const int rows = header.at("shape").at(0).get<int>();
    const int cols = header.at("shape").at(1).get<int>();
    m.frame_rate = header.at("frame_rate").get<double>();
    m.fingerprint = header.at("fingerprint").get<std::string>();
    m.frames = Matrix<float>(rows, cols);
    const std::size_t need = m.frames.data.size() * sizeof(float);
    if (bytes.size() - nl - 1 != need) throw ValidationError("mel payload size does not match header shape");
    std::memcpy(m.frames.data.data(), bytes.data() + nl + 1, need);
    return m;
}

void write_mel(const std::filesystem::path& path, const MelSpectrogram& m) { write_file_atomic(path, encode_mel(m)); }

MelSpectrogram read_mel(const std::filesystem::path& path) { return decode_mel(read_file(path)); }

}  // namespace hh::dsp

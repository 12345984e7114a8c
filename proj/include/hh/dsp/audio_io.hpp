#pragma once

#include <filesystem>
#include <string>

#include "hh/dsp/types.hpp"

namespace hh::dsp {

/// 16-bit PCM mono little-endian RIFF. Samples are clamped to [-1, 1].
std::string encode_wav(const Waveform& w);
Waveform decode_wav(const std::string& bytes);
void write_wav(const std::filesystem::path& path, const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);

/// One JSON header line ({shape, frame_rate, fingerprint}) followed by row-major float32 LE values.
std::string encode_mel(const MelSpectrogram& m);
MelSpectrogram decode_mel(const std::string& bytes);
void write_mel(const std::filesystem::path& path, const MelSpectrogram& m);
MelSpectrogram read_mel(const std::filesystem::path& path);

}  // namespace hh::dsp

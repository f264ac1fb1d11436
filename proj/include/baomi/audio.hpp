#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace baomi {

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1]
  std::uint32_t sample_rate_hz = 0;
  std::string recording_id;
};

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reads a RIFF/WAVE file holding 16-bit PCM mono audio; samples are scaled by
// 1/32768. The recording id defaults to the file stem.
AudioClip load_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono. Samples are clamped to [-1, 1) before quantizing.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

// Zero-pads every clip at the end to the longest clip's length. All clips must
// share one sample rate.
std::vector<AudioClip> pad_to_max(std::vector<AudioClip> clips);

}  // namespace baomi

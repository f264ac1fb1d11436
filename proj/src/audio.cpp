#include "baomi/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace baomi {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavError(where + "malformed header (not RIFF/WAVE)");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* payload = nullptr;
  std::size_t payload_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      // A truncated data chunk is tolerated up to the bytes actually present.
      if (std::memcmp(chunk, "data", 4) != 0) {
        throw WavError(where + "malformed header (chunk overruns file)");
      }
    }
    const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) throw WavError(where + "malformed header (short fmt chunk)");
      std::uint16_t format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible && available >= 26) {
        format = read_u16(chunk + 8 + 24);  // first two bytes of the subformat GUID
      }
      if (format != kFormatPcm) {
        throw WavError(where + "unsupported encoding (format tag " +
                       std::to_string(format) + ", need PCM)");
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      payload = chunk + 8;
      payload_size = available;
    }
    pos = body + available + (available & 1);
  }

  if (!have_fmt) throw WavError(where + "malformed header (no fmt chunk)");
  if (!payload) throw WavError(where + "malformed header (no data chunk)");
  if (channels != 1) {
    throw WavError(where + "unsupported encoding (" + std::to_string(channels) +
                   " channels, need mono)");
  }
  if (bits != 16) {
    throw WavError(where + "unsupported encoding (" + std::to_string(bits) +
                   "-bit samples, need 16-bit)");
  }
  if (rate == 0) throw WavError(where + "malformed header (zero sample rate)");

  AudioClip clip;
  clip.sample_rate_hz = rate;
  clip.recording_id = path.stem().string();
  clip.samples.resize(payload_size / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const auto raw = static_cast<std::int16_t>(read_u16(payload + 2 * i));
    clip.samples[i] = raw / 32768.0;
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  if (clip.sample_rate_hz == 0) throw WavError("write_wav: zero sample rate");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, clip.sample_rate_hz);
  put_u32(out, clip.sample_rate_hz * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : clip.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw WavError("cannot create " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw WavError("write failed for " + path.string());
}

std::vector<AudioClip> pad_to_max(std::vector<AudioClip> clips) {
  if (clips.empty()) throw std::invalid_argument("pad_to_max: no clips");
  const std::uint32_t rate = clips.front().sample_rate_hz;
  std::size_t longest = 0;
  for (const AudioClip& c : clips) {
    if (c.sample_rate_hz != rate) {
      throw std::invalid_argument("pad_to_max: mixed sample rates (" +
                                  std::to_string(rate) + " Hz and " +
                                  std::to_string(c.sample_rate_hz) + " Hz in " +
                                  c.recording_id + ")");
    }
    longest = std::max(longest, c.samples.size());
  }
  for (AudioClip& c : clips) c.samples.resize(longest, 0.0);
  return clips;
}

}  // namespace baomi

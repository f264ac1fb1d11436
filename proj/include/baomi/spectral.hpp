#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "baomi/audio.hpp"

namespace baomi {

struct SpectralConfig {
  double frame_length_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t n_mel_filters = 128;
  std::size_t n_linear_filters = 24;
  std::size_t n_mfcc = 40;
  std::size_t n_lfcc = 14;
  double log_floor = 1e-10;
  // 0 picks the smallest power of two >= the frame length at which every
  // filter of the requested bank covers at least one FFT bin.
  std::size_t fft_size = 0;
};

enum class FilterScale { mel, linear };

class ClipTooShortError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double hz_to_mel(double hz);  // HTK: 2595 log10(1 + hz / 700)
double mel_to_hz(double mel);

/// Triangular filters spanning 0 Hz to Nyquist. Edges are equally spaced on
/// the mel or linear axis; each row is normalized to sum to 1 over the bins.
struct Filterbank {
  FilterScale scale = FilterScale::mel;
  std::size_t fft_size = 0;
  std::uint32_t sample_rate_hz = 0;
  std::vector<double> edges_hz;              // n_filters + 2 points
  std::vector<std::vector<double>> weights;  // n_filters x (fft_size / 2 + 1)

  std::size_t size() const { return weights.size(); }
  double left_hz(std::size_t i) const { return edges_hz[i]; }
  double center_hz(std::size_t i) const { return edges_hz[i + 1]; }
  double right_hz(std::size_t i) const { return edges_hz[i + 2]; }
  std::vector<double> apply(std::span<const double> power) const;
};

Filterbank make_filterbank(FilterScale scale, std::size_t n_filters,
                           std::size_t fft_size, std::uint32_t sample_rate_hz);

struct FrameLayout {
  std::size_t frame_samples = 0;
  std::size_t hop_samples = 0;
  std::size_t fft_size = 0;
};

FrameLayout frame_layout(const SpectralConfig& cfg, std::uint32_t sample_rate_hz,
                         FilterScale scale);

// Periodic Hann window of the given length.
std::vector<double> hann_window(std::size_t length);

// |FFT|^2 of the frame zero-padded to fft_size; fft_size / 2 + 1 bins.
std::vector<double> power_spectrum(std::span<const double> frame, std::size_t fft_size);

// Orthonormal DCT-II and its inverse (DCT-III).
std::vector<double> dct_ii(std::span<const double> x);
std::vector<double> inverse_dct_ii(std::span<const double> coeffs);

// Pre-log filterbank energies, one row per frame (Hann window, full frames only).
std::vector<std::vector<double>> filterbank_energies(const AudioClip& clip,
                                                     const SpectralConfig& cfg,
                                                     FilterScale scale);

// log(energy + floor) -> DCT-II -> first n_coeffs, averaged over frames.
std::vector<double> cepstral_features(const AudioClip& clip, const SpectralConfig& cfg,
                                      FilterScale scale, std::size_t n_coeffs);

std::vector<double> mfcc(const AudioClip& clip, const SpectralConfig& cfg = {});
std::vector<double> lfcc(const AudioClip& clip, const SpectralConfig& cfg = {});

}  // namespace baomi

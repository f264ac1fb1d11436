#include "baomi/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace baomi {

namespace {

// FFTW's planner is not thread-safe; plan execution on fresh arrays is.
std::mutex g_planner_mutex;

struct PlanDeleter {
  void operator()(fftw_plan_s* plan) const {
    std::lock_guard lock(g_planner_mutex);
    fftw_destroy_plan(plan);
  }
};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

bool every_filter_nonempty(const Filterbank& bank) {
  return std::all_of(bank.weights.begin(), bank.weights.end(), [](const auto& row) {
    return std::any_of(row.begin(), row.end(), [](double w) { return w > 0.0; });
  });
}

// Builds the raw triangles; rows are normalized afterwards.
Filterbank triangles(FilterScale scale, std::size_t n_filters, std::size_t fft_size,
                     std::uint32_t sample_rate_hz) {
  Filterbank bank;
  bank.scale = scale;
  bank.fft_size = fft_size;
  bank.sample_rate_hz = sample_rate_hz;
  const double nyquist = sample_rate_hz / 2.0;
  bank.edges_hz.resize(n_filters + 2);
  const double top = scale == FilterScale::mel ? hz_to_mel(nyquist) : nyquist;
  for (std::size_t i = 0; i < n_filters + 2; ++i) {
    const double point = top * static_cast<double>(i) / static_cast<double>(n_filters + 1);
    bank.edges_hz[i] = scale == FilterScale::mel ? mel_to_hz(point) : point;
  }
  bank.edges_hz.back() = nyquist;

  const std::size_t bins = fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(fft_size);
  bank.weights.assign(n_filters, std::vector<double>(bins, 0.0));
  for (std::size_t i = 0; i < n_filters; ++i) {
    const double left = bank.left_hz(i), center = bank.center_hz(i),
                 right = bank.right_hz(i);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      const double rising = (f - left) / (center - left);
      const double falling = (right - f) / (right - center);
      bank.weights[i][k] = std::max(0.0, std::min(rising, falling));
    }
  }
  return bank;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> Filterbank::apply(std::span<const double> power) const {
  std::vector<double> out(weights.size(), 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& row = weights[i];
    double acc = 0.0;
    for (std::size_t k = 0; k < row.size() && k < power.size(); ++k) acc += row[k] * power[k];
    out[i] = acc;
  }
  return out;
}

Filterbank make_filterbank(FilterScale scale, std::size_t n_filters, std::size_t fft_size,
                           std::uint32_t sample_rate_hz) {
  if (n_filters == 0) throw std::invalid_argument("filterbank needs at least one filter");
  if (fft_size < 2) throw std::invalid_argument("filterbank fft_size must be >= 2");
  Filterbank bank = triangles(scale, n_filters, fft_size, sample_rate_hz);
  if (!every_filter_nonempty(bank)) {
    throw std::invalid_argument("fft_size " + std::to_string(fft_size) +
                                " too small: some of the " + std::to_string(n_filters) +
                                " filters cover no FFT bin");
  }
  for (auto& row : bank.weights) {
    double total = 0.0;
    for (double w : row) total += w;
    for (double& w : row) w /= total;
  }
  return bank;
}

FrameLayout frame_layout(const SpectralConfig& cfg, std::uint32_t sample_rate_hz,
                         FilterScale scale) {
  if (sample_rate_hz == 0) throw std::invalid_argument("sample rate must be positive");
  FrameLayout layout;
  layout.frame_samples = static_cast<std::size_t>(
      std::lround(sample_rate_hz * cfg.frame_length_ms / 1000.0));
  layout.hop_samples =
      static_cast<std::size_t>(std::lround(sample_rate_hz * cfg.hop_ms / 1000.0));
  if (layout.frame_samples == 0 || layout.hop_samples == 0) {
    throw std::invalid_argument("frame or hop rounds to zero samples");
  }
  if (cfg.fft_size != 0) {
    if (cfg.fft_size < layout.frame_samples) {
      throw std::invalid_argument("fft_size smaller than the frame");
    }
    layout.fft_size = cfg.fft_size;
    return layout;
  }
  const std::size_t n_filters =
      scale == FilterScale::mel ? cfg.n_mel_filters : cfg.n_linear_filters;
  std::size_t size = next_pow2(layout.frame_samples);
  while (!every_filter_nonempty(triangles(scale, n_filters, size, sample_rate_hz))) {
    size <<= 1;
  }
  layout.fft_size = size;
  return layout;
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / static_cast<double>(length));
  }
  return w;
}

std::vector<double> power_spectrum(std::span<const double> frame, std::size_t fft_size) {
  if (frame.size() > fft_size) throw std::invalid_argument("frame longer than fft_size");
  const std::size_t bins = fft_size / 2 + 1;
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(fft_size));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(bins));
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard lock(g_planner_mutex);
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(fft_size), in.get(), out.get(),
                                    FFTW_ESTIMATE));
  }
  std::fill_n(in.get(), fft_size, 0.0);
  std::copy(frame.begin(), frame.end(), in.get());
  fftw_execute(plan.get());
  std::vector<double> power(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    power[k] = out.get()[k][0] * out.get()[k][0] + out.get()[k][1] * out.get()[k][1];
  }
  return power;
}

std::vector<double> dct_ii(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n));
    }
    out[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
  }
  return out;
}

std::vector<double> inverse_dct_ii(std::span<const double> coeffs) {
  const std::size_t n = coeffs.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += coeffs[k] * std::sqrt((k == 0 ? 1.0 : 2.0) / n) *
             std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n));
    }
    out[i] = acc;
  }
  return out;
}

std::vector<std::vector<double>> filterbank_energies(const AudioClip& clip,
                                                     const SpectralConfig& cfg,
                                                     FilterScale scale) {
  const FrameLayout layout = frame_layout(cfg, clip.sample_rate_hz, scale);
  if (clip.samples.size() < layout.frame_samples) {
    throw ClipTooShortError("clip '" + clip.recording_id + "' has " +
                            std::to_string(clip.samples.size()) +
                            " samples, fewer than one frame of " +
                            std::to_string(layout.frame_samples));
  }
  const std::size_t n_filters =
      scale == FilterScale::mel ? cfg.n_mel_filters : cfg.n_linear_filters;
  const Filterbank bank =
      make_filterbank(scale, n_filters, layout.fft_size, clip.sample_rate_hz);
  const std::vector<double> window = hann_window(layout.frame_samples);

  const std::size_t bins = layout.fft_size / 2 + 1;
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(layout.fft_size));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(bins));
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard lock(g_planner_mutex);
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(layout.fft_size), in.get(),
                                    out.get(), FFTW_ESTIMATE));
  }

  const std::size_t n_frames =
      1 + (clip.samples.size() - layout.frame_samples) / layout.hop_samples;
  std::vector<std::vector<double>> energies;
  energies.reserve(n_frames);
  std::vector<double> power(bins);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double* src = clip.samples.data() + f * layout.hop_samples;
    std::fill_n(in.get(), layout.fft_size, 0.0);
    for (std::size_t n = 0; n < layout.frame_samples; ++n) in.get()[n] = src[n] * window[n];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < bins; ++k) {
      power[k] = out.get()[k][0] * out.get()[k][0] + out.get()[k][1] * out.get()[k][1];
    }
    energies.push_back(bank.apply(power));
  }
  return energies;
}

std::vector<double> cepstral_features(const AudioClip& clip, const SpectralConfig& cfg,
                                      FilterScale scale, std::size_t n_coeffs) {
  const std::size_t n_filters =
      scale == FilterScale::mel ? cfg.n_mel_filters : cfg.n_linear_filters;
  if (n_coeffs > n_filters) {
    throw std::invalid_argument("cannot keep " + std::to_string(n_coeffs) +
                                " coefficients from " + std::to_string(n_filters) +
                                " filters");
  }
  const auto energies = filterbank_energies(clip, cfg, scale);
  // Rows of the orthonormal DCT-II basis, so dct_ii(x)[k] == basis[k] . x.
  std::vector<double> basis(n_coeffs * n_filters);
  std::vector<double> unit(n_filters, 0.0);
  for (std::size_t i = 0; i < n_filters; ++i) {
    unit[i] = 1.0;
    const std::vector<double> column = dct_ii(unit);
    for (std::size_t k = 0; k < n_coeffs; ++k) basis[k * n_filters + i] = column[k];
    unit[i] = 0.0;
  }
  // Averaging commutes with the linear DCT, so average the log energies first.
  std::vector<double> mean_log(n_filters, 0.0);
  for (const auto& frame : energies) {
    for (std::size_t i = 0; i < n_filters; ++i) mean_log[i] += std::log(frame[i] + cfg.log_floor);
  }
  for (double& v : mean_log) v /= static_cast<double>(energies.size());
  std::vector<double> mean(n_coeffs, 0.0);
  for (std::size_t k = 0; k < n_coeffs; ++k) {
    for (std::size_t i = 0; i < n_filters; ++i) mean[k] += basis[k * n_filters + i] * mean_log[i];
  }
  return mean;
}

std::vector<double> mfcc(const AudioClip& clip, const SpectralConfig& cfg) {
  return cepstral_features(clip, cfg, FilterScale::mel, cfg.n_mfcc);
}

std::vector<double> lfcc(const AudioClip& clip, const SpectralConfig& cfg) {
  return cepstral_features(clip, cfg, FilterScale::linear, cfg.n_lfcc);
}

}  // namespace baomi

// dsr/dsp.cc

// Copyright 2026  The DSR Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dsr/dsp.h"

#include <cmath>

namespace dsr {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }
}  // namespace

void fft_inplace(std::vector<std::complex<double>>* xp, bool inverse) {
  auto& x = *xp;
  const size_t n = x.size();
  DSR_REQUIRE(is_pow2(n), "fft: size " << n << " is not a power of two");
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = x[i + k];
        std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : x) v *= inv;
  }
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / static_cast<double>(n));
  return w;
}

std::vector<double> frame_power_spectrum(const double* frame, int frame_len,
                                         const std::vector<double>& window, int nfft) {
  DSR_REQUIRE(static_cast<int>(window.size()) == frame_len, "window/frame length mismatch");
  DSR_REQUIRE(frame_len <= nfft, "frame longer than nfft");
  std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
  for (int i = 0; i < frame_len; ++i) buf[i] = frame[i] * window[i];
  fft_inplace(&buf);
  std::vector<double> power(nfft / 2 + 1);
  for (int k = 0; k <= nfft / 2; ++k) power[k] = std::norm(buf[k]);
  return power;
}

int num_frames(size_t num_samples, int hop) {
  int f = static_cast<int>(num_samples / static_cast<size_t>(hop));
  return f < 1 ? 1 : f;
}

void extract_centered_frame(const Waveform& x, int frame_index, int hop, int win,
                            double* out) {
  const long long center = static_cast<long long>(frame_index) * hop + hop / 2;
  const long long start = center - win / 2;
  for (int i = 0; i < win; ++i) {
    long long s = start + i;
    out[i] = (s >= 0 && s < static_cast<long long>(x.size())) ? x[s] : 0.0;
  }
}

Stft::Stft(int win_len, int hop_len, int nfft_len)
    : win(win_len), hop(hop_len), nfft(nfft_len), window(hann_window(win_len)) {
  DSR_REQUIRE(win <= nfft, "stft: win > nfft");
  DSR_REQUIRE(hop > 0 && hop <= win, "stft: invalid hop");
}

std::vector<std::vector<std::complex<double>>> Stft::analyze(const Waveform& x) const {
  const int frames = num_frames(x.size(), hop);
  std::vector<std::vector<std::complex<double>>> spec(frames);
  std::vector<std::complex<double>> buf(nfft);
  std::vector<double> frame(win);
  for (int f = 0; f < frames; ++f) {
    extract_centered_frame(x, f, hop, win, frame.data());
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (int i = 0; i < win; ++i) buf[i] = frame[i] * window[i];
    fft_inplace(&buf);
    spec[f].assign(buf.begin(), buf.begin() + nfft / 2 + 1);
  }
  return spec;
}

Waveform Stft::synthesize(const std::vector<std::vector<std::complex<double>>>& spec,
                          size_t out_len) const {
  const int frames = static_cast<int>(spec.size());
  const size_t buf_len = static_cast<size_t>(frames) * hop + win;
  Waveform acc(buf_len, 0.0), norm(buf_len, 0.0);
  std::vector<std::complex<double>> buf(nfft);
  for (int f = 0; f < frames; ++f) {
    DSR_REQUIRE(static_cast<int>(spec[f].size()) == nfft / 2 + 1, "stft: bad bin count");
    for (int k = 0; k <= nfft / 2; ++k) {
      buf[k] = spec[f][k];
      if (k > 0 && k < nfft / 2) buf[nfft - k] = std::conj(spec[f][k]);
    }
    fft_inplace(&buf, /*inverse=*/true);
    const long long center = static_cast<long long>(f) * hop + hop / 2;
    const long long start = center - win / 2;
    for (int i = 0; i < win; ++i) {
      long long s = start + i;
      if (s < 0 || s >= static_cast<long long>(buf_len)) continue;
      acc[s] += buf[i].real() * window[i];
      norm[s] += window[i] * window[i];
    }
  }
  Waveform out(out_len, 0.0);
  for (size_t i = 0; i < out_len && i < buf_len; ++i)
    out[i] = norm[i] > 1e-10 ? acc[i] / norm[i] : 0.0;
  return out;
}

double signal_power(const Waveform& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

double snr_db(const Waveform& reference, const Waveform& estimate) {
  DSR_REQUIRE(reference.size() == estimate.size(), "snr_db: length mismatch");
  double sig = 0.0, err = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    sig += reference[i] * reference[i];
    const double e = reference[i] - estimate[i];
    err += e * e;
  }
  if (err <= 0.0) return 300.0;  // exact match
  return 10.0 * std::log10(sig / err);
}

}  // namespace dsr

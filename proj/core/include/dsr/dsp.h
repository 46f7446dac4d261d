// dsr/dsp.h

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

#ifndef DSR_DSP_H_
#define DSR_DSP_H_

#include <complex>
#include <vector>

#include "dsr/common.h"
#include "dsr/mat.h"

namespace dsr {

using Waveform = std::vector<double>;

// Global audio geometry: 16 kHz mono, 10 ms hop (100 frames/s) everywhere.
constexpr int kSampleRate = 16000;
constexpr int kHopSamples = 160;
constexpr int kFrameRate = kSampleRate / kHopSamples;

// In-place iterative radix-2 FFT; n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>* x, bool inverse = false);

// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

// Power spectrum (|X_k|^2, k = 0..nfft/2) of one zero-padded, windowed frame.
std::vector<double> frame_power_spectrum(const double* frame, int frame_len,
                                         const std::vector<double>& window, int nfft);

// Center-aligned framing: frame k covers samples around k*hop. The frame
// count is len/hop (floor, at least 1), so frame indices line up with
// 10 ms ground-truth durations.
int num_frames(size_t num_samples, int hop);

// Copies the window around center k*hop into out[0..win), zero-padding edges.
void extract_centered_frame(const Waveform& x, int frame_index, int hop, int win,
                            double* out);

// STFT / inverse STFT pair with weighted overlap-add; used by the
// spectral-gate enhancer. Round trip is exact up to edge normalization.
struct Stft {
  int win;
  int hop;
  int nfft;
  std::vector<double> window;

  Stft(int win_len, int hop_len, int nfft_len);

  // Returns frames x bins complex spectra (bins = nfft/2+1).
  std::vector<std::vector<std::complex<double>>> analyze(const Waveform& x) const;

  // Inverse with synthesis windows and sum-of-squares normalization; output
  // trimmed/padded to out_len samples.
  Waveform synthesize(const std::vector<std::vector<std::complex<double>>>& spec,
                      size_t out_len) const;
};

double signal_power(const Waveform& x);

// 10*log10(power(reference) / power(reference - estimate)).
double snr_db(const Waveform& reference, const Waveform& estimate);

}  // namespace dsr

#endif  // DSR_DSP_H_

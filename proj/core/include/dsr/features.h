// dsr/features.h

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

#ifndef DSR_FEATURES_H_
#define DSR_FEATURES_H_

#include <memory>
#include <string>
#include <vector>

#include "dsr/dsp.h"
#include "dsr/mat.h"

namespace dsr {

// Frame-level features produced by a frozen backend.
struct FeatureSequence {
  Mat frames;  // T x D
  double frame_rate = kFrameRate;
  std::string backend_id;
};

// Frozen feature front-end contract: deterministic, no trainable state, no
// gradients flow into it. Backends are looked up by id so pre-trained
// extractors can slot in behind the same interface.
class FeatureBackend {
 public:
  virtual ~FeatureBackend() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  virtual FeatureSequence extract(const Waveform& x) const = 0;
};

// Registry. "mockfbank" (log filterbank + fixed random projection) is always
// present. Registration must happen before concurrent lookups start.
void register_feature_backend(std::shared_ptr<FeatureBackend> backend);
const FeatureBackend& feature_backend(const std::string& id);
std::vector<std::string> list_feature_backends();

// Triangular filterbank with log-spaced centers, rows x (nfft/2+1).
Mat triangular_filterbank(int num_bands, double fmin, double fmax, int nfft);

// Triangular filterbank with mel-spaced centers (HTK mel curve). Unlike the
// purely log-spaced bank above, band widths stay above one FFT bin at low
// frequencies, so every row is guaranteed a positive peak weight.
Mat mel_filterbank(int num_bands, double fmin, double fmax, int nfft);

// Center frequencies (Hz) of the mel bank's triangles.
std::vector<double> mel_center_frequencies(int num_bands, double fmin, double fmax);

// Triangular filterbank with linearly spaced centers. Uniform spacing keeps
// neighboring bands resolvable by a short analysis window at every
// frequency, which sinusoid-bank resynthesis depends on.
Mat linear_filterbank(int num_bands, double fmin, double fmax, int nfft);
std::vector<double> linear_center_frequencies(int num_bands, double fmin, double fmax);

// Band energies of center-aligned frames: num_frames(x) x num_bands.
Mat filterbank_energies(const Waveform& x, const Mat& filterbank, int win, int nfft);

}  // namespace dsr

#endif  // DSR_FEATURES_H_

// dsr/codec.h

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

#ifndef DSR_CODEC_H_
#define DSR_CODEC_H_

#include <string>
#include <vector>

#include "dsr/config.h"
#include "dsr/dsp.h"
#include "dsr/manifest.h"
#include "dsr/mat.h"

namespace dsr {

// Continuous or quantized codec frames plus provenance bookkeeping.
struct CodecFrameSequence {
  Mat frames;  // N x C
  double frame_rate = kFrameRate;
  std::string source_tag = "raw";  // "raw" | "normalized"
};

// Fixed analysis front-end parameters, shared between the codec and the
// speaker-embedding front-end so both operate in the same band space.
struct AnalysisSpec {
  int bands = 64;
  double fmin = 50.0;
  double fmax = 7800.0;
  int win = 400;
  int nfft = 1024;
};

// Toy low-bitrate codec standing in for a pre-trained neural codec.
//
// Analysis: sqrt band energies of a linearly spaced triangular filterbank at
// 100 Hz (a fixed, invertible-enough front-end instead of a learned
// encoder; uniform spacing keeps neighboring bands resolvable by the
// analysis window, which the resynthesis depends on). Quantization:
// residual VQ, `stages` codebooks of `codebook_size` entries each; entry 0
// of every stage is pinned to the zero vector, so adding a stage can never
// increase any frame's residual norm. Synthesis: per-band sinusoid bank at
// the band centers with globally coherent phase, overlap-added; amplitudes
// pass through a fitted band-energy equalizer that undoes analysis
// cross-talk.
struct CodecModel {
  AnalysisSpec analysis;
  int stages = 4;
  int codebook_size = 256;
  std::vector<Mat> codebooks;      // stages entries, each codebook_size x bands
  std::vector<double> band_freq;   // synthesis frequencies (Hz), one per band
  Mat energy_equalizer;            // bands x bands: target energy -> synth energy
  std::vector<double> latent_mean; // per-band stats of training latents
  std::vector<double> latent_std;  // (for consumers that need unit-scale z0)
  std::string codec_id = "toyrvq1";

  int latent_dim() const { return analysis.bands; }
};

// Deterministic analysis front-end: num_frames(x) x bands matrix of sqrt
// mel-band energies, one row per 10 ms hop.
Mat codec_analysis_frames(const Waveform& x, const AnalysisSpec& spec = {});

struct CodecEncoding {
  CodecFrameSequence quantized;  // RVQ reconstruction: sum of chosen entries
  Mat continuous;                // pre-quantization latents (z0 targets)
  std::vector<int> tokens;       // frame-major: frame t, stage r at [t*stages + r]
};

// Fits codebooks (k-means per stage on residuals), the synthesis equalizer,
// and latent statistics on the severity-0 rows of `manifest`. Throws if the
// manifest yields fewer frames than one codebook needs.
CodecModel codec_train(const Manifest& manifest, const Config& config);

CodecEncoding codec_encode(const Waveform& x, const CodecModel& model);

// Synthesizes a waveform of exactly frames*hop samples from continuous
// latents (negative entries are treated as zero amplitude).
Waveform codec_decode(const Mat& z0, const CodecModel& model);

// Quantizes already-analyzed frames. Optional outputs: `tokens` as in
// CodecEncoding; `residual_norms` gets one row per frame with stages+1
// columns, column r = residual L2 norm after r stages (column 0 is the
// pre-quantization norm).
Mat codec_quantize(const Mat& frames, const CodecModel& model, std::vector<int>* tokens,
                   Mat* residual_norms);

void save_codec(const std::string& path, const CodecModel& model);
CodecModel load_codec(const std::string& path);

// Mean feature-domain round-trip SNR (dB) over manifest rows:
// analysis(decode(latents)) vs analysis(x), with `quantize` choosing whether
// latents pass through the RVQ first.
double codec_feature_snr(const Manifest& manifest, const CodecModel& model, bool quantize);

}  // namespace dsr

#endif  // DSR_CODEC_H_

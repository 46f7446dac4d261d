// dsr/generator.h

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

#ifndef DSR_GENERATOR_H_
#define DSR_GENERATOR_H_

#include <memory>
#include <string>
#include <vector>

#include "dsr/codec.h"
#include "dsr/diffusion.h"
#include "dsr/speaker_encoder.h"
#include "dsr/variance_adaptor.h"

namespace dsr {

// Construction-time dimensions, persisted in the checkpoint so a bundle can
// be rebuilt without the original configuration file.
struct GeneratorDims {
  int vocab = 0;        // token inventory size (no blank)
  int latent = 0;       // codec latent dim
  int hidden = 0;
  int prompt_blocks = 0;
  int prompt_heads = 0;
  int variance_kernel = 0;
  int variance_heads = 0;
  int pitch_bins = 0;
  int diffusion_blocks = 0;
  int diffusion_cycle = 0;
  int diffusion_heads = 0;
};

// The trainable half of the pipeline: prompt encoder, variance adaptor and
// diffusion backbone sharing one parameter store, plus the latent whitening
// statistics that map codec latents to the roughly unit-scale space the
// VP diffusion operates in.
struct GeneratorModel {
  GeneratorDims dims;
  VpSchedule schedule;
  double t_min = 1e-3;
  int prompt_max_frames = 96;
  std::string codec_id;
  uint64_t config_hash = 0;
  std::vector<double> latent_mean;  // per band; identity until trained
  std::vector<double> latent_std;

  ParamStore params;
  std::unique_ptr<PromptEncoder> prompt_encoder;
  std::unique_ptr<VarianceAdaptor> adaptor;
  std::unique_ptr<DiffusionBackbone> backbone;
};

// Fresh, untrained model with dimensions taken from `config` and identity
// whitening. `vocab` is the phoneme-token count, `latent_dim` the codec band
// count the backbone denoises.
std::unique_ptr<GeneratorModel> make_generator(const Config& config, int vocab,
                                               int latent_dim, const std::string& codec_id,
                                               uint64_t seed);

// (x - mean) / std per band, and its inverse.
Mat whiten_latents(const GeneratorModel& model, const Mat& latents);
Mat unwhiten_latents(const GeneratorModel& model, const Mat& latents);

struct GenerateOptions {
  int steps = 100;
  double temperature = 1.0;
  // Teacher-forced per-token frame counts (evaluation); nullptr = predicted.
  const std::vector<int>* forced_durations = nullptr;
};

struct GeneratorOutput {
  LatentSequence latents;  // codec scale (un-whitened)
  DurationSeq durations;
  PitchContour pitch;
};

// Tokens + normalized codec prompt -> codec latents: embed tokens, predict
// durations and pitch against the encoded prompt, length-regulate, then run
// the reverse sampler on the frame condition. The prompt is capped at
// prompt_max_frames (leading frames).
GeneratorOutput generate(const GeneratorModel& model, const std::vector<int>& tokens,
                         const CodecFrameSequence& prompt, const GenerateOptions& options,
                         Rng* rng);

struct GeneratorStepLoss {
  double total = 0.0;
  double diffusion = 0.0;  // z0 MSE
  double duration = 0.0;   // unweighted log-duration MSE
  double pitch = 0.0;      // unweighted Hz MSE (voiced frames)
  double voice = 0.0;      // unweighted voicing BCE
};

struct GeneratorTrainReport {
  std::vector<GeneratorStepLoss> curve;  // one entry per optimizer step
};

// Joint teacher-forced training of backbone + variance adaptor + prompt
// encoder on the severity-0 rows of `manifest`. Targets come from the codec
// (whitened continuous latents) and the alignment sidecars; the prompt for
// each item is the normalized codec encoding of a different utterance of the
// same speaker (enhanced with the configured method first). Every severity-0
// speaker must have at least two utterances.
std::unique_ptr<GeneratorModel> train_generator(const Manifest& manifest,
                                                const CodecModel& codec,
                                                const SvEmbedder& embedder,
                                                const NormalCodecSet& normal_set,
                                                const Config& config,
                                                GeneratorTrainReport* report);

// Checkpoint bundle: <dir>/generator.bin (authoritative binary blob) plus
// <dir>/generator_meta.kv (human-readable record of schedule, dims, codec id
// and config hash).
void save_generator(const GeneratorModel& model, const std::string& dir);
std::unique_ptr<GeneratorModel> load_generator(const std::string& dir);

}  // namespace dsr

#endif  // DSR_GENERATOR_H_

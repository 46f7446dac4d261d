// dsr/speaker_encoder.h

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

#ifndef DSR_SPEAKER_ENCODER_H_
#define DSR_SPEAKER_ENCODER_H_

#include <memory>
#include <string>
#include <vector>

#include "dsr/codec.h"
#include "dsr/config.h"
#include "dsr/nn.h"
#include "dsr/sv.h"

namespace dsr {

// Speech-enhancement front-end. "passthrough" returns the input unchanged;
// "specgate" runs per-bin spectral gating against an estimated noise floor.
// Both preserve length exactly; unknown methods are rejected.
Waveform enhance(const Waveform& x, const std::string& method);

// Library of normal-speech codec windows with precomputed speaker
// embeddings; the target set of codec normalization. Immutable once built.
struct NormalCodecSet {
  int window = 8;  // frames per entry
  int bands = 64;
  int embed_dim = 0;
  std::string embedder_id;
  std::string codec_id;
  uint64_t seed = 0;
  std::vector<Mat> entries;                     // each window x bands
  std::vector<std::vector<double>> embeddings;  // unit L2, aligned 1:1

  int size() const { return static_cast<int>(entries.size()); }
};

// Harvests every stride-1 window of the quantized codec frames of the
// (strictly severity-0) manifest rows, drops duplicates, subsamples to
// speaker.set_size with a fixed seed and precomputes embeddings.
NormalCodecSet build_normal_set(const Manifest& manifest, const CodecModel& codec,
                                const SvEmbedder& embedder, const Config& config);

void save_normal_set(const std::string& path, const NormalCodecSet& set);
NormalCodecSet load_normal_set(const std::string& path);

// Replaces each consecutive window of `window` codec frames by the set entry
// whose embedding is nearest in elementwise L1 distance (ties to the lowest
// entry index). A trailing partial window of L frames is matched against the
// length-L prefixes of the entries and replaced by the winning prefix, so
// output length always equals input length. The embedder must be the one the
// set was built with.
CodecFrameSequence normalize_codec(const CodecFrameSequence& z_hat, const NormalCodecSet& set,
                                   const SvEmbedder& embedder);

// Hidden speaker-aware representation produced from a codec prompt.
struct SpeakerPrompt {
  Mat frames;  // N x hidden
};

// Transformer prompt encoder: input projection followed by pre-LN
// self-attention + feed-forward blocks with residual connections.
// Length-preserving; trained jointly with the generator.
class PromptEncoder {
 public:
  struct BlockCache {
    LayerNorm::Cache ln1c, ln2c;
    MultiHeadAttention::Cache attnc;
    Linear::Cache ff1c, ff2c;
    Mat ff1_out;  // pre-activation
  };
  struct Cache {
    Linear::Cache proj;
    std::vector<BlockCache> blocks;
  };

  PromptEncoder(ParamStore* store, const std::string& prefix, int in_dim, int hidden,
                int heads, int blocks, Rng* rng);
  ~PromptEncoder();

  SpeakerPrompt encode(const CodecFrameSequence& z_tilde) const;

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, Cache* cache) const;
  void backward(const Cache& cache, const Mat& dy, Mat* dx) const;

  int in_dim() const { return in_dim_; }
  int hidden() const { return hidden_; }

 private:
  struct Block;
  int in_dim_ = 0;
  int hidden_ = 0;
  std::unique_ptr<Linear> input_proj_;
  std::vector<std::unique_ptr<Block>> blocks_;
};

}  // namespace dsr

#endif  // DSR_SPEAKER_ENCODER_H_

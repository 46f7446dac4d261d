// dsr/sv.h

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

#ifndef DSR_SV_H_
#define DSR_SV_H_

#include <memory>
#include <string>
#include <vector>

#include "dsr/codec.h"
#include "dsr/config.h"
#include "dsr/manifest.h"
#include "dsr/nn.h"

namespace dsr {

// Unit-L2 speaker embedding tagged with the embedder that produced it.
struct SpeakerEmbedding {
  std::vector<double> vector;
  std::string embedder_id;
};

// Speaker-verification embedding contract. Inputs are frame matrices in the
// codec band space (N x bands): either codec/analysis frames of a waveform
// or a short window of codec frames. Outputs are deterministic and
// unit-L2-normalized.
class SvEmbedder {
 public:
  virtual ~SvEmbedder() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  virtual const AnalysisSpec& analysis() const = 0;

  virtual SpeakerEmbedding embed_frames(const Mat& frames) const = 0;
  SpeakerEmbedding embed_waveform(const Waveform& x) const;
};

// L1 distance between two embeddings (the metric used both for codec
// normalization and for identity evaluation).
double embedding_l1(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

// Deterministic training-free mock: per-band mean/std pooling through a
// fixed random projection. Useful wherever tests need an embedder without a
// training run.
std::unique_ptr<SvEmbedder> make_specstat_embedder(int dim, const AnalysisSpec& spec = {});

// Trainable embedder: mean/std pooling -> 2-layer MLP -> L2 normalization,
// optimized with a GE2E-style contrastive objective (softmax over scaled
// negative L1 distances to speaker centroids).
class TrainedSvEmbedder : public SvEmbedder {
 public:
  TrainedSvEmbedder(int dim, int hidden, const AnalysisSpec& spec, uint64_t init_seed);

  std::string id() const override { return "svnet"; }
  int dim() const override { return dim_; }
  const AnalysisSpec& analysis() const override { return spec_; }
  SpeakerEmbedding embed_frames(const Mat& frames) const override;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  friend TrainedSvEmbedder train_sv_embedder(const Manifest&, const Config&,
                                             std::vector<double>*);
  int dim_;
  int hidden_;
  AnalysisSpec spec_;
  ParamStore params_;
  std::unique_ptr<Linear> lin1_;
  std::unique_ptr<Linear> lin2_;
};

// Trains on severity-0 rows of `manifest` (>= 2 speakers required). If
// `loss_curve` is non-null it receives one mean loss value per step.
TrainedSvEmbedder train_sv_embedder(const Manifest& manifest, const Config& config,
                                    std::vector<double>* loss_curve);

void save_sv_embedder(const std::string& path, const TrainedSvEmbedder& emb);
std::unique_ptr<SvEmbedder> load_sv_embedder(const std::string& path);

// Mean same-speaker and cross-speaker L1 distances of per-utterance
// embeddings over a manifest; separation requires intra < inter.
struct SvSeparation {
  double intra = 0.0;
  double inter = 0.0;
};
SvSeparation sv_separation(const Manifest& manifest, const SvEmbedder& emb);

}  // namespace dsr

#endif  // DSR_SV_H_

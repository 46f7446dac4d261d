// dsr/variance_adaptor.h

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

#ifndef DSR_VARIANCE_ADAPTOR_H_
#define DSR_VARIANCE_ADAPTOR_H_

#include <memory>
#include <string>
#include <vector>

#include "dsr/config.h"
#include "dsr/nn.h"

namespace dsr {

// Per-token durations. Predictions live in the log domain; `frames` is the
// rounded (half-up), clamped-to-one integer view used for expansion.
struct DurationSeq {
  std::vector<double> log_frames;
  std::vector<int> frames;
};

// Per-frame pitch track. Unvoiced frames carry hz == 0 and voiced == 0.
struct PitchContour {
  std::vector<double> hz;
  std::vector<uint8_t> voiced;
};

// Frame-level diffusion condition: expanded hidden plus pitch embedding.
struct FrameCondition {
  Mat frames;  // F x H
};

// Repeats token row i durations[i] times (zero-duration tokens contribute
// nothing); the output row for frame f is the token whose prefix-sum bucket
// contains f.
Mat length_regulate(const Mat& hidden, const std::vector<int>& durations);

// Scatters frame gradients back onto tokens (the adjoint of
// length_regulate); accumulates into dhidden.
void length_regulate_backward(const Mat& dframes, const std::vector<int>& durations,
                              Mat* dhidden);

// Duration/pitch predictor: 2 x k3 convolutions with ReLU + LayerNorm, a
// residual Q-K-V cross-attention over the speaker prompt, and a
// zero-initialized linear head.
class VariancePredictor {
 public:
  struct Cache {
    Conv1d::Cache c1, c2;
    Mat conv1_out, conv2_out;  // pre-activation
    LayerNorm::Cache ln1c, ln2c;
    MultiHeadAttention::Cache attnc;
    Linear::Cache headc;
  };

  VariancePredictor(ParamStore* store, const std::string& prefix, int hidden, int prompt_dim,
                    int kernel, int heads, int out_dim, Rng* rng);

  Mat forward(const Mat& x, const Mat& prompt) const;
  Mat forward(const Mat& x, const Mat& prompt, Cache* cache) const;
  void backward(const Cache& cache, const Mat& dy, Mat* dx, Mat* dprompt) const;

  int hidden() const { return hidden_; }
  int out_dim() const { return out_dim_; }

 private:
  int hidden_ = 0, out_dim_ = 0;
  Conv1d conv1_, conv2_;
  LayerNorm ln1_, ln2_;
  MultiHeadAttention attn_;
  Linear head_;
};

// Token embedding, duration/pitch predictors and the pitch-bin embedding
// that together turn a phoneme sequence and a speaker prompt into the
// frame-level condition.
class VarianceAdaptor {
 public:
  struct ConditionCache {
    std::vector<int> bins;
  };

  VarianceAdaptor(ParamStore* store, const std::string& prefix, int vocab, int hidden,
                  int prompt_dim, const Config& config, Rng* rng);

  Mat embed_tokens(const std::vector<int>& tokens) const;
  DurationSeq predict_duration(const Mat& token_hidden, const Mat& prompt) const;
  // Raw per-frame head output: column 0 pitch in Hz, column 1 voicing logit.
  PitchContour predict_pitch(const Mat& expanded, const Mat& prompt) const;
  FrameCondition build_condition(const Mat& expanded, const PitchContour& pitch) const;
  Mat build_condition_train(const Mat& expanded, const PitchContour& pitch,
                            ConditionCache* cache) const;
  // Accumulates into dexpanded and the pitch-bin embedding gradient.
  void build_condition_backward(const ConditionCache& cache, const Mat& dy,
                                Mat* dexpanded) const;

  // Log-spaced voiced bins over [50, 500] Hz; bin 0 is unvoiced.
  static int pitch_bin_index(double hz, bool voiced, int bins);

  Embedding& token_embedding() { return token_emb_; }
  const Embedding& token_embedding() const { return token_emb_; }
  VariancePredictor& duration_predictor() { return dur_; }
  const VariancePredictor& duration_predictor() const { return dur_; }
  VariancePredictor& pitch_predictor() { return pitch_; }
  const VariancePredictor& pitch_predictor() const { return pitch_; }

  int hidden() const { return hidden_; }
  int vocab() const { return token_emb_.vocab(); }
  int pitch_bins() const { return pitch_bins_; }

 private:
  int hidden_ = 0;
  int pitch_bins_ = 0;
  Embedding token_emb_;
  Embedding pitch_emb_;  // pitch_bins + 1 entries; entry 0 is unvoiced
  VariancePredictor dur_;
  VariancePredictor pitch_;
};

// MSE between predicted log-durations (T x 1) and the log of ground-truth
// frame counts (all >= 1); accumulates into dpred.
double duration_log_mse(const Mat& pred_log, const std::vector<int>& target_frames,
                        Mat* dpred);

// Weighted pitch loss for a raw F x 2 head output: Hz MSE over voiced target
// frames plus voicing BCE over all frames. Unweighted components are
// reported through the out parameters; dpred accumulates the weighted
// gradient.
double pitch_target_loss(const Mat& pred, const PitchContour& target, double pitch_weight,
                         double voice_weight, Mat* dpred, double* pitch_mse,
                         double* voice_bce);

}  // namespace dsr

#endif  // DSR_VARIANCE_ADAPTOR_H_

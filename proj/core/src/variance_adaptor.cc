// dsr/variance_adaptor.cc

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

#include "dsr/variance_adaptor.h"

#include <algorithm>
#include <cmath>

namespace dsr {

namespace {
constexpr double kPitchLoHz = 50.0;
constexpr double kPitchHiHz = 500.0;
}  // namespace

Mat length_regulate(const Mat& hidden, const std::vector<int>& durations) {
  DSR_REQUIRE(hidden.rows == static_cast<int>(durations.size()),
              "length_regulate: " << hidden.rows << " tokens vs " << durations.size()
                                  << " durations");
  long long total = 0;
  for (int d : durations) {
    DSR_REQUIRE(d >= 0, "length_regulate: negative duration " << d);
    total += d;
  }
  Mat out(static_cast<int>(total), hidden.cols);
  int f = 0;
  for (int i = 0; i < hidden.rows; ++i)
    for (int r = 0; r < durations[i]; ++r, ++f)
      std::copy(hidden.row(i), hidden.row(i) + hidden.cols, out.row(f));
  return out;
}

void length_regulate_backward(const Mat& dframes, const std::vector<int>& durations,
                              Mat* dhidden) {
  DSR_REQUIRE(dhidden->rows == static_cast<int>(durations.size()),
              "length_regulate_backward: token count mismatch");
  int f = 0;
  for (int i = 0; i < dhidden->rows; ++i)
    for (int r = 0; r < durations[i]; ++r, ++f)
      for (int j = 0; j < dframes.cols; ++j) dhidden->at(i, j) += dframes.at(f, j);
  DSR_REQUIRE(f == dframes.rows, "length_regulate_backward: frame count mismatch");
}

// ---------------------------------------------------------------------------
// VariancePredictor

VariancePredictor::VariancePredictor(ParamStore* store, const std::string& prefix, int hidden,
                                     int prompt_dim, int kernel, int heads, int out_dim,
                                     Rng* rng)
    : hidden_(hidden),
      out_dim_(out_dim),
      conv1_(store, prefix + ".conv1", hidden, hidden, kernel, 1, rng),
      conv2_(store, prefix + ".conv2", hidden, hidden, kernel, 1, rng),
      ln1_(store, prefix + ".ln1", hidden),
      ln2_(store, prefix + ".ln2", hidden),
      attn_(store, prefix + ".attn", hidden, prompt_dim, hidden, heads, rng),
      head_(store, prefix + ".head", hidden, out_dim, rng, /*zero_init=*/true) {}

Mat VariancePredictor::forward(const Mat& x, const Mat& prompt) const {
  Cache cache;
  return forward(x, prompt, &cache);
}

Mat VariancePredictor::forward(const Mat& x, const Mat& prompt, Cache* c) const {
  DSR_REQUIRE(x.cols == hidden_, "variance predictor: input has " << x.cols
                                                                  << " dims, expected "
                                                                  << hidden_);
  c->conv1_out = conv1_.forward(x, &c->c1);
  Mat n1 = ln1_.forward(relu(c->conv1_out), &c->ln1c);
  c->conv2_out = conv2_.forward(n1, &c->c2);
  Mat n2 = ln2_.forward(relu(c->conv2_out), &c->ln2c);
  Mat att = attn_.forward(n2, prompt, &c->attnc);
  for (size_t i = 0; i < n2.data.size(); ++i) n2.data[i] += att.data[i];
  return head_.forward(n2, &c->headc);
}

void VariancePredictor::backward(const Cache& c, const Mat& dy, Mat* dx,
                                 Mat* dprompt) const {
  Mat da(c.headc.x.rows, c.headc.x.cols);
  head_.backward(c.headc, dy, &da);
  Mat dn2(da.rows, da.cols);
  attn_.backward(c.attnc, da, &dn2, dprompt);
  for (size_t i = 0; i < dn2.data.size(); ++i) dn2.data[i] += da.data[i];  // residual
  Mat dr2(dn2.rows, dn2.cols);
  ln2_.backward(c.ln2c, dn2, &dr2);
  Mat da2(c.conv2_out.rows, c.conv2_out.cols);
  relu_backward(c.conv2_out, dr2, &da2);
  Mat dn1(da2.rows, da2.cols);
  conv2_.backward(c.c2, da2, &dn1);
  Mat dr1(dn1.rows, dn1.cols);
  ln1_.backward(c.ln1c, dn1, &dr1);
  Mat da1(c.conv1_out.rows, c.conv1_out.cols);
  relu_backward(c.conv1_out, dr1, &da1);
  conv1_.backward(c.c1, da1, dx);
}

// ---------------------------------------------------------------------------
// VarianceAdaptor

VarianceAdaptor::VarianceAdaptor(ParamStore* store, const std::string& prefix, int vocab,
                                 int hidden, int prompt_dim, const Config& config, Rng* rng)
    : hidden_(hidden),
      pitch_bins_(config.get_int("variance.pitch_bins")),
      token_emb_(store, prefix + ".tok", vocab, hidden, rng),
      pitch_emb_(store, prefix + ".pitch_emb", config.get_int("variance.pitch_bins") + 1,
                 hidden, rng),
      dur_(store, prefix + ".dur", hidden, prompt_dim, config.get_int("variance.kernel"),
           config.get_int("variance.heads"), 1, rng),
      pitch_(store, prefix + ".pitch", hidden, prompt_dim, config.get_int("variance.kernel"),
             config.get_int("variance.heads"), 2, rng) {
  DSR_REQUIRE(pitch_bins_ >= 2, "VarianceAdaptor: need at least 2 pitch bins");
}

Mat VarianceAdaptor::embed_tokens(const std::vector<int>& tokens) const {
  DSR_REQUIRE(!tokens.empty(), "embed_tokens: empty token sequence");
  return token_emb_.forward(tokens);
}

DurationSeq VarianceAdaptor::predict_duration(const Mat& token_hidden,
                                              const Mat& prompt) const {
  Mat y = dur_.forward(token_hidden, prompt);
  DurationSeq d;
  d.log_frames.resize(y.rows);
  d.frames.resize(y.rows);
  for (int i = 0; i < y.rows; ++i) {
    d.log_frames[i] = y.at(i, 0);
    const long long rounded = round_half_up(std::exp(y.at(i, 0)));
    d.frames[i] = static_cast<int>(std::max(1LL, rounded));
  }
  return d;
}

PitchContour VarianceAdaptor::predict_pitch(const Mat& expanded, const Mat& prompt) const {
  Mat y = pitch_.forward(expanded, prompt);
  PitchContour p;
  p.hz.resize(y.rows);
  p.voiced.resize(y.rows);
  for (int i = 0; i < y.rows; ++i) {
    const bool voiced = y.at(i, 1) > 0.0;
    p.voiced[i] = voiced ? 1 : 0;
    p.hz[i] = voiced ? std::max(0.0, y.at(i, 0)) : 0.0;
  }
  return p;
}

int VarianceAdaptor::pitch_bin_index(double hz, bool voiced, int bins) {
  if (!voiced || hz <= 0.0) return 0;
  const double rel = std::log(hz / kPitchLoHz) / std::log(kPitchHiHz / kPitchLoHz);
  const int raw = static_cast<int>(std::floor(rel * bins));
  return 1 + std::clamp(raw, 0, bins - 1);
}

Mat VarianceAdaptor::build_condition_train(const Mat& expanded, const PitchContour& pitch,
                                           ConditionCache* cache) const {
  DSR_REQUIRE(expanded.rows == static_cast<int>(pitch.hz.size()) &&
                  pitch.hz.size() == pitch.voiced.size(),
              "build_condition: " << expanded.rows << " frames vs pitch track of "
                                  << pitch.hz.size());
  DSR_REQUIRE(expanded.cols == hidden_, "build_condition: hidden dim mismatch");
  cache->bins.resize(pitch.hz.size());
  for (size_t f = 0; f < pitch.hz.size(); ++f)
    cache->bins[f] = pitch_bin_index(pitch.hz[f], pitch.voiced[f] != 0, pitch_bins_);
  Mat emb = pitch_emb_.forward(cache->bins);
  Mat out = expanded;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += emb.data[i];
  return out;
}

FrameCondition VarianceAdaptor::build_condition(const Mat& expanded,
                                                const PitchContour& pitch) const {
  ConditionCache cache;
  FrameCondition c;
  c.frames = build_condition_train(expanded, pitch, &cache);
  return c;
}

void VarianceAdaptor::build_condition_backward(const ConditionCache& cache, const Mat& dy,
                                               Mat* dexpanded) const {
  pitch_emb_.backward(cache.bins, dy);
  for (size_t i = 0; i < dy.data.size(); ++i) dexpanded->data[i] += dy.data[i];
}

// ---------------------------------------------------------------------------
// Training losses

double duration_log_mse(const Mat& pred_log, const std::vector<int>& target_frames,
                        Mat* dpred) {
  DSR_REQUIRE(pred_log.cols == 1 &&
                  pred_log.rows == static_cast<int>(target_frames.size()),
              "duration_log_mse: shape mismatch");
  Mat target(pred_log.rows, 1);
  for (int i = 0; i < target.rows; ++i) {
    DSR_REQUIRE(target_frames[i] >= 1, "duration_log_mse: target < 1 frame");
    target.at(i, 0) = std::log(static_cast<double>(target_frames[i]));
  }
  return mse_loss(pred_log, target, dpred);
}

double pitch_target_loss(const Mat& pred, const PitchContour& target, double pitch_weight,
                         double voice_weight, Mat* dpred, double* pitch_mse,
                         double* voice_bce) {
  const int F = pred.rows;
  DSR_REQUIRE(pred.cols == 2 && F == static_cast<int>(target.hz.size()) &&
                  target.hz.size() == target.voiced.size(),
              "pitch_target_loss: shape mismatch");

  int voiced_count = 0;
  double mse = 0.0;
  for (int f = 0; f < F; ++f)
    if (target.voiced[f]) ++voiced_count;
  if (voiced_count > 0) {
    for (int f = 0; f < F; ++f) {
      if (!target.voiced[f]) continue;
      const double diff = pred.at(f, 0) - target.hz[f];
      mse += diff * diff / voiced_count;
      dpred->at(f, 0) += pitch_weight * 2.0 * diff / voiced_count;
    }
  }

  double bce = 0.0;
  for (int f = 0; f < F; ++f) {
    const double z = pred.at(f, 1);
    const double y = target.voiced[f] ? 1.0 : 0.0;
    // Stable log(1 + e^{-|z|}) form.
    bce += (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)))) / F;
    const double p = 1.0 / (1.0 + std::exp(-z));
    dpred->at(f, 1) += voice_weight * (p - y) / F;
  }

  if (pitch_mse != nullptr) *pitch_mse = mse;
  if (voice_bce != nullptr) *voice_bce = bce;
  return pitch_weight * mse + voice_weight * bce;
}

}  // namespace dsr

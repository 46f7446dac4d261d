// dsr/diffusion.cc

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

#include "dsr/diffusion.h"

#include <cmath>

namespace dsr {

double VpSchedule::alpha(double t) const { return std::exp(-0.5 * B(t)); }

double VpSchedule::sigma2(double t) const { return -std::expm1(-B(t)); }

Mat time_embedding(double t, int dim) {
  DSR_REQUIRE(dim >= 2 && dim % 2 == 0, "time_embedding: dim must be even and >= 2");
  // t lives in [0,1]; stretch to [0,1000] so the geometric frequency ladder
  // resolves it the way positional encodings resolve integer positions.
  const double pos = 1000.0 * t;
  const int half = dim / 2;
  Mat e(1, dim);
  for (int k = 0; k < half; ++k) {
    const double w = std::pow(10000.0, -static_cast<double>(k) / half);
    e.at(0, 2 * k) = std::sin(pos * w);
    e.at(0, 2 * k + 1) = std::cos(pos * w);
  }
  return e;
}

LatentSequence forward_marginal(const LatentSequence& z0, double t, const Mat& noise,
                                const VpSchedule& sched) {
  DSR_REQUIRE(t >= 0.0 && t <= 1.0, "forward_marginal: t = " << t << " outside [0,1]");
  DSR_REQUIRE(noise.rows == z0.frames.rows && noise.cols == z0.frames.cols,
              "forward_marginal: noise shape mismatch");
  const double a = sched.alpha(t);
  const double s = std::sqrt(sched.sigma2(t));
  LatentSequence out;
  out.time = t;
  out.frames = Mat(z0.frames.rows, z0.frames.cols);
  for (size_t i = 0; i < out.frames.data.size(); ++i)
    out.frames.data[i] = a * z0.frames.data[i] + s * noise.data[i];
  return out;
}

Mat score_from_z0(const Mat& z0_hat, const Mat& z_t, double t, const VpSchedule& sched) {
  DSR_REQUIRE(t > 0.0, "score_from_z0: t must be positive (marginal variance is 0 at t=0)");
  DSR_REQUIRE(t <= 1.0, "score_from_z0: t = " << t << " outside (0,1]");
  DSR_REQUIRE(z0_hat.rows == z_t.rows && z0_hat.cols == z_t.cols,
              "score_from_z0: shape mismatch");
  const double a = sched.alpha(t);
  const double s2 = sched.sigma2(t);
  Mat score(z_t.rows, z_t.cols);
  for (size_t i = 0; i < score.data.size(); ++i)
    score.data[i] = -(z_t.data[i] - a * z0_hat.data[i]) / s2;
  return score;
}

// ---------------------------------------------------------------------------
// Backbone

struct DiffusionBackbone::Block {
  Conv1d conv;  // hidden -> 2*hidden, gated
  MultiHeadAttention attn;
  Film film;
  Linear res, skip;

  Block(ParamStore* store, const std::string& prefix, int hidden, int prompt_dim,
        int dilation, int heads, Rng* rng)
      : conv(store, prefix + ".conv", hidden, 2 * hidden, 3, dilation, rng),
        attn(store, prefix + ".attn", hidden, prompt_dim, hidden, heads, rng),
        film(store, prefix + ".film", hidden, hidden),
        res(store, prefix + ".res", hidden, hidden, rng),
        skip(store, prefix + ".skip", hidden, hidden, rng) {}
};

DiffusionBackbone::DiffusionBackbone(ParamStore* store, const std::string& prefix,
                                     int latent_dim, int hidden, int prompt_dim, int blocks,
                                     int dilation_cycle, int heads, Rng* rng)
    : latent_dim_(latent_dim),
      hidden_(hidden),
      num_blocks_(blocks),
      in_proj_(store, prefix + ".in", latent_dim, hidden, rng),
      out1_(store, prefix + ".out1", hidden, hidden, rng),
      out2_(store, prefix + ".out2", hidden, latent_dim, rng, /*zero_init=*/true) {
  DSR_REQUIRE(blocks >= 1 && dilation_cycle >= 1, "backbone: bad block count/cycle");
  blocks_.reserve(blocks);
  for (int i = 0; i < blocks; ++i) {
    const int dilation = 1 << (i % dilation_cycle);
    blocks_.emplace_back(store, prefix + ".block" + std::to_string(i), hidden, prompt_dim,
                         dilation, heads, rng);
  }
}

DiffusionBackbone::~DiffusionBackbone() = default;

namespace {

// Gated activation tanh(a) * sigmoid(b) over the two column halves of c.
Mat gated(const Mat& c) {
  const int h = c.cols / 2;
  Mat g(c.rows, h);
  for (int i = 0; i < c.rows; ++i)
    for (int j = 0; j < h; ++j)
      g.at(i, j) = std::tanh(c.at(i, j)) / (1.0 + std::exp(-c.at(i, j + h)));
  return g;
}

void gated_backward(const Mat& c, const Mat& dg, Mat* dc) {
  const int h = c.cols / 2;
  for (int i = 0; i < c.rows; ++i)
    for (int j = 0; j < h; ++j) {
      const double th = std::tanh(c.at(i, j));
      const double sg = 1.0 / (1.0 + std::exp(-c.at(i, j + h)));
      dc->at(i, j) += dg.at(i, j) * sg * (1.0 - th * th);
      dc->at(i, j + h) += dg.at(i, j) * th * sg * (1.0 - sg);
    }
}

}  // namespace

Mat DiffusionBackbone::forward(const Mat& z_t, double t, const Mat& cond,
                               const Mat& prompt) const {
  Cache cache;
  return forward(z_t, t, cond, prompt, &cache);
}

Mat DiffusionBackbone::forward(const Mat& z_t, double t, const Mat& cond, const Mat& prompt,
                               Cache* c) const {
  DSR_REQUIRE(z_t.cols == latent_dim_, "backbone: latent dim " << z_t.cols << ", expected "
                                                               << latent_dim_);
  DSR_REQUIRE(cond.rows == z_t.rows, "backbone: " << z_t.rows << " latent frames vs "
                                                  << cond.rows << " condition frames");
  DSR_REQUIRE(cond.cols == hidden_, "backbone: condition dim mismatch");
  DSR_REQUIRE(t >= 0.0 && t <= 1.0, "backbone: t outside [0,1]");

  const Mat temb = time_embedding(t, hidden_);
  c->m = cond;
  for (int i = 0; i < c->m.rows; ++i)
    for (int j = 0; j < hidden_; ++j) c->m.at(i, j) += temb.at(0, j);

  Mat u = in_proj_.forward(z_t, &c->inc);
  c->blocks.resize(blocks_.size());
  c->skip_sum = Mat(z_t.rows, hidden_);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const Block& blk = blocks_[b];
    BlockCache& bc = c->blocks[b];
    bc.conv_out = blk.conv.forward(u, &bc.convc);
    Mat g = gated(bc.conv_out);
    Mat att = blk.attn.forward(g, prompt, &bc.attnc);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += att.data[i];
    Mat f = blk.film.forward(g, c->m, &bc.filmc);
    Mat r = blk.res.forward(f, &bc.resc);
    for (size_t i = 0; i < u.data.size(); ++i) u.data[i] += r.data[i];
    Mat s = blk.skip.forward(f, &bc.skipc);
    for (size_t i = 0; i < s.data.size(); ++i) c->skip_sum.data[i] += s.data[i];
  }
  c->out1_out = out1_.forward(relu(c->skip_sum), &c->out1c);
  return out2_.forward(relu(c->out1_out), &c->out2c);
}

void DiffusionBackbone::backward(const Cache& c, const Mat& dy, Mat* dz, Mat* dcond,
                                 Mat* dprompt) const {
  const int F = c.skip_sum.rows;
  Mat dro1(F, hidden_);
  out2_.backward(c.out2c, dy, &dro1);
  Mat do1(F, hidden_);
  relu_backward(c.out1_out, dro1, &do1);
  Mat drs(F, hidden_);
  out1_.backward(c.out1c, do1, &drs);
  Mat dS(F, hidden_);
  relu_backward(c.skip_sum, drs, &dS);

  Mat du(F, hidden_);  // gradient with respect to the running residual stream
  Mat dm(F, hidden_);
  for (size_t b = blocks_.size(); b-- > 0;) {
    const Block& blk = blocks_[b];
    const BlockCache& bc = c.blocks[b];
    Mat df(F, hidden_);
    blk.skip.backward(bc.skipc, dS, &df);
    blk.res.backward(bc.resc, du, &df);
    Mat dh(F, hidden_);
    blk.film.backward(bc.filmc, df, &dh, &dm);
    Mat dg(F, hidden_);
    blk.attn.backward(bc.attnc, dh, &dg, dprompt);
    for (size_t i = 0; i < dg.data.size(); ++i) dg.data[i] += dh.data[i];  // residual
    Mat dc(F, 2 * hidden_);
    gated_backward(bc.conv_out, dg, &dc);
    blk.conv.backward(bc.convc, dc, &du);
  }
  in_proj_.backward(c.inc, du, dz);
  if (dcond != nullptr)
    for (size_t i = 0; i < dm.data.size(); ++i) dcond->data[i] += dm.data[i];
}

LatentSequence predict_z0(const DiffusionBackbone& backbone, const LatentSequence& z_t,
                          const Mat& cond, const Mat& prompt) {
  LatentSequence out;
  out.time = 0.0;
  out.frames = backbone.forward(z_t.frames, z_t.time, cond, prompt);
  return out;
}

// ---------------------------------------------------------------------------
// Sampler

Mat reverse_sample(const Denoiser& denoiser, int frames, int dim, const VpSchedule& sched,
                   int steps, Rng* rng, double temperature, double t_min) {
  DSR_REQUIRE(steps >= 1, "reverse_sample: steps must be >= 1");
  DSR_REQUIRE(t_min > 0.0 && t_min < 1.0, "reverse_sample: t_min outside (0,1)");
  DSR_REQUIRE(temperature >= 0.0, "reverse_sample: negative temperature");

  Mat z(frames, dim);
  for (auto& v : z.data) v = temperature * rng->normal();

  const double dt = (1.0 - t_min) / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = 1.0 - k * dt;
    Mat z0_hat = denoiser(z, t);
    Mat score = score_from_z0(z0_hat, z, t, sched);
    const double half_beta_dt = 0.5 * sched.beta(t) * dt;
    for (size_t i = 0; i < z.data.size(); ++i)
      z.data[i] += half_beta_dt * (z.data[i] + score.data[i]);
    DSR_REQUIRE(z.all_finite(),
                "reverse_sample: non-finite state at step " << k << " (t = " << t << ")");
  }
  Mat out = denoiser(z, t_min);
  DSR_REQUIRE(out.all_finite(), "reverse_sample: non-finite final prediction");
  return out;
}

Mat reverse_sample(const DiffusionBackbone& backbone, const Mat& cond, const Mat& prompt,
                   const VpSchedule& sched, int steps, Rng* rng, double temperature,
                   double t_min) {
  return reverse_sample(
      [&](const Mat& z_t, double t) { return backbone.forward(z_t, t, cond, prompt); },
      cond.rows, backbone.latent_dim(), sched, steps, rng, temperature, t_min);
}

// ---------------------------------------------------------------------------
// Training loss

double diffusion_loss(const DiffusionBackbone& backbone, const VpSchedule& sched,
                      const std::vector<DiffusionTrainItem>& batch, Rng* rng,
                      double t_min) {
  DSR_REQUIRE(!batch.empty(), "diffusion_loss: empty batch");
  double total = 0.0;
  for (const auto& item : batch) {
    DSR_REQUIRE(item.z0 != nullptr && item.cond != nullptr && item.prompt != nullptr,
                "diffusion_loss: null batch item");
    const double t = t_min + (1.0 - t_min) * rng->uniform();
    Mat noise(item.z0->rows, item.z0->cols);
    for (auto& v : noise.data) v = rng->normal();

    LatentSequence z0{*item.z0, 0.0};
    LatentSequence z_t = forward_marginal(z0, t, noise, sched);

    DiffusionBackbone::Cache cache;
    Mat pred = backbone.forward(z_t.frames, t, *item.cond, *item.prompt, &cache);
    Mat dpred(pred.rows, pred.cols);
    const double item_loss = mse_loss(pred, *item.z0, &dpred);
    const double scale = 1.0 / batch.size();
    for (auto& v : dpred.data) v *= scale;
    total += item_loss * scale;

    Mat dz(pred.rows, backbone.latent_dim());
    backbone.backward(cache, dpred, &dz, item.dcond, item.dprompt);
  }
  return total;
}

}  // namespace dsr

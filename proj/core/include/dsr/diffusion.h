// dsr/diffusion.h

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

#ifndef DSR_DIFFUSION_H_
#define DSR_DIFFUSION_H_

#include <functional>
#include <string>
#include <vector>

#include "dsr/nn.h"

namespace dsr {

// Continuous variance-preserving SDE schedule with linear beta(t). With the
// defaults, B(1) = 10.05, so z_1 is statistically indistinguishable from
// N(0, I).
struct VpSchedule {
  double beta_min = 0.1;
  double beta_max = 20.0;

  double beta(double t) const { return beta_min + t * (beta_max - beta_min); }
  double B(double t) const { return beta_min * t + 0.5 * (beta_max - beta_min) * t * t; }
  double alpha(double t) const;   // exp(-B(t)/2), the marginal mean coefficient
  double sigma2(double t) const;  // 1 - exp(-B(t)), the marginal variance
};

// Latent codec frames tagged with their diffusion time.
struct LatentSequence {
  Mat frames;  // F x C
  double time = 0.0;
};

// Sinusoidal embedding of the diffusion time (parameter-free).
Mat time_embedding(double t, int dim);  // 1 x dim

// Closed-form VP marginal z_t = z0*alpha(t) + noise*sqrt(sigma2(t)). The
// standard-normal draw is supplied by the caller.
LatentSequence forward_marginal(const LatentSequence& z0, double t, const Mat& noise,
                                const VpSchedule& sched);

// Score estimate from a z0 prediction:
//   grad log p_t(z_t) ~= -(z_t - z0_hat*alpha(t)) / sigma2(t).
// Rejects t = 0 where the marginal variance vanishes.
Mat score_from_z0(const Mat& z0_hat, const Mat& z_t, double t, const VpSchedule& sched);

// WaveNet-style z0 predictor. Input projection to the hidden width, then M
// blocks of [gated dilated convolution -> residual Q-K-V cross-attention
// over the prompt -> FiLM from (condition + time embedding)] feeding
// residual and skip 1x1 projections, and a two-layer output head over the
// skip sum. FiLM starts at the identity and the final output layer at zero,
// so a fresh backbone predicts z0 = 0 regardless of the conditioning.
class DiffusionBackbone {
 public:
  struct BlockCache {
    Conv1d::Cache convc;
    Mat conv_out;  // F x 2H pre-activation
    MultiHeadAttention::Cache attnc;
    Film::Cache filmc;
    Linear::Cache resc, skipc;
  };
  struct Cache {
    Linear::Cache inc;
    Mat m;  // condition + broadcast time embedding
    std::vector<BlockCache> blocks;
    Mat skip_sum;  // pre-activation
    Linear::Cache out1c, out2c;
    Mat out1_out;  // pre-activation
  };

  DiffusionBackbone(ParamStore* store, const std::string& prefix, int latent_dim, int hidden,
                    int prompt_dim, int blocks, int dilation_cycle, int heads, Rng* rng);
  ~DiffusionBackbone();

  Mat forward(const Mat& z_t, double t, const Mat& cond, const Mat& prompt) const;
  Mat forward(const Mat& z_t, double t, const Mat& cond, const Mat& prompt,
              Cache* cache) const;
  // dcond and dprompt may be null when those gradients are not needed.
  void backward(const Cache& cache, const Mat& dy, Mat* dz, Mat* dcond,
                Mat* dprompt) const;

  int latent_dim() const { return latent_dim_; }
  int hidden() const { return hidden_; }
  int blocks() const { return num_blocks_; }

 private:
  struct Block;
  int latent_dim_ = 0, hidden_ = 0, num_blocks_ = 0;
  Linear in_proj_;
  std::vector<Block> blocks_;
  Linear out1_, out2_;
};

// z0 prediction with shape/frame-count validation (condition frames must
// match z_t frames).
LatentSequence predict_z0(const DiffusionBackbone& backbone, const LatentSequence& z_t,
                          const Mat& cond, const Mat& prompt);

// Denoiser abstraction for the sampler: maps (z_t, t) to a z0 estimate.
// Production wraps the backbone; tests inject analytic oracles.
using Denoiser = std::function<Mat(const Mat& z_t, double t)>;

// Probability-flow reverse sampler: z_1 ~ N(0, temperature^2 I), Euler steps
// z_{t-dt} = z_t + (z_t + score)*beta(t)*dt/2 on a uniform grid from 1 down
// to t_min, then a final z0 prediction at t_min. Throws (naming the step)
// if an intermediate goes non-finite.
Mat reverse_sample(const Denoiser& denoiser, int frames, int dim, const VpSchedule& sched,
                   int steps, Rng* rng, double temperature, double t_min = 1e-3);

Mat reverse_sample(const DiffusionBackbone& backbone, const Mat& cond, const Mat& prompt,
                   const VpSchedule& sched, int steps, Rng* rng, double temperature,
                   double t_min = 1e-3);

// One training item: clean latents plus conditioning, with optional
// gradient accumulators for joint training of the conditioning stack.
struct DiffusionTrainItem {
  const Mat* z0 = nullptr;
  const Mat* cond = nullptr;
  const Mat* prompt = nullptr;
  Mat* dcond = nullptr;
  Mat* dprompt = nullptr;
};

// Denoising objective: per item draw t ~ U(t_min, 1) and a fresh noise
// matrix, form z_t, and take the MSE between the backbone's z0 prediction
// and z0. Returns the batch-mean loss and accumulates all gradients.
double diffusion_loss(const DiffusionBackbone& backbone, const VpSchedule& sched,
                      const std::vector<DiffusionTrainItem>& batch, Rng* rng,
                      double t_min = 1e-3);

}  // namespace dsr

#endif  // DSR_DIFFUSION_H_

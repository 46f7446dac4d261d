// dsr/nn.h

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

#ifndef DSR_NN_H_
#define DSR_NN_H_

#include <memory>
#include <string>
#include <vector>

#include "dsr/mat.h"
#include "dsr/serialize.h"

namespace dsr {

// Named parameter with its gradient accumulator. Layers hold pointers into a
// ParamStore; the store owns storage and drives the optimizer and
// serialization. Backward passes accumulate into grad (training is
// single-writer); forward passes never mutate parameters, so inference on a
// loaded model is thread-safe.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
};

class ParamStore {
 public:
  Param* create(const std::string& name, int rows, int cols);
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
  void zero_grads();
  size_t num_scalars() const;
  double grad_norm() const;
  void clip_grad_norm(double max_norm);

  void save(BinaryWriter* w) const;
  // Matches by name and shape; throws on any mismatch or missing entry.
  void load(BinaryReader* r);

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

// Weight init: N(0, 1/sqrt(fan_in)) unless zero-initialized.
void init_normal(Param* p, int fan_in, Rng* rng);

class Adam {
 public:
  Adam(ParamStore* store, double lr);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step();

 private:
  ParamStore* store_;
  double lr_;
  int t_ = 0;
  std::vector<Mat> m_, v_;
};

// Cosine decay from lr0 to 0.01*lr0 over total steps.
double cosine_lr(double lr0, int step, int total_steps);

// ---------------------------------------------------------------------------
// Layers. forward(x) is pure; forward(x, cache) additionally records what
// backward needs. backward accumulates parameter gradients and (optionally)
// the input gradient.

class Linear {
 public:
  struct Cache {
    Mat x;
  };
  Linear() = default;
  Linear(ParamStore* store, const std::string& prefix, int in_dim, int out_dim, Rng* rng,
         bool zero_init = false);

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, Cache* cache) const;
  void backward(const Cache& cache, const Mat& dy, Mat* dx) const;

  int in_dim() const { return w_->value.rows; }
  int out_dim() const { return w_->value.cols; }

 private:
  Param* w_ = nullptr;  // in x out
  Param* b_ = nullptr;  // 1 x out
};

// Length-preserving 1-D convolution over T x C sequences with zero padding
// and optional dilation; taps are applied as shifted matrix products.
class Conv1d {
 public:
  struct Cache {
    Mat x;
  };
  Conv1d() = default;
  Conv1d(ParamStore* store, const std::string& prefix, int in_ch, int out_ch, int kernel,
         int dilation, Rng* rng);

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, Cache* cache) const;
  void backward(const Cache& cache, const Mat& dy, Mat* dx) const;

  int in_ch() const { return in_ch_; }
  int out_ch() const { return out_ch_; }

 private:
  int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, dilation_ = 0;
  Param* w_ = nullptr;  // (kernel*in) x out, tap-major
  Param* b_ = nullptr;  // 1 x out
};

class LayerNorm {
 public:
  struct Cache {
    Mat xhat;
    std::vector<double> rstd;
  };
  LayerNorm() = default;
  LayerNorm(ParamStore* store, const std::string& prefix, int dim);

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, Cache* cache) const;
  void backward(const Cache& cache, const Mat& dy, Mat* dx) const;

 private:
  Param* gamma_ = nullptr;
  Param* beta_ = nullptr;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParamStore* store, const std::string& prefix, int vocab, int dim, Rng* rng);

  Mat forward(const std::vector<int>& ids) const;
  void backward(const std::vector<int>& ids, const Mat& dy) const;
  int vocab() const { return table_->value.rows; }
  int dim() const { return table_->value.cols; }

 private:
  Param* table_ = nullptr;
};

// Q-K-V multi-head attention; cross-attention when kv differs from q.
// Heads are column blocks addressed in place via leading strides.
class MultiHeadAttention {
 public:
  struct Cache {
    Mat q_in, kv_in;
    Mat Q, K, V;              // Tq x H, Tk x H
    std::vector<Mat> attn;    // per head: Tq x Tk row-softmax
    Mat ctx;                  // Tq x H
  };
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore* store, const std::string& prefix, int q_dim, int kv_dim,
                     int hidden, int heads, Rng* rng);

  Mat forward(const Mat& q_in, const Mat& kv_in) const;
  Mat forward(const Mat& q_in, const Mat& kv_in, Cache* cache) const;
  void backward(const Cache& cache, const Mat& dy, Mat* dq_in, Mat* dkv_in) const;

  int hidden() const { return hidden_; }

 private:
  int heads_ = 0, hidden_ = 0;
  Param* wq_ = nullptr;
  Param* wk_ = nullptr;
  Param* wv_ = nullptr;
  Param* wo_ = nullptr;
};

// Feature-wise linear modulation: y = (1 + m W_g) * h + m W_b, with W_g and
// W_b zero-initialized so modulation starts as the identity.
class Film {
 public:
  struct Cache {
    Mat h, m, gamma;
  };
  Film() = default;
  Film(ParamStore* store, const std::string& prefix, int mod_dim, int dim);

  Mat forward(const Mat& h, const Mat& m) const;
  Mat forward(const Mat& h, const Mat& m, Cache* cache) const;
  void backward(const Cache& cache, const Mat& dy, Mat* dh, Mat* dm) const;

 private:
  Param* wg_ = nullptr;
  Param* wb_ = nullptr;
};

// Elementwise activations (y and dx share x's shape).
Mat relu(const Mat& x);
void relu_backward(const Mat& x, const Mat& dy, Mat* dx);
Mat tanh_mat(const Mat& x);
Mat sigmoid_mat(const Mat& x);

// Mean-squared-error over all elements; accumulates d(loss)/d(pred).
double mse_loss(const Mat& pred, const Mat& target, Mat* dpred);
// Per-element binary cross-entropy with logits against {0,1} targets.
double bce_with_logits(const Mat& logits, const Mat& targets, Mat* dlogits);

}  // namespace dsr

#endif  // DSR_NN_H_

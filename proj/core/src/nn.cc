// dsr/nn.cc

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

#include "dsr/nn.h"

#include <cmath>
#include <map>

namespace dsr {

Param* ParamStore::create(const std::string& name, int rows, int cols) {
  for (const auto& p : params_)
    DSR_REQUIRE(p->name != name, "duplicate parameter name '" << name << "'");
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Mat(rows, cols);
  p->grad = Mat(rows, cols);
  params_.push_back(std::move(p));
  return params_.back().get();
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p->grad.set_zero();
}

size_t ParamStore::num_scalars() const {
  size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    for (double g : p->grad.data) s += g * g;
  return std::sqrt(s);
}

void ParamStore::clip_grad_norm(double max_norm) {
  double n = grad_norm();
  if (n > max_norm && n > 0.0) {
    double scale = max_norm / n;
    for (auto& p : params_)
      for (double& g : p->grad.data) g *= scale;
  }
}

void ParamStore::save(BinaryWriter* w) const {
  w->put_u64(params_.size());
  for (const auto& p : params_) {
    w->put_string(p->name);
    w->put_mat(p->value);
  }
}

void ParamStore::load(BinaryReader* r) {
  uint64_t n = r->get_u64();
  DSR_REQUIRE(n == params_.size(),
              "checkpoint has " << n << " parameters, model expects " << params_.size());
  std::map<std::string, Mat> loaded;
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = r->get_string();
    loaded[name] = r->get_mat();
  }
  for (auto& p : params_) {
    auto it = loaded.find(p->name);
    DSR_REQUIRE(it != loaded.end(), "checkpoint missing parameter '" << p->name << "'");
    DSR_REQUIRE(it->second.rows == p->value.rows && it->second.cols == p->value.cols,
                "parameter '" << p->name << "' shape mismatch: checkpoint "
                              << it->second.rows << "x" << it->second.cols << ", model "
                              << p->value.rows << "x" << p->value.cols);
    p->value = std::move(it->second);
  }
}

void init_normal(Param* p, int fan_in, Rng* rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (auto& v : p->value.data) v = scale * rng->normal();
}

Adam::Adam(ParamStore* store, double lr) : store_(store), lr_(lr) {
  for (const auto& p : store_->all()) {
    m_.emplace_back(p->value.rows, p->value.cols);
    v_.emplace_back(p->value.rows, p->value.cols);
  }
}

void Adam::step() {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, t_);
  const double c2 = 1.0 - std::pow(b2, t_);
  const auto& params = store_->all();
  for (size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    double* m = m_[i].data.data();
    double* v = v_[i].data.data();
    double* w = p.value.data.data();
    const double* g = p.grad.data.data();
    const size_t n = p.value.size();
    for (size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
    }
  }
}

double cosine_lr(double lr0, int step, int total_steps) {
  if (total_steps <= 1) return lr0;
  double pos = std::min(1.0, static_cast<double>(step) / (total_steps - 1));
  double lo = 0.01 * lr0;
  return lo + 0.5 * (lr0 - lo) * (1.0 + std::cos(3.14159265358979323846 * pos));
}

// ---------------------------------------------------------------------------

Linear::Linear(ParamStore* store, const std::string& prefix, int in_dim, int out_dim, Rng* rng,
               bool zero_init) {
  w_ = store->create(prefix + ".w", in_dim, out_dim);
  b_ = store->create(prefix + ".b", 1, out_dim);
  if (!zero_init) init_normal(w_, in_dim, rng);
}

Mat Linear::forward(const Mat& x) const {
  DSR_REQUIRE(x.cols == w_->value.rows,
              "linear: input dim " << x.cols << ", expected " << w_->value.rows);
  Mat y(x.rows, w_->value.cols);
  for (int t = 0; t < y.rows; ++t)
    for (int j = 0; j < y.cols; ++j) y.at(t, j) = b_->value.at(0, j);
  gemm_nn_acc(x.rows, x.cols, y.cols, x.data.data(), x.cols, w_->value.data.data(), y.cols,
              y.data.data(), y.cols);
  return y;
}

Mat Linear::forward(const Mat& x, Cache* cache) const {
  cache->x = x;
  return forward(x);
}

void Linear::backward(const Cache& cache, const Mat& dy, Mat* dx) const {
  const Mat& x = cache.x;
  gemm_tn_acc(x.rows, x.cols, dy.cols, x.data.data(), x.cols, dy.data.data(), dy.cols,
              w_->grad.data.data(), dy.cols);
  for (int t = 0; t < dy.rows; ++t)
    for (int j = 0; j < dy.cols; ++j) b_->grad.at(0, j) += dy.at(t, j);
  if (dx != nullptr)
    gemm_nt_acc(dy.rows, dy.cols, x.cols, dy.data.data(), dy.cols, w_->value.data.data(), dy.cols,
                dx->data.data(), dx->cols);
}

Conv1d::Conv1d(ParamStore* store, const std::string& prefix, int in_ch, int out_ch, int kernel,
               int dilation, Rng* rng)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), dilation_(dilation) {
  DSR_REQUIRE(kernel >= 1 && kernel % 2 == 1, "conv kernel must be odd, got " << kernel);
  DSR_REQUIRE(dilation >= 1, "conv dilation must be >= 1");
  w_ = store->create(prefix + ".w", kernel * in_ch, out_ch);
  b_ = store->create(prefix + ".b", 1, out_ch);
  init_normal(w_, kernel * in_ch, rng);
}

Mat Conv1d::forward(const Mat& x) const {
  DSR_REQUIRE(x.cols == in_ch_, "conv: input channels " << x.cols << ", expected " << in_ch_);
  const int T = x.rows;
  Mat y(T, out_ch_);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < out_ch_; ++j) y.at(t, j) = b_->value.at(0, j);
  const int c = kernel_ / 2;
  for (int tap = 0; tap < kernel_; ++tap) {
    const int shift = (tap - c) * dilation_;
    const int lo = std::max(0, -shift);
    const int hi = std::min(T, T - shift);
    if (hi <= lo) continue;
    gemm_nn_acc(hi - lo, in_ch_, out_ch_, x.row(lo + shift), in_ch_,
                w_->value.row(tap * in_ch_), out_ch_, y.row(lo), out_ch_);
  }
  return y;
}

Mat Conv1d::forward(const Mat& x, Cache* cache) const {
  cache->x = x;
  return forward(x);
}

void Conv1d::backward(const Cache& cache, const Mat& dy, Mat* dx) const {
  const Mat& x = cache.x;
  const int T = x.rows;
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < out_ch_; ++j) b_->grad.at(0, j) += dy.at(t, j);
  const int c = kernel_ / 2;
  for (int tap = 0; tap < kernel_; ++tap) {
    const int shift = (tap - c) * dilation_;
    const int lo = std::max(0, -shift);
    const int hi = std::min(T, T - shift);
    if (hi <= lo) continue;
    gemm_tn_acc(hi - lo, in_ch_, out_ch_, x.row(lo + shift), in_ch_, dy.row(lo), out_ch_,
                w_->grad.row(tap * in_ch_), out_ch_);
    if (dx != nullptr)
      gemm_nt_acc(hi - lo, out_ch_, in_ch_, dy.row(lo), out_ch_, w_->value.row(tap * in_ch_),
                  out_ch_, dx->row(lo + shift), in_ch_);
  }
}

LayerNorm::LayerNorm(ParamStore* store, const std::string& prefix, int dim) {
  gamma_ = store->create(prefix + ".gamma", 1, dim);
  beta_ = store->create(prefix + ".beta", 1, dim);
  for (auto& v : gamma_->value.data) v = 1.0;
}

Mat LayerNorm::forward(const Mat& x) const {
  Cache scratch;
  return forward(x, &scratch);
}

Mat LayerNorm::forward(const Mat& x, Cache* cache) const {
  const int D = x.cols;
  DSR_REQUIRE(D == gamma_->value.cols, "layernorm dim mismatch");
  constexpr double eps = 1e-6;
  Mat y(x.rows, D);
  cache->xhat = Mat(x.rows, D);
  cache->rstd.assign(x.rows, 0.0);
  for (int t = 0; t < x.rows; ++t) {
    const double* xr = x.row(t);
    double mean = 0.0;
    for (int j = 0; j < D; ++j) mean += xr[j];
    mean /= D;
    double var = 0.0;
    for (int j = 0; j < D; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= D;
    const double rstd = 1.0 / std::sqrt(var + eps);
    cache->rstd[t] = rstd;
    for (int j = 0; j < D; ++j) {
      const double xhat = (xr[j] - mean) * rstd;
      cache->xhat.at(t, j) = xhat;
      y.at(t, j) = gamma_->value.at(0, j) * xhat + beta_->value.at(0, j);
    }
  }
  return y;
}

void LayerNorm::backward(const Cache& cache, const Mat& dy, Mat* dx) const {
  const int D = dy.cols;
  for (int t = 0; t < dy.rows; ++t) {
    const double* xh = cache.xhat.row(t);
    const double* dyr = dy.row(t);
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int j = 0; j < D; ++j) {
      const double dxhat = dyr[j] * gamma_->value.at(0, j);
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xh[j];
      gamma_->grad.at(0, j) += dyr[j] * xh[j];
      beta_->grad.at(0, j) += dyr[j];
    }
    if (dx != nullptr) {
      const double rstd = cache.rstd[t];
      for (int j = 0; j < D; ++j) {
        const double dxhat = dyr[j] * gamma_->value.at(0, j);
        dx->at(t, j) += rstd * (dxhat - sum_dxhat / D - xh[j] * sum_dxhat_xhat / D);
      }
    }
  }
}

Embedding::Embedding(ParamStore* store, const std::string& prefix, int vocab, int dim, Rng* rng) {
  table_ = store->create(prefix + ".table", vocab, dim);
  init_normal(table_, 1, rng);
}

Mat Embedding::forward(const std::vector<int>& ids) const {
  Mat y(static_cast<int>(ids.size()), dim());
  for (size_t t = 0; t < ids.size(); ++t) {
    DSR_REQUIRE(ids[t] >= 0 && ids[t] < vocab(), "embedding id " << ids[t] << " out of range");
    const double* row = table_->value.row(ids[t]);
    std::copy(row, row + dim(), y.row(static_cast<int>(t)));
  }
  return y;
}

void Embedding::backward(const std::vector<int>& ids, const Mat& dy) const {
  for (size_t t = 0; t < ids.size(); ++t) {
    double* g = table_->grad.row(ids[t]);
    const double* d = dy.row(static_cast<int>(t));
    for (int j = 0; j < dim(); ++j) g[j] += d[j];
  }
}

MultiHeadAttention::MultiHeadAttention(ParamStore* store, const std::string& prefix, int q_dim,
                                       int kv_dim, int hidden, int heads, Rng* rng)
    : heads_(heads), hidden_(hidden) {
  DSR_REQUIRE(hidden % heads == 0, "attention hidden " << hidden << " not divisible by "
                                                       << heads << " heads");
  wq_ = store->create(prefix + ".wq", q_dim, hidden);
  wk_ = store->create(prefix + ".wk", kv_dim, hidden);
  wv_ = store->create(prefix + ".wv", kv_dim, hidden);
  wo_ = store->create(prefix + ".wo", hidden, hidden);
  init_normal(wq_, q_dim, rng);
  init_normal(wk_, kv_dim, rng);
  init_normal(wv_, kv_dim, rng);
  init_normal(wo_, hidden, rng);
}

Mat MultiHeadAttention::forward(const Mat& q_in, const Mat& kv_in) const {
  Cache scratch;
  return forward(q_in, kv_in, &scratch);
}

Mat MultiHeadAttention::forward(const Mat& q_in, const Mat& kv_in, Cache* cache) const {
  DSR_REQUIRE(q_in.cols == wq_->value.rows && kv_in.cols == wk_->value.rows,
              "attention input dims (" << q_in.cols << ", " << kv_in.cols << ") do not match ("
                                       << wq_->value.rows << ", " << wk_->value.rows << ")");
  const int Tq = q_in.rows, Tk = kv_in.rows, H = hidden_, dh = H / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache->q_in = q_in;
  cache->kv_in = kv_in;
  cache->Q = Mat(Tq, H);
  cache->K = Mat(Tk, H);
  cache->V = Mat(Tk, H);
  gemm_nn_acc(Tq, q_in.cols, H, q_in.data.data(), q_in.cols, wq_->value.data.data(), H,
              cache->Q.data.data(), H);
  gemm_nn_acc(Tk, kv_in.cols, H, kv_in.data.data(), kv_in.cols, wk_->value.data.data(), H,
              cache->K.data.data(), H);
  gemm_nn_acc(Tk, kv_in.cols, H, kv_in.data.data(), kv_in.cols, wv_->value.data.data(), H,
              cache->V.data.data(), H);

  cache->attn.assign(heads_, Mat());
  cache->ctx = Mat(Tq, H);
  for (int h = 0; h < heads_; ++h) {
    Mat& A = cache->attn[h];
    A = Mat(Tq, Tk);
    gemm_nt_acc(Tq, dh, Tk, cache->Q.data.data() + h * dh, H, cache->K.data.data() + h * dh, H,
                A.data.data(), Tk);
    for (auto& v : A.data) v *= scale;
    softmax_rows(&A);
    gemm_nn_acc(Tq, Tk, dh, A.data.data(), Tk, cache->V.data.data() + h * dh, H,
                cache->ctx.data.data() + h * dh, H);
  }

  Mat out(Tq, H);
  gemm_nn_acc(Tq, H, H, cache->ctx.data.data(), H, wo_->value.data.data(), H, out.data.data(), H);
  return out;
}

void MultiHeadAttention::backward(const Cache& cache, const Mat& dy, Mat* dq_in,
                                  Mat* dkv_in) const {
  const int Tq = cache.Q.rows, Tk = cache.K.rows, H = hidden_, dh = H / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  gemm_tn_acc(Tq, H, H, cache.ctx.data.data(), H, dy.data.data(), H, wo_->grad.data.data(), H);
  Mat dctx(Tq, H);
  gemm_nt_acc(Tq, H, H, dy.data.data(), H, wo_->value.data.data(), H, dctx.data.data(), H);

  Mat dQ(Tq, H), dK(Tk, H), dV(Tk, H);
  Mat dA(Tq, Tk), dS(Tq, Tk);
  for (int h = 0; h < heads_; ++h) {
    const Mat& A = cache.attn[h];
    dA.set_zero();
    gemm_nt_acc(Tq, dh, Tk, dctx.data.data() + h * dh, H, cache.V.data.data() + h * dh, H,
                dA.data.data(), Tk);
    // Row-softmax backward: dS = A * (dA - rowsum(dA * A)), then the score
    // scale factor.
    for (int i = 0; i < Tq; ++i) {
      const double* a = A.row(i);
      const double* da = dA.row(i);
      double dot = 0.0;
      for (int j = 0; j < Tk; ++j) dot += a[j] * da[j];
      double* ds = dS.row(i);
      for (int j = 0; j < Tk; ++j) ds[j] = a[j] * (da[j] - dot) * scale;
    }
    gemm_nn_acc(Tq, Tk, dh, dS.data.data(), Tk, cache.K.data.data() + h * dh, H,
                dQ.data.data() + h * dh, H);
    gemm_tn_acc(Tq, Tk, dh, dS.data.data(), Tk, cache.Q.data.data() + h * dh, H,
                dK.data.data() + h * dh, H);
    gemm_tn_acc(Tq, Tk, dh, A.data.data(), Tk, dctx.data.data() + h * dh, H,
                dV.data.data() + h * dh, H);
  }

  gemm_tn_acc(Tq, cache.q_in.cols, H, cache.q_in.data.data(), cache.q_in.cols, dQ.data.data(), H,
              wq_->grad.data.data(), H);
  gemm_tn_acc(Tk, cache.kv_in.cols, H, cache.kv_in.data.data(), cache.kv_in.cols, dK.data.data(),
              H, wk_->grad.data.data(), H);
  gemm_tn_acc(Tk, cache.kv_in.cols, H, cache.kv_in.data.data(), cache.kv_in.cols, dV.data.data(),
              H, wv_->grad.data.data(), H);
  if (dq_in != nullptr)
    gemm_nt_acc(Tq, H, cache.q_in.cols, dQ.data.data(), H, wq_->value.data.data(), H,
                dq_in->data.data(), dq_in->cols);
  if (dkv_in != nullptr) {
    gemm_nt_acc(Tk, H, cache.kv_in.cols, dK.data.data(), H, wk_->value.data.data(), H,
                dkv_in->data.data(), dkv_in->cols);
    gemm_nt_acc(Tk, H, cache.kv_in.cols, dV.data.data(), H, wv_->value.data.data(), H,
                dkv_in->data.data(), dkv_in->cols);
  }
}

Film::Film(ParamStore* store, const std::string& prefix, int mod_dim, int dim) {
  wg_ = store->create(prefix + ".wg", mod_dim, dim);
  wb_ = store->create(prefix + ".wb", mod_dim, dim);
}

Mat Film::forward(const Mat& h, const Mat& m) const {
  Cache scratch;
  return forward(h, m, &scratch);
}

Mat Film::forward(const Mat& h, const Mat& m, Cache* cache) const {
  DSR_REQUIRE(h.rows == m.rows, "film: " << h.rows << " frames vs " << m.rows << " modulation rows");
  const int T = h.rows, D = h.cols;
  cache->h = h;
  cache->m = m;
  cache->gamma = Mat(T, D);
  Mat beta(T, D);
  gemm_nn_acc(T, m.cols, D, m.data.data(), m.cols, wg_->value.data.data(), D,
              cache->gamma.data.data(), D);
  gemm_nn_acc(T, m.cols, D, m.data.data(), m.cols, wb_->value.data.data(), D, beta.data.data(),
              D);
  Mat y(T, D);
  for (size_t i = 0; i < y.data.size(); ++i)
    y.data[i] = (1.0 + cache->gamma.data[i]) * h.data[i] + beta.data[i];
  return y;
}

void Film::backward(const Cache& cache, const Mat& dy, Mat* dh, Mat* dm) const {
  const int T = dy.rows, D = dy.cols;
  Mat dgamma(T, D), dbeta_rows(T, D);
  for (size_t i = 0; i < dy.data.size(); ++i) {
    dgamma.data[i] = dy.data[i] * cache.h.data[i];
    dbeta_rows.data[i] = dy.data[i];
    if (dh != nullptr) dh->data[i] += dy.data[i] * (1.0 + cache.gamma.data[i]);
  }
  gemm_tn_acc(T, cache.m.cols, D, cache.m.data.data(), cache.m.cols, dgamma.data.data(), D,
              wg_->grad.data.data(), D);
  gemm_tn_acc(T, cache.m.cols, D, cache.m.data.data(), cache.m.cols, dbeta_rows.data.data(), D,
              wb_->grad.data.data(), D);
  if (dm != nullptr) {
    gemm_nt_acc(T, D, cache.m.cols, dgamma.data.data(), D, wg_->value.data.data(), D,
                dm->data.data(), dm->cols);
    gemm_nt_acc(T, D, cache.m.cols, dbeta_rows.data.data(), D, wb_->value.data.data(), D,
                dm->data.data(), dm->cols);
  }
}

Mat relu(const Mat& x) {
  Mat y = x;
  for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

void relu_backward(const Mat& x, const Mat& dy, Mat* dx) {
  for (size_t i = 0; i < x.data.size(); ++i)
    if (x.data[i] > 0.0) dx->data[i] += dy.data[i];
}

Mat tanh_mat(const Mat& x) {
  Mat y = x;
  for (auto& v : y.data) v = std::tanh(v);
  return y;
}

Mat sigmoid_mat(const Mat& x) {
  Mat y = x;
  for (auto& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
  return y;
}

double mse_loss(const Mat& pred, const Mat& target, Mat* dpred) {
  DSR_REQUIRE(pred.rows == target.rows && pred.cols == target.cols, "mse shape mismatch");
  const double n = static_cast<double>(pred.size());
  double loss = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    loss += d * d;
    if (dpred != nullptr) dpred->data[i] += 2.0 * d / n;
  }
  return loss / n;
}

double bce_with_logits(const Mat& logits, const Mat& targets, Mat* dlogits) {
  DSR_REQUIRE(logits.rows == targets.rows && logits.cols == targets.cols, "bce shape mismatch");
  const double n = static_cast<double>(logits.size());
  double loss = 0.0;
  for (size_t i = 0; i < logits.data.size(); ++i) {
    const double z = logits.data[i], y = targets.data[i];
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    if (dlogits != nullptr) dlogits->data[i] += (1.0 / (1.0 + std::exp(-z)) - y) / n;
  }
  return loss / n;
}

}  // namespace dsr

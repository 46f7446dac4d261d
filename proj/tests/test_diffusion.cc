// dsr/test_diffusion.cc

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

#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "dsr/diffusion.h"
#include "grad_check.h"

using namespace dsr;
using dsr::testing::check_grads;
using dsr::testing::randn;
using dsr::testing::weighted_sum;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments sample_moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= xs.size();
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= (xs.size() - 1);
  return m;
}

// Posterior-mean denoiser for scalar data z0 ~ N(mu, s0^2) under the VP
// marginal: E[z0 | z_t] = mu + alpha*s0^2/(alpha^2 s0^2 + sigma2) * (z_t - alpha*mu).
Denoiser gaussian_oracle(double mu, double s0, const VpSchedule& sched) {
  return [mu, s0, sched](const Mat& z_t, double t) {
    const double a = sched.alpha(t);
    const double s2 = sched.sigma2(t);
    const double gain = a * s0 * s0 / (a * a * s0 * s0 + s2);
    Mat out(z_t.rows, z_t.cols);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = mu + gain * (z_t.data[i] - a * mu);
    return out;
  };
}

bool same_mat(const Mat& a, const Mat& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// schedule and marginal

TEST_CASE("linear VP schedule has the expected closed-form integrals") {
  VpSchedule s;
  CHECK(s.B(0.0) == 0.0);
  CHECK(s.B(1.0) == doctest::Approx(10.05).epsilon(1e-12));
  CHECK(s.alpha(0.0) == 1.0);
  CHECK(s.sigma2(0.0) == 0.0);
  double prev = -1.0;
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    CHECK(s.beta(t) > 0.0);
    CHECK(s.B(t) > prev);
    prev = s.B(t);
  }
  // Midpoint sanity: B(0.5) = 0.1*0.5 + 0.5*19.9*0.25.
  CHECK(s.B(0.5) == doctest::Approx(0.05 + 19.9 * 0.125).epsilon(1e-12));
}

TEST_CASE("forward_marginal is the identity at t=0 and rejects bad t") {
  VpSchedule sched;
  Rng rng(1);
  LatentSequence z0;
  z0.frames = randn(7, 5, &rng);
  Mat noise = randn(7, 5, &rng);
  LatentSequence zt = forward_marginal(z0, 0.0, noise, sched);
  CHECK(same_mat(zt.frames, z0.frames));
  CHECK_THROWS_WITH_AS(forward_marginal(z0, -0.1, noise, sched),
                       doctest::Contains("outside"), Error);
  CHECK_THROWS_AS(forward_marginal(z0, 1.1, noise, sched), Error);
  Mat bad = randn(7, 4, &rng);
  CHECK_THROWS_AS(forward_marginal(z0, 0.5, bad, sched), Error);
}

TEST_CASE("z1 is statistically standard normal for constant z0") {
  VpSchedule sched;
  Rng rng(2);
  const int n = 10000;
  LatentSequence z0;
  z0.frames = Mat(1, 1);
  z0.frames.at(0, 0) = 3.0;
  std::vector<double> xs(n);
  Mat noise(1, 1);
  for (int i = 0; i < n; ++i) {
    noise.at(0, 0) = rng.normal();
    xs[i] = forward_marginal(z0, 1.0, noise, sched).frames.at(0, 0);
  }
  Moments m = sample_moments(xs);
  const double expect_mean = 3.0 * sched.alpha(1.0);  // ~0.0198
  CHECK(std::abs(m.mean - expect_mean) < 3.0 / std::sqrt(n));
  CHECK(std::abs(m.var - sched.sigma2(1.0)) < 3.0 * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("marginal moments match an Euler–Maruyama simulation of the SDE") {
  VpSchedule sched;
  const int paths = 10000;
  const int em_steps = 1000;
  const double z0 = 1.7;

  for (double t_target : {0.1, 0.5, 0.9}) {
    Rng rng(300 + static_cast<int>(10 * t_target));
    std::vector<double> em(paths);
    const double dt = t_target / em_steps;
    for (int p = 0; p < paths; ++p) {
      double z = z0;
      for (int k = 0; k < em_steps; ++k) {
        const double t = k * dt;
        z += -0.5 * sched.beta(t) * z * dt +
             std::sqrt(sched.beta(t) * dt) * rng.normal();
      }
      em[p] = z;
    }
    Moments m = sample_moments(em);
    const double want_mean = z0 * sched.alpha(t_target);
    const double want_var = sched.sigma2(t_target);
    // 3 sigma of the estimators over `paths` samples.
    const double mean_tol = 3.0 * std::sqrt(want_var / paths);
    const double var_tol = 3.0 * want_var * std::sqrt(2.0 / (paths - 1));
    MESSAGE("t=" << t_target << " EM mean " << m.mean << " vs " << want_mean << ", var "
                 << m.var << " vs " << want_var);
    CHECK(std::abs(m.mean - want_mean) < mean_tol + 2.0 * dt);  // O(dt) EM bias headroom
    CHECK(std::abs(m.var - want_var) < var_tol + 2.0 * dt);
  }
}

TEST_CASE("the VP marginal preserves unit variance for standard-normal data") {
  VpSchedule sched;
  Rng rng(4);
  const int n = 10000;
  for (double t : {0.1, 0.5, 0.9}) {
    std::vector<double> xs(n);
    LatentSequence z0;
    z0.frames = Mat(1, 1);
    Mat noise(1, 1);
    for (int i = 0; i < n; ++i) {
      z0.frames.at(0, 0) = rng.normal();
      noise.at(0, 0) = rng.normal();
      xs[i] = forward_marginal(z0, t, noise, sched).frames.at(0, 0);
    }
    Moments m = sample_moments(xs);
    CHECK(std::abs(m.var - 1.0) < 3.0 * std::sqrt(2.0 / (n - 1)));
  }
}

// ---------------------------------------------------------------------------
// score

TEST_CASE("score identities hold algebraically") {
  VpSchedule sched;
  Rng rng(5);
  LatentSequence z0;
  z0.frames = randn(4, 3, &rng);
  Mat eps = randn(4, 3, &rng);

  for (double t : {0.05, 0.3, 0.7, 1.0}) {
    LatentSequence zt = forward_marginal(z0, t, eps, sched);
    Mat score = score_from_z0(z0.frames, zt.frames, t, sched);
    const double denom = std::sqrt(sched.sigma2(t));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(score.at(i, j) ==
              doctest::Approx(-eps.at(i, j) / denom).epsilon(1e-10));
  }

  // t -> 1: variance ~ 1 and alpha(1) ~ 6.6e-3, so score ~ -z_t up to an
  // O(alpha * |z0_hat|) residual.
  Mat z1 = randn(4, 3, &rng);
  Mat score1 = score_from_z0(z0.frames, z1, 1.0, sched);
  for (size_t i = 0; i < z1.data.size(); ++i)
    CHECK(std::abs(score1.data[i] + z1.data[i]) < 0.05);

  CHECK_THROWS_WITH_AS(score_from_z0(z0.frames, z1, 0.0, sched),
                       doctest::Contains("positive"), Error);
}

TEST_CASE("posterior-mean z0 estimate reproduces the analytic Gaussian score") {
  VpSchedule sched;
  const double mu = 0.6, s0 = 1.4;
  Denoiser oracle = gaussian_oracle(mu, s0, sched);
  for (double t : {0.1, 0.4, 0.8}) {
    const double a = sched.alpha(t);
    const double s2 = sched.sigma2(t);
    for (double z : {-2.0, -0.5, 0.0, 1.2, 3.0}) {
      Mat zt(1, 1);
      zt.at(0, 0) = z;
      Mat z0_hat = oracle(zt, t);
      Mat got = score_from_z0(z0_hat, zt, t, sched);
      // Marginal: z_t ~ N(alpha*mu, alpha^2 s0^2 + sigma2).
      const double want = -(z - a * mu) / (a * a * s0 * s0 + s2);
      CHECK(got.at(0, 0) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

// ---------------------------------------------------------------------------
// sampler

TEST_CASE("reverse sampler recovers Gaussian target moments with an oracle score") {
  VpSchedule sched;
  const double mu = 0.8, s0 = 1.3;
  Denoiser oracle = gaussian_oracle(mu, s0, sched);
  Rng rng(6);
  const int runs = 10000;
  std::vector<double> xs(runs);
  for (int r = 0; r < runs; ++r)
    xs[r] = reverse_sample(oracle, 1, 1, sched, 200, &rng, 1.0).at(0, 0);
  Moments m = sample_moments(xs);
  const double mean_tol = 3.0 * s0 / std::sqrt(static_cast<double>(runs));
  const double var_tol = 3.0 * s0 * s0 * std::sqrt(2.0 / (runs - 1));
  MESSAGE("sampler mean " << m.mean << " (want " << mu << " ± " << mean_tol << "), var "
                          << m.var << " (want " << s0 * s0 << " ± " << var_tol << ")");
  CHECK(std::abs(m.mean - mu) < mean_tol);
  CHECK(std::abs(m.var - s0 * s0) < var_tol);
}

TEST_CASE("reverse sampler edge behaviors") {
  VpSchedule sched;
  Denoiser oracle = gaussian_oracle(0.0, 1.0, sched);

  SUBCASE("steps=1 completes with finite output") {
    Rng rng(7);
    Mat out = reverse_sample(oracle, 3, 2, sched, 1, &rng, 1.0);
    CHECK(out.rows == 3);
    CHECK(out.cols == 2);
    CHECK(out.all_finite());
  }
  SUBCASE("fixed seed gives bit-identical output") {
    Rng a(8), b(8);
    Mat x = reverse_sample(oracle, 2, 3, sched, 50, &a, 1.0);
    Mat y = reverse_sample(oracle, 2, 3, sched, 50, &b, 1.0);
    CHECK(same_mat(x, y));
  }
  SUBCASE("temperature changes the draw") {
    Rng a(9), b(9);
    Mat x = reverse_sample(oracle, 2, 3, sched, 50, &a, 1.0);
    Mat y = reverse_sample(oracle, 2, 3, sched, 50, &b, 0.5);
    CHECK_FALSE(same_mat(x, y));
  }
  SUBCASE("a diverging denoiser aborts naming the step") {
    Denoiser bad = [](const Mat& z_t, double) {
      Mat out(z_t.rows, z_t.cols);
      for (auto& v : out.data) v = std::numeric_limits<double>::quiet_NaN();
      return out;
    };
    Rng rng(10);
    CHECK_THROWS_WITH_AS(reverse_sample(bad, 1, 1, sched, 5, &rng, 1.0),
                         doctest::Contains("step"), Error);
  }
  SUBCASE("invalid arguments are rejected") {
    Rng rng(11);
    CHECK_THROWS_AS(reverse_sample(oracle, 1, 1, sched, 0, &rng, 1.0), Error);
    CHECK_THROWS_AS(reverse_sample(oracle, 1, 1, sched, 10, &rng, -0.5), Error);
  }
}

// ---------------------------------------------------------------------------
// time embedding

TEST_CASE("time embedding is deterministic and resolves distinct times") {
  Mat a = time_embedding(0.37, 16);
  Mat b = time_embedding(0.37, 16);
  CHECK(same_mat(a, b));
  CHECK(a.cols == 16);
  for (double v : a.data) CHECK(std::abs(v) <= 1.0);
  Mat c = time_embedding(0.38, 16);
  double dist = 0.0;
  for (int j = 0; j < 16; ++j) dist += std::abs(a.at(0, j) - c.at(0, j));
  CHECK(dist > 1e-3);
  CHECK_THROWS_AS(time_embedding(0.5, 7), Error);
}

// ---------------------------------------------------------------------------
// backbone

TEST_CASE("backbone is length preserving with fresh output at zero") {
  Rng rng(12);
  ParamStore store;
  DiffusionBackbone bb(&store, "bb", 5, 8, 6, 3, 2, 2, &rng);
  for (int F : {1, 4, 9}) {
    Mat z = randn(F, 5, &rng);
    Mat cond = randn(F, 8, &rng);
    Mat prompt = randn(3, 6, &rng);
    Mat y = bb.forward(z, 0.5, cond, prompt);
    REQUIRE(y.rows == F);
    REQUIRE(y.cols == 5);
    // Zero-initialized output head: fresh backbone predicts z0 = 0.
    for (double v : y.data) CHECK(v == 0.0);
  }
  Mat z = randn(4, 5, &rng);
  Mat cond_bad = randn(3, 8, &rng);
  Mat prompt = randn(3, 6, &rng);
  CHECK_THROWS_WITH_AS(bb.forward(z, 0.5, cond_bad, prompt),
                       doctest::Contains("condition frames"), Error);
}

TEST_CASE("identity FiLM makes a fresh backbone condition-independent") {
  Rng rng(13);
  ParamStore store;
  DiffusionBackbone bb(&store, "bb", 4, 8, 6, 2, 3, 2, &rng);
  // Give the zero-initialized output head real weights, keep FiLM at its
  // identity initialization.
  for (const auto& p : store.all())
    if (p->name == "bb.out2.w")
      for (auto& v : p->value.data) v = 0.3 * rng.normal();

  Mat z = randn(6, 4, &rng);
  Mat prompt = randn(3, 6, &rng);
  Mat cond_a = randn(6, 8, &rng);
  Mat cond_b = randn(6, 8, &rng);
  Mat ya = bb.forward(z, 0.4, cond_a, prompt);
  Mat yb = bb.forward(z, 0.4, cond_b, prompt);
  CHECK(same_mat(ya, yb));  // condition only enters through FiLM

  // Perturb one FiLM gain weight: the condition becomes live.
  bool found = false;
  for (const auto& p : store.all())
    if (p->name == "bb.block0.film.wg") {
      for (auto& v : p->value.data) v = 0.1;
      found = true;
    }
  REQUIRE(found);
  Mat ya2 = bb.forward(z, 0.4, cond_a, prompt);
  Mat yb2 = bb.forward(z, 0.4, cond_b, prompt);
  CHECK_FALSE(same_mat(ya2, yb2));
}

TEST_CASE("backbone gradients match finite differences") {
  Rng rng(14);
  ParamStore store;
  DiffusionBackbone bb(&store, "bb", 3, 4, 4, 2, 2, 2, &rng);
  // Exercise every path: un-zero the output head.
  for (const auto& p : store.all())
    if (p->name == "bb.out2.w")
      for (auto& v : p->value.data) v = 0.2 * rng.normal();

  Mat z = randn(5, 3, &rng);
  Mat cond = randn(5, 4, &rng);
  Mat prompt = randn(3, 4, &rng);
  Mat R = randn(5, 3, &rng);
  const double t = 0.62;

  store.zero_grads();
  DiffusionBackbone::Cache cache;
  bb.forward(z, t, cond, prompt, &cache);
  Mat dz(5, 3), dcond(5, 4), dprompt(3, 4);
  bb.backward(cache, R, &dz, &dcond, &dprompt);
  check_grads(&store, [&] { return weighted_sum(bb.forward(z, t, cond, prompt), R); },
              {{&z, &dz}, {&cond, &dcond}, {&prompt, &dprompt}});
}

// ---------------------------------------------------------------------------
// loss

TEST_CASE("diffusion loss equals mean squared z0 for a zero backbone") {
  Rng rng(15);
  ParamStore store;
  DiffusionBackbone bb(&store, "bb", 4, 8, 6, 2, 2, 2, &rng);  // out head zero-init
  Mat z0 = randn(6, 4, &rng);
  Mat cond = randn(6, 8, &rng);
  Mat prompt = randn(2, 6, &rng);
  std::vector<DiffusionTrainItem> batch = {{&z0, &cond, &prompt, nullptr, nullptr}};
  Rng loss_rng(16);
  const double loss = diffusion_loss(bb, VpSchedule{}, batch, &loss_rng);
  double want = 0.0;
  for (double v : z0.data) want += v * v;
  want /= z0.data.size();
  CHECK(loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("a small backbone overfits a fixed batch (10x loss drop in 500 steps)") {
  Rng rng(17);
  ParamStore store;
  DiffusionBackbone bb(&store, "bb", 6, 16, 8, 2, 2, 2, &rng);

  const int items = 16;
  std::vector<Mat> z0s, conds, prompts;
  for (int i = 0; i < items; ++i) {
    z0s.push_back(randn(8, 6, &rng));
    conds.push_back(randn(8, 16, &rng));
    prompts.push_back(randn(4, 8, &rng));
  }
  std::vector<DiffusionTrainItem> batch(items);
  for (int i = 0; i < items; ++i)
    batch[i] = {&z0s[i], &conds[i], &prompts[i], nullptr, nullptr};

  Adam opt(&store, 2e-3);
  Rng loss_rng(18);
  double head = 0.0, tail = 0.0;
  const int steps = 500, probe = 10;
  for (int s = 0; s < steps; ++s) {
    store.zero_grads();
    const double loss = diffusion_loss(bb, VpSchedule{}, batch, &loss_rng);
    if (s < probe) head += loss / probe;
    if (s >= steps - probe) tail += loss / probe;
    opt.step();
  }
  MESSAGE("diffusion overfit loss " << head << " -> " << tail);
  CHECK(tail < 0.1 * head);
}

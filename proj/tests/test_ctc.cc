// dsr/test_ctc.cc

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

#include "ctc_oracle.h"
#include "doctest.h"
#include "dsr/ctc.h"

using namespace dsr;

namespace {

Mat random_log_probs(int T, int K, Rng* rng) {
  Mat m(T, K);
  for (auto& v : m.data) v = 2.0 * rng->normal();
  for (int t = 0; t < T; ++t) log_softmax_row(m.row(t), K);
  return m;
}

std::vector<int> random_target(int L, int labels, Rng* rng) {
  std::vector<int> y(L);
  for (auto& v : y) v = rng->uniform_int(0, labels - 1);
  return y;
}

// d(loss)/d(logits) where log_probs = log_softmax(logits): compose the
// occupancy gradient with the log-softmax Jacobian.
Mat ctc_logit_grad(const Mat& logits, const std::vector<int>& target, int blank) {
  Mat logp = logits;
  for (int t = 0; t < logp.rows; ++t) log_softmax_row(logp.row(t), logp.cols);
  Mat dlogp;
  ctc_loss(logp, target, blank, &dlogp);
  Mat dlogits(logits.rows, logits.cols);
  for (int t = 0; t < logits.rows; ++t) {
    double sum = 0.0;
    for (int k = 0; k < logits.cols; ++k) sum += dlogp.at(t, k);
    for (int k = 0; k < logits.cols; ++k)
      dlogits.at(t, k) = dlogp.at(t, k) - std::exp(logp.at(t, k)) * sum;
  }
  return dlogits;
}

double loss_of_logits(const Mat& logits, const std::vector<int>& target, int blank) {
  Mat logp = logits;
  for (int t = 0; t < logp.rows; ++t) log_softmax_row(logp.row(t), logp.cols);
  return ctc_loss(logp, target, blank);
}

}  // namespace

TEST_CASE("ctc single-frame and two-frame closed forms") {
  // One frame, P(label 0) = 0.6: only one alignment path.
  Mat p1(1, 3);
  p1.at(0, 0) = std::log(0.6);
  p1.at(0, 1) = std::log(0.3);
  p1.at(0, 2) = std::log(0.1);
  CHECK(ctc_loss(p1, {0}, 2) == doctest::Approx(-std::log(0.6)).epsilon(1e-12));
  CHECK(ctc_loss(p1, {0}, 2) == doctest::Approx(0.5108256237659907).epsilon(1e-12));

  // Two uniform frames over {a, b, blank}: paths aa, a-, -a give P = 3*(1/3)^2.
  Mat p2(2, 3);
  for (auto& v : p2.data) v = std::log(1.0 / 3.0);
  CHECK(ctc_loss(p2, {0}, 2) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("ctc matches brute-force path enumeration") {
  Rng rng(314159);
  int checked = 0;
  for (int iter = 0; iter < 120; ++iter) {
    const int labels = rng.uniform_int(1, 4);
    const int K = labels + 1;
    const int blank = labels;
    const int T = rng.uniform_int(1, 6);
    const int L = rng.uniform_int(0, 3);
    auto target = random_target(L, labels, &rng);
    if (!ctc_feasible(T, target)) {
      Mat logp = random_log_probs(T, K, &rng);
      CHECK_THROWS_AS(ctc_loss(logp, target, blank), Error);
      continue;
    }
    Mat logp = random_log_probs(T, K, &rng);
    const double fast = ctc_loss(logp, target, blank);
    const double slow = ctc_loss_bruteforce(logp, target, blank);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-9));
    CHECK(std::abs(fast - slow) < 1e-6);
    ++checked;
  }
  CHECK(checked >= 60);
}

TEST_CASE("ctc logit gradient matches central finite differences") {
  Rng rng(777);
  for (int iter = 0; iter < 5; ++iter) {
    const int labels = 3, K = 4, blank = 3, T = 5, L = 2;
    auto target = random_target(L, labels, &rng);
    if (!ctc_feasible(T, target)) continue;
    Mat logits(T, K);
    for (auto& v : logits.data) v = rng.normal();
    Mat grad = ctc_logit_grad(logits, target, blank);
    const double h = 1e-5;
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        Mat lp = logits, lm = logits;
        lp.at(t, k) += h;
        lm.at(t, k) -= h;
        const double fd =
            (loss_of_logits(lp, target, blank) - loss_of_logits(lm, target, blank)) / (2 * h);
        const double an = grad.at(t, k);
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        CHECK(rel < 1e-4);
      }
    }
  }
}

TEST_CASE("ctc feasibility counts repeats") {
  CHECK(ctc_feasible(2, {0, 1}));
  CHECK(!ctc_feasible(1, {0, 1}));
  CHECK(ctc_feasible(3, {0, 0}));   // needs a separating blank
  CHECK(!ctc_feasible(2, {0, 0}));
  CHECK(ctc_feasible(0, {}));
}

TEST_CASE("greedy decode collapse rules") {
  const int blank = 2;
  auto path_to_scores = [&](const std::vector<int>& path) {
    Mat m(static_cast<int>(path.size()), 3);
    for (auto& v : m.data) v = 0.1;
    for (size_t t = 0; t < path.size(); ++t) m.at(static_cast<int>(t), path[t]) = 0.8;
    return m;
  };
  CHECK(ctc_greedy_decode(path_to_scores({0, 0, 2, 1}), blank) == std::vector<int>{0, 1});
  CHECK(ctc_greedy_decode(path_to_scores({2, 2, 2}), blank).empty());
  CHECK(ctc_greedy_decode(path_to_scores({0, 2, 0}), blank) == std::vector<int>{0, 0});

  // Ties resolve to the lowest index.
  Mat tie(1, 3);
  tie.at(0, 0) = 0.4;
  tie.at(0, 1) = 0.4;
  tie.at(0, 2) = 0.2;
  CHECK(ctc_greedy_decode(tie, blank) == std::vector<int>{0});
}

TEST_CASE("decode is idempotent on blank-expanded one-hot re-encoding") {
  Rng rng(99);
  for (int iter = 0; iter < 50; ++iter) {
    const int K = 5, blank = 4;
    Mat scores(rng.uniform_int(3, 12), K);
    for (auto& v : scores.data) v = rng.uniform();
    auto decoded = ctc_greedy_decode(scores, blank);

    // Re-encode with a separating blank between adjacent repeats.
    std::vector<int> frames;
    for (size_t i = 0; i < decoded.size(); ++i) {
      if (i > 0 && decoded[i] == decoded[i - 1]) frames.push_back(blank);
      frames.push_back(decoded[i]);
    }
    if (frames.empty()) frames.push_back(blank);
    Mat onehot(static_cast<int>(frames.size()), K);
    for (size_t t = 0; t < frames.size(); ++t) onehot.at(static_cast<int>(t), frames[t]) = 1.0;
    CHECK(ctc_greedy_decode(onehot, blank) == decoded);
  }
}

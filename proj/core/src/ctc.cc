// dsr/ctc.cc

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

#include "dsr/ctc.h"

#include <cmath>

namespace dsr {

bool ctc_feasible(int T, const std::vector<int>& target) {
  int repeats = 0;
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++repeats;
  return T >= static_cast<int>(target.size()) + repeats;
}

double ctc_loss(const Mat& log_probs, const std::vector<int>& target, int blank,
                Mat* dlog_probs) {
  const int T = log_probs.rows;
  const int K = log_probs.cols;
  const int L = static_cast<int>(target.size());
  DSR_REQUIRE(T >= 1 && K >= 2, "ctc: bad posteriorgram shape " << T << "x" << K);
  DSR_REQUIRE(blank >= 0 && blank < K, "ctc: blank index " << blank << " out of range");
  for (int y : target)
    DSR_REQUIRE(y >= 0 && y < K && y != blank, "ctc: bad target label " << y);
  DSR_REQUIRE(ctc_feasible(T, target),
              "ctc: target of length " << L << " (with repeats) cannot align to " << T
                                       << " frames");

  // Expanded label sequence: blank, y1, blank, y2, ..., yL, blank.
  const int S = 2 * L + 1;
  auto label = [&](int s) { return (s % 2 == 0) ? blank : target[s / 2]; };
  // alpha(t,s) and beta(t,s) both include frame t's emission, so the
  // posterior through (t,s) is alpha + beta - logp(t, label(s)) - loglik.
  Mat alpha(T, S), beta(T, S);
  std::fill(alpha.data.begin(), alpha.data.end(), kLogZero);
  std::fill(beta.data.begin(), beta.data.end(), kLogZero);

  alpha.at(0, 0) = log_probs.at(0, blank);
  if (S > 1) alpha.at(0, 1) = log_probs.at(0, label(1));
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha.at(t - 1, s);
      if (s >= 1) a = log_add(a, alpha.at(t - 1, s - 1));
      if (s >= 2 && label(s) != blank && label(s) != label(s - 2))
        a = log_add(a, alpha.at(t - 1, s - 2));
      if (a != kLogZero) alpha.at(t, s) = a + log_probs.at(t, label(s));
    }
  }

  double loglik = alpha.at(T - 1, S - 1);
  if (S > 1) loglik = log_add(loglik, alpha.at(T - 1, S - 2));
  DSR_REQUIRE(std::isfinite(loglik), "ctc: zero-probability target");

  if (dlog_probs == nullptr) return -loglik;

  beta.at(T - 1, S - 1) = log_probs.at(T - 1, blank);
  if (S > 1) beta.at(T - 1, S - 2) = log_probs.at(T - 1, label(S - 2));
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double b = beta.at(t + 1, s);
      if (s + 1 < S) b = log_add(b, beta.at(t + 1, s + 1));
      if (s + 2 < S && label(s) != blank && label(s + 2) != label(s))
        b = log_add(b, beta.at(t + 1, s + 2));
      if (b != kLogZero) beta.at(t, s) = b + log_probs.at(t, label(s));
    }
  }

  *dlog_probs = Mat(T, K);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      const double a = alpha.at(t, s), b = beta.at(t, s);
      if (a == kLogZero || b == kLogZero) continue;
      const double occ = std::exp(a + b - log_probs.at(t, label(s)) - loglik);
      dlog_probs->at(t, label(s)) -= occ;
    }
  }
  return -loglik;
}

std::vector<int> ctc_greedy_decode(const Mat& scores, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < scores.rows; ++t) {
    const double* row = scores.row(t);
    int best = 0;
    for (int k = 1; k < scores.cols; ++k)
      if (row[k] > row[best]) best = k;
    if (best != prev && best != blank) out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace dsr

// dsr/ctc_oracle.h

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

#ifndef DSR_TESTS_CTC_ORACLE_H_
#define DSR_TESTS_CTC_ORACLE_H_

// Independent brute-force reference for the CTC loss: enumerate every K^T
// frame labeling, collapse repeats then drop blanks, and sum the
// probabilities of labelings that collapse to the target. Exponential on
// purpose — only usable for T <= ~7 — and deliberately shares no code with
// the production forward algorithm.

#include <vector>

#include "dsr/mat.h"

namespace dsr {

inline std::vector<int> collapse_path(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int v : path) {
    if (v != prev && v != blank) out.push_back(v);
    prev = v;
  }
  return out;
}

// Returns -log P(target); log_probs is T x K.
inline double ctc_loss_bruteforce(const Mat& log_probs, const std::vector<int>& target,
                                  int blank) {
  const int T = log_probs.rows, K = log_probs.cols;
  double total = kLogZero;
  std::vector<int> path(T, 0);
  while (true) {
    if (collapse_path(path, blank) == target) {
      double lp = 0.0;
      for (int t = 0; t < T; ++t) lp += log_probs.at(t, path[t]);
      total = log_add(total, lp);
    }
    int pos = T - 1;
    while (pos >= 0 && ++path[pos] == K) path[pos--] = 0;
    if (pos < 0) break;
  }
  return -total;
}

}  // namespace dsr

#endif  // DSR_TESTS_CTC_ORACLE_H_

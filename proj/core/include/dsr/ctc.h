// dsr/ctc.h

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

#ifndef DSR_CTC_H_
#define DSR_CTC_H_

#include <vector>

#include "dsr/mat.h"

namespace dsr {

// Alignment feasibility: T >= len(target) + number of adjacent repeats.
bool ctc_feasible(int T, const std::vector<int>& target);

// Negative log-likelihood of `target` under blank-augmented collapse-repeat
// alignment semantics, computed by the forward algorithm in log space.
// log_probs is T x K with K = labels + 1 and `blank` the blank column.
// If dlog_probs is non-null it is assigned (not accumulated) the gradient
// d(loss)/d(log_probs), i.e. minus the per-frame label occupancy; composing
// with log-softmax backward yields the logit gradient.
// Throws if the target is infeasible for T or contains invalid labels.
double ctc_loss(const Mat& log_probs, const std::vector<int>& target, int blank,
                Mat* dlog_probs = nullptr);

// Greedy best path: per-frame argmax (ties broken by lowest index), collapse
// adjacent repeats, then drop blanks. Accepts probabilities or log
// probabilities (argmax is invariant).
std::vector<int> ctc_greedy_decode(const Mat& scores, int blank);

}  // namespace dsr

#endif  // DSR_CTC_H_

// dsr/test_features.cc

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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "dsr/features.h"
#include "dsr/synthcorpus.h"

using namespace dsr;

TEST_CASE("triangular filterbank rows are normalized bumps") {
  Mat fb = triangular_filterbank(8, 100.0, 7000.0, 512);
  REQUIRE(fb.rows == 8);
  REQUIRE(fb.cols == 257);
  for (int b = 0; b < fb.rows; ++b) {
    double sum = 0.0, peak = 0.0;
    int support = 0;
    for (int k = 0; k < fb.cols; ++k) {
      CHECK(fb.at(b, k) >= 0.0);
      sum += fb.at(b, k);
      peak = std::max(peak, fb.at(b, k));
      support += fb.at(b, k) > 0.0 ? 1 : 0;
    }
    CHECK(sum > 0.0);
    CHECK(peak <= 1.0 + 1e-12);
    CHECK(support >= 1);
  }
  // Log spacing: upper bands cover wider bin ranges than lower ones.
  auto width = [&](int b) {
    int lo = fb.cols, hi = 0;
    for (int k = 0; k < fb.cols; ++k)
      if (fb.at(b, k) > 0.0) {
        lo = std::min(lo, k);
        hi = std::max(hi, k);
      }
    return hi - lo;
  };
  CHECK(width(7) > width(0));
}

TEST_CASE("filterbank energies localize a pure tone") {
  Mat fb = triangular_filterbank(16, 100.0, 7000.0, 512);
  Waveform x(kSampleRate / 2);  // 0.5 s
  const double f = 1000.0;
  for (size_t n = 0; n < x.size(); ++n)
    x[n] = 0.5 * std::sin(2.0 * M_PI * f * static_cast<double>(n) / kSampleRate);
  Mat e = filterbank_energies(x, fb, 400, 512);
  CHECK(e.rows == num_frames(static_cast<int>(x.size()), kHopSamples));
  CHECK(e.cols == 16);
  // The band whose center is nearest 1 kHz dominates in an interior frame.
  int t = e.rows / 2;
  int best = 0;
  for (int b = 1; b < e.cols; ++b)
    if (e.at(t, b) > e.at(t, best)) best = b;
  // Find the filter with the strongest response at the 1 kHz bin.
  int bin = static_cast<int>(std::lround(f / kSampleRate * 512));
  int expect = 0;
  for (int b = 1; b < fb.rows; ++b)
    if (fb.at(b, bin) > fb.at(expect, bin)) expect = b;
  CHECK(best == expect);
}

TEST_CASE("mockfbank backend is registered with the advertised contract") {
  auto ids = list_feature_backends();
  CHECK(std::find(ids.begin(), ids.end(), "mockfbank") != ids.end());
  const FeatureBackend& be = feature_backend("mockfbank");
  CHECK(be.id() == "mockfbank");
  CHECK(be.dim() == 64);
  CHECK_THROWS_WITH_AS(feature_backend("nosuch"), doctest::Contains("mockfbank"), Error);
}

TEST_CASE("mockfbank output is deterministic, finite, frame aligned") {
  auto spk = make_speakers(1);
  Utterance u = generate_utterance({"aa", "ss", "oo", "mm"}, spk[0], 17);
  const FeatureBackend& be = feature_backend("mockfbank");
  FeatureSequence f1 = be.extract(u.waveform);
  FeatureSequence f2 = be.extract(u.waveform);
  CHECK(f1.frames.data == f2.frames.data);
  CHECK(f1.backend_id == "mockfbank");
  CHECK(f1.frame_rate == doctest::Approx(100.0));
  CHECK(f1.frames.rows == u.total_frames());
  CHECK(f1.frames.cols == 64);
  for (double v : f1.frames.data) CHECK(std::isfinite(v));
}

TEST_CASE("mockfbank stays finite on silence and short input") {
  const FeatureBackend& be = feature_backend("mockfbank");
  Waveform silence(3200, 0.0);
  FeatureSequence f = be.extract(silence);
  CHECK(f.frames.rows == 20);
  for (double v : f.frames.data) CHECK(std::isfinite(v));
  Waveform tiny(10, 0.1);  // shorter than one hop still yields one frame
  FeatureSequence g = be.extract(tiny);
  CHECK(g.frames.rows == 1);
  for (double v : g.frames.data) CHECK(std::isfinite(v));
}

TEST_CASE("features separate different phonemes") {
  // Same speaker, two phonemes with far-apart band centers: mean feature
  // vectors should differ clearly, otherwise the CTC head has no signal.
  auto spk = make_speakers(1);
  Utterance a = generate_utterance({"aa", "aa", "aa"}, spk[0], 31);
  Utterance s = generate_utterance({"ss", "ss", "ss"}, spk[0], 31);
  const FeatureBackend& be = feature_backend("mockfbank");
  Mat fa = be.extract(a.waveform).frames;
  Mat fs = be.extract(s.waveform).frames;
  double dist = 0.0;
  for (int c = 0; c < fa.cols; ++c) {
    double ma = 0.0, ms = 0.0;
    for (int t = 0; t < fa.rows; ++t) ma += fa.at(t, c);
    for (int t = 0; t < fs.rows; ++t) ms += fs.at(t, c);
    ma /= fa.rows;
    ms /= fs.rows;
    dist += (ma - ms) * (ma - ms);
  }
  CHECK(std::sqrt(dist) > 1.0);
}

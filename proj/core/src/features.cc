// dsr/features.cc

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

#include "dsr/features.h"

#include <algorithm>
#include <cmath>
#include <map>

namespace dsr {

Mat triangular_filterbank(int num_bands, double fmin, double fmax, int nfft) {
  DSR_REQUIRE(num_bands >= 1 && fmin > 0.0 && fmax > fmin && fmax <= kSampleRate / 2.0,
              "bad filterbank spec");
  const int bins = nfft / 2 + 1;
  // Band centers log-spaced over [fmin, fmax], with edge points one step
  // beyond each end so every center gets a full triangle.
  std::vector<double> edges(num_bands + 2);
  const double step = std::log(fmax / fmin) / (num_bands + 1);
  for (int i = 0; i < num_bands + 2; ++i) edges[i] = fmin * std::exp(step * i);

  Mat fb(num_bands, bins);
  const double bin_hz = static_cast<double>(kSampleRate) / nfft;
  for (int b = 0; b < num_bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb.at(b, k) = w;
    }
  }
  return fb;
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

std::vector<double> mel_edges(int num_bands, double fmin, double fmax) {
  std::vector<double> edges(num_bands + 2);
  const double lo = hz_to_mel(fmin), hi = hz_to_mel(fmax);
  for (int i = 0; i < num_bands + 2; ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (num_bands + 1));
  return edges;
}

Mat triangles_from_edges(const std::vector<double>& edges, int num_bands, int nfft) {
  const int bins = nfft / 2 + 1;
  Mat fb(num_bands, bins);
  const double bin_hz = static_cast<double>(kSampleRate) / nfft;
  for (int b = 0; b < num_bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    double peak = 0.0;
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb.at(b, k) = w;
      peak = std::max(peak, w);
    }
    if (peak == 0.0) {  // sub-bin triangle: snap to the nearest bin
      int k = static_cast<int>(std::lround(mid / bin_hz));
      fb.at(b, std::clamp(k, 0, bins - 1)) = 1.0;
    }
  }
  return fb;
}

}  // namespace

std::vector<double> mel_center_frequencies(int num_bands, double fmin, double fmax) {
  auto edges = mel_edges(num_bands, fmin, fmax);
  return std::vector<double>(edges.begin() + 1, edges.end() - 1);
}

Mat mel_filterbank(int num_bands, double fmin, double fmax, int nfft) {
  DSR_REQUIRE(num_bands >= 1 && fmin > 0.0 && fmax > fmin && fmax <= kSampleRate / 2.0,
              "bad filterbank spec");
  return triangles_from_edges(mel_edges(num_bands, fmin, fmax), num_bands, nfft);
}

std::vector<double> linear_center_frequencies(int num_bands, double fmin, double fmax) {
  std::vector<double> centers(num_bands);
  const double step = (fmax - fmin) / (num_bands + 1);
  for (int i = 0; i < num_bands; ++i) centers[i] = fmin + step * (i + 1);
  return centers;
}

Mat linear_filterbank(int num_bands, double fmin, double fmax, int nfft) {
  DSR_REQUIRE(num_bands >= 1 && fmin >= 0.0 && fmax > fmin && fmax <= kSampleRate / 2.0,
              "bad filterbank spec");
  std::vector<double> edges(num_bands + 2);
  const double step = (fmax - fmin) / (num_bands + 1);
  for (int i = 0; i < num_bands + 2; ++i) edges[i] = fmin + step * i;
  return triangles_from_edges(edges, num_bands, nfft);
}

Mat filterbank_energies(const Waveform& x, const Mat& filterbank, int win, int nfft) {
  DSR_REQUIRE(!x.empty(), "filterbank_energies: empty waveform");
  const int T = num_frames(x.size(), kHopSamples);
  const int bins = nfft / 2 + 1;
  DSR_REQUIRE(filterbank.cols == bins, "filterbank bins mismatch: expected "
                                           << filterbank.cols << " got " << bins);
  const auto window = hann_window(win);
  Mat out(T, filterbank.rows);
  std::vector<double> frame(win);
  for (int t = 0; t < T; ++t) {
    extract_centered_frame(x, t, kHopSamples, win, frame.data());
    auto power = frame_power_spectrum(frame.data(), win, window, nfft);
    for (int b = 0; b < filterbank.rows; ++b) {
      double e = 0.0;
      const double* w = filterbank.row(b);
      for (int k = 0; k < bins; ++k) e += w[k] * power[k];
      out.at(t, b) = e;
    }
  }
  return out;
}

namespace {

constexpr int kMockBands = 64;
constexpr int kMockDim = 64;
constexpr int kMockWin = 400;
constexpr int kMockNfft = 512;

// Log-magnitude filterbank followed by a fixed random projection: a frozen,
// fully deterministic stand-in for a pre-trained speech encoder.
class MockFbankBackend : public FeatureBackend {
 public:
  MockFbankBackend()
      : fb_(triangular_filterbank(kMockBands, 50.0, 7800.0, kMockNfft)),
        proj_(kMockBands, kMockDim) {
    Rng rng(derive_seed(fnv1a64(std::string("mockfbank")), "projection"));
    for (auto& v : proj_.data) v = rng.normal() / std::sqrt(static_cast<double>(kMockBands));
  }

  std::string id() const override { return "mockfbank"; }
  int dim() const override { return kMockDim; }

  FeatureSequence extract(const Waveform& x) const override {
    Mat energies = filterbank_energies(x, fb_, kMockWin, kMockNfft);
    for (auto& v : energies.data) v = std::log(v + 1e-8);
    FeatureSequence out;
    out.backend_id = id();
    out.frames = Mat(energies.rows, kMockDim);
    matmul_nn(energies, proj_, &out.frames);
    DSR_REQUIRE(out.frames.all_finite(), "mockfbank produced non-finite features");
    return out;
  }

 private:
  Mat fb_;
  Mat proj_;
};

std::map<std::string, std::shared_ptr<FeatureBackend>>& registry() {
  static auto* reg = new std::map<std::string, std::shared_ptr<FeatureBackend>>{
      {"mockfbank", std::make_shared<MockFbankBackend>()}};
  return *reg;
}

}  // namespace

void register_feature_backend(std::shared_ptr<FeatureBackend> backend) {
  DSR_REQUIRE(backend != nullptr, "null feature backend");
  registry()[backend->id()] = std::move(backend);
}

const FeatureBackend& feature_backend(const std::string& id) {
  auto& reg = registry();
  auto it = reg.find(id);
  if (it == reg.end()) {
    std::vector<std::string> known;
    for (const auto& [k, _] : reg) known.push_back(k);
    throw Error("unknown feature backend '" + id + "'; registered: " + join_strings(known, ", "));
  }
  return *it->second;
}

std::vector<std::string> list_feature_backends() {
  std::vector<std::string> out;
  for (const auto& [k, _] : registry()) out.push_back(k);
  return out;
}

}  // namespace dsr

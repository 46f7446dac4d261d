// dsr/codec.cc

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

#include "dsr/codec.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dsr/features.h"
#include "dsr/serialize.h"
#include "dsr/wav.h"

namespace dsr {

namespace {

constexpr char kCodecMagic[4] = {'D', 'C', 'D', '0'};

Mat analysis_filterbank(const AnalysisSpec& spec) {
  return linear_filterbank(spec.bands, spec.fmin, spec.fmax, spec.nfft);
}

// Raw sinusoid-bank synthesis: one sinusoid per band at model.band_freq with
// phase tied to global sample time, amplitudes `amps` (T x bands) cross-faded
// by windowed overlap-add. The equalizer is applied by callers. The synthesis
// window is two hops — shorter than the analysis window — so amplitude
// transitions smear as little as possible into neighboring analysis frames.
Waveform synthesize_bank(const Mat& amps, const CodecModel& model) {
  const int T = amps.rows;
  const int bands = model.latent_dim();
  const int win = 2 * kHopSamples;
  const int hop = kHopSamples;
  const int len = T * hop;
  DSR_REQUIRE(static_cast<int>(model.band_freq.size()) == bands, "codec: band_freq size");

  const auto window = hann_window(win);
  Waveform acc(len, 0.0);
  Waveform wsum(len, 0.0);
  for (int t = 0; t < T; ++t) {
    const int start = t * hop + hop / 2 - win / 2;
    for (int i = 0; i < win; ++i) {
      const int n = start + i;
      if (n >= 0 && n < len) wsum[n] += window[i];
    }
  }
  for (int b = 0; b < bands; ++b) {
    const double omega = 2.0 * M_PI * model.band_freq[b] / kSampleRate;
    // Fixed per-band phase offset decorrelates onsets across bands.
    const double phi0 = 2.0 * M_PI * std::fmod(0.61803398874989479 * (b + 1), 1.0);
    const double rot_c = std::cos(omega);
    const double rot_s = std::sin(omega);
    for (int t = 0; t < T; ++t) {
      const double a = amps.at(t, b);
      if (a == 0.0) continue;
      const int start = t * hop + hop / 2 - win / 2;
      double c = std::cos(omega * start + phi0);
      double s = std::sin(omega * start + phi0);
      for (int i = 0; i < win; ++i) {
        const int n = start + i;
        if (n >= 0 && n < len) acc[n] += window[i] * a * s;
        const double nc = c * rot_c - s * rot_s;
        s = s * rot_c + c * rot_s;
        c = nc;
      }
    }
  }
  for (int n = 0; n < len; ++n) acc[n] = wsum[n] > 1e-8 ? acc[n] / wsum[n] : 0.0;
  return acc;
}

// Target sqrt-energies -> sinusoid amplitudes through the fitted equalizer:
// clamp, square into the energy domain, unmix analysis cross-talk, sqrt back.
Mat equalize(const Mat& z0, const CodecModel& model) {
  const int C = model.latent_dim();
  DSR_REQUIRE(z0.cols == C, "codec_decode: latent dim " << z0.cols << " != " << C);
  DSR_REQUIRE(model.energy_equalizer.rows == C && model.energy_equalizer.cols == C,
              "codec: equalizer not fitted");
  Mat energy(z0.rows, C);
  for (size_t i = 0; i < z0.data.size(); ++i) {
    const double a = std::max(0.0, z0.data[i]);
    energy.data[i] = a * a;
  }
  Mat mixed(z0.rows, C);
  gemm_nt_acc(z0.rows, C, C, energy.data.data(), C, model.energy_equalizer.data.data(), C,
              mixed.data.data(), C);
  for (auto& v : mixed.data) v = std::sqrt(std::max(0.0, v));
  return mixed;
}

// Measures the band-energy leakage of the synthesis+analysis loop: column b
// is the re-analyzed energy profile of a unit-amplitude tone in band b.
Mat probe_leakage(const CodecModel& model) {
  const int C = model.latent_dim();
  const int T = 12;
  Mat leak(C, C);
  for (int b = 0; b < C; ++b) {
    Mat amps(T, C);
    for (int t = 0; t < T; ++t) amps.at(t, b) = 1.0;
    Waveform w = synthesize_bank(amps, model);
    Mat re = codec_analysis_frames(w, model.analysis);
    for (int c = 0; c < C; ++c) {
      double e = 0.0;
      int cnt = 0;
      for (int t = 2; t < T - 2; ++t, ++cnt) e += re.at(t, c) * re.at(t, c);
      leak.at(c, b) = e / cnt;
    }
  }
  return leak;
}

Mat ridge_inverse(const Mat& a, double rel_ridge) {
  const int n = a.rows;
  double scale = 0.0;
  for (double v : a.data) scale = std::max(scale, std::abs(v));
  Mat reg = a;
  for (int i = 0; i < n; ++i) reg.at(i, i) += rel_ridge * scale;
  Mat eye(n, n);
  for (int i = 0; i < n; ++i) eye.at(i, i) = 1.0;
  return solve_linear(reg, eye);
}

// One k-means stage over `residual`, entry 0 pinned to zero. Returns the
// codebook and subtracts the chosen entries from `residual` in place.
Mat kmeans_stage(Mat* residual, int K, int iters, Rng* rng) {
  const int N = residual->rows;
  const int C = residual->cols;
  DSR_REQUIRE(N >= K, "codec_train: " << N << " frames < " << K << " codebook entries");

  Mat codebook(K, C);
  std::vector<int> perm(N);
  std::iota(perm.begin(), perm.end(), 0);
  rng->shuffle(&perm);
  for (int k = 1; k < K; ++k)
    for (int c = 0; c < C; ++c) codebook.at(k, c) = residual->at(perm[k - 1], c);

  std::vector<int> assign(N);
  std::vector<double> point_dist(N);
  Mat scores(N, K);
  auto assign_pass = [&]() {
    std::vector<double> cnorm(K);
    for (int k = 0; k < K; ++k) {
      double s = 0.0;
      for (int c = 0; c < C; ++c) s += codebook.at(k, c) * codebook.at(k, c);
      cnorm[k] = s;
    }
    scores.set_zero();
    gemm_nt_acc(N, C, K, residual->data.data(), C, codebook.data.data(), C,
                scores.data.data(), K);
    for (int i = 0; i < N; ++i) {
      double xnorm = 0.0;
      for (int c = 0; c < C; ++c) xnorm += residual->at(i, c) * residual->at(i, c);
      int best = 0;
      double bestd = xnorm + cnorm[0] - 2.0 * scores.at(i, 0);
      for (int k = 1; k < K; ++k) {
        const double d = xnorm + cnorm[k] - 2.0 * scores.at(i, k);
        if (d < bestd) {  // strict: ties keep the lowest index
          bestd = d;
          best = k;
        }
      }
      assign[i] = best;
      point_dist[i] = bestd;
    }
  };

  for (int it = 0; it < iters; ++it) {
    assign_pass();
    Mat sums(K, C);
    std::vector<int> counts(K, 0);
    for (int i = 0; i < N; ++i) {
      counts[assign[i]]++;
      for (int c = 0; c < C; ++c) sums.at(assign[i], c) += residual->at(i, c);
    }
    // Empty clusters grab the currently worst-represented points.
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return point_dist[a] > point_dist[b]; });
    size_t next_far = 0;
    for (int k = 1; k < K; ++k) {
      if (counts[k] > 0) {
        for (int c = 0; c < C; ++c) codebook.at(k, c) = sums.at(k, c) / counts[k];
      } else if (next_far < order.size()) {
        for (int c = 0; c < C; ++c) codebook.at(k, c) = residual->at(order[next_far], c);
        ++next_far;
      }
    }
  }

  // Degenerate entries (exact duplicates) are reseeded to far points so the
  // codebook stays non-degenerate.
  assign_pass();
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return point_dist[a] > point_dist[b]; });
  size_t next_far = 0;
  for (int k = 1; k < K; ++k)
    for (int j = 0; j < k; ++j) {
      bool same = true;
      for (int c = 0; c < C && same; ++c) same = codebook.at(k, c) == codebook.at(j, c);
      if (same && next_far < order.size()) {
        for (int c = 0; c < C; ++c) codebook.at(k, c) = residual->at(order[next_far], c);
        ++next_far;
        break;
      }
    }

  assign_pass();
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c) residual->at(i, c) -= codebook.at(assign[i], c);
  return codebook;
}

}  // namespace

Mat codec_analysis_frames(const Waveform& x, const AnalysisSpec& spec) {
  Mat energies = filterbank_energies(x, analysis_filterbank(spec), spec.win, spec.nfft);
  for (auto& v : energies.data) v = std::sqrt(std::max(0.0, v));
  return energies;
}

Mat codec_quantize(const Mat& frames, const CodecModel& model, std::vector<int>* tokens,
                   Mat* residual_norms) {
  const int C = model.latent_dim();
  DSR_REQUIRE(frames.cols == C, "codec_quantize: dim " << frames.cols << " != " << C);
  DSR_REQUIRE(static_cast<int>(model.codebooks.size()) == model.stages,
              "codec_quantize: model has no trained codebooks");
  const int T = frames.rows;
  if (tokens) tokens->assign(static_cast<size_t>(T) * model.stages, 0);
  if (residual_norms) *residual_norms = Mat(T, model.stages + 1);

  Mat quantized(T, C);
  std::vector<double> residual(C);
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < C; ++c) residual[c] = frames.at(t, c);
    auto norm = [&]() {
      double s = 0.0;
      for (int c = 0; c < C; ++c) s += residual[c] * residual[c];
      return std::sqrt(s);
    };
    if (residual_norms) residual_norms->at(t, 0) = norm();
    for (int r = 0; r < model.stages; ++r) {
      const Mat& cb = model.codebooks[r];
      int best = 0;
      double bestd = 0.0;
      for (int k = 0; k < cb.rows; ++k) {
        double d = 0.0;
        for (int c = 0; c < C; ++c) {
          const double diff = residual[c] - cb.at(k, c);
          d += diff * diff;
        }
        if (k == 0 || d < bestd) {
          bestd = d;
          best = k;
        }
      }
      for (int c = 0; c < C; ++c) {
        residual[c] -= cb.at(best, c);
        quantized.at(t, c) += cb.at(best, c);
      }
      if (tokens) (*tokens)[static_cast<size_t>(t) * model.stages + r] = best;
      if (residual_norms) residual_norms->at(t, r + 1) = norm();
    }
  }
  return quantized;
}

CodecEncoding codec_encode(const Waveform& x, const CodecModel& model) {
  CodecEncoding enc;
  enc.continuous = codec_analysis_frames(x, model.analysis);
  enc.quantized.frames = codec_quantize(enc.continuous, model, &enc.tokens, nullptr);
  enc.quantized.source_tag = "raw";
  return enc;
}

Waveform codec_decode(const Mat& z0, const CodecModel& model) {
  DSR_REQUIRE(z0.rows >= 1, "codec_decode: empty latent sequence");
  return synthesize_bank(equalize(z0, model), model);
}

CodecModel codec_train(const Manifest& manifest, const Config& config) {
  CodecModel model;
  model.analysis.bands = config.get_int("codec.bands");
  model.stages = config.get_int("codec.stages");
  model.codebook_size = config.get_int("codec.codebook");
  const int kmeans_iters = config.get_int("codec.kmeans_iters");
  const int max_frames = config.get_int("codec.max_frames");
  Rng rng(derive_seed(config.get_u64("seed"), "codec"));

  Manifest normal = manifest.filter_severity(0.0);
  DSR_REQUIRE(!normal.rows.empty(), "codec_train: no severity-0 rows in manifest");

  // Analysis frames of every normal utterance; whole utterances are kept
  // aside for the equalizer refit, which needs contiguous frames.
  std::vector<Mat> utt_frames;
  int total = 0;
  for (const auto& row : normal.rows) {
    int sr = 0;
    Waveform x = read_wav(normal.audio_file(row), &sr);
    DSR_REQUIRE(sr == kSampleRate, "codec_train: " << row.id << " sample rate " << sr);
    utt_frames.push_back(codec_analysis_frames(x, model.analysis));
    total += utt_frames.back().rows;
  }
  const int C = model.latent_dim();
  Mat pool(std::min(total, max_frames), C);
  if (total <= max_frames) {
    int t = 0;
    for (const auto& f : utt_frames)
      for (int i = 0; i < f.rows; ++i, ++t)
        for (int c = 0; c < C; ++c) pool.at(t, c) = f.at(i, c);
  } else {
    std::vector<int> pick(total);
    std::iota(pick.begin(), pick.end(), 0);
    rng.shuffle(&pick);
    pick.resize(max_frames);
    std::sort(pick.begin(), pick.end());
    int t = 0, base = 0;
    size_t j = 0;
    for (const auto& f : utt_frames) {
      for (int i = 0; i < f.rows; ++i)
        if (j < pick.size() && pick[j] == base + i) {
          for (int c = 0; c < C; ++c) pool.at(t, c) = f.at(i, c);
          ++t;
          ++j;
        }
      base += f.rows;
    }
  }

  model.latent_mean.assign(C, 0.0);
  model.latent_std.assign(C, 0.0);
  for (int t = 0; t < pool.rows; ++t)
    for (int c = 0; c < C; ++c) model.latent_mean[c] += pool.at(t, c);
  for (int c = 0; c < C; ++c) model.latent_mean[c] /= pool.rows;
  for (int t = 0; t < pool.rows; ++t)
    for (int c = 0; c < C; ++c) {
      const double d = pool.at(t, c) - model.latent_mean[c];
      model.latent_std[c] += d * d;
    }
  for (int c = 0; c < C; ++c)
    model.latent_std[c] = std::max(1e-6, std::sqrt(model.latent_std[c] / pool.rows));

  Mat residual = pool;
  for (int r = 0; r < model.stages; ++r)
    model.codebooks.push_back(kmeans_stage(&residual, model.codebook_size, kmeans_iters, &rng));

  // Synthesis: band-center sinusoid bank plus the energy-domain equalizer.
  // Start from single-band leakage probes, then refit the leakage map on
  // real decoded speech, and keep whichever equalizer reconstructs the
  // refit utterances better.
  model.band_freq = linear_center_frequencies(model.analysis.bands, model.analysis.fmin,
                                              model.analysis.fmax);
  Mat leak = probe_leakage(model);
  model.energy_equalizer = ridge_inverse(leak, 1e-8);

  const int refit_utts = std::min<int>(8, utt_frames.size());
  auto refit_snr = [&]() {
    double snr = 0.0;
    for (int u = 0; u < refit_utts; ++u) {
      Waveform y = codec_decode(utt_frames[u], model);
      Mat re = codec_analysis_frames(y, model.analysis);
      snr += snr_db(utt_frames[u].data, re.data);
    }
    return snr / refit_utts;
  };
  const double snr_probe = refit_snr();
  Mat probe_equalizer = model.energy_equalizer;

  Mat x_energy(0, C), y_energy(0, C);
  {
    int rows = 0;
    for (int u = 0; u < refit_utts; ++u) rows += utt_frames[u].rows;
    x_energy = Mat(rows, C);
    y_energy = Mat(rows, C);
    int t = 0;
    for (int u = 0; u < refit_utts; ++u) {
      Mat amps = equalize(utt_frames[u], model);
      Mat re = codec_analysis_frames(synthesize_bank(amps, model), model.analysis);
      for (int i = 0; i < amps.rows; ++i, ++t)
        for (int c = 0; c < C; ++c) {
          x_energy.at(t, c) = amps.at(i, c) * amps.at(i, c);
          y_energy.at(t, c) = re.at(i, c) * re.at(i, c);
        }
    }
  }
  // Least-squares leakage refit: y = x * L^T  =>  L^T = (X^T X + ridge)^-1 X^T Y.
  Mat xtx(C, C), xty(C, C);
  gemm_tn_acc(x_energy.rows, C, C, x_energy.data.data(), C, x_energy.data.data(), C,
              xtx.data.data(), C);
  gemm_tn_acc(x_energy.rows, C, C, x_energy.data.data(), C, y_energy.data.data(), C,
              xty.data.data(), C);
  double xscale = 0.0;
  for (double v : xtx.data) xscale = std::max(xscale, std::abs(v));
  for (int i = 0; i < C; ++i) xtx.at(i, i) += 1e-8 * xscale;
  Mat lt = solve_linear(xtx, xty);  // C x C, equals L^T
  Mat refit_leak(C, C);
  for (int i = 0; i < C; ++i)
    for (int j = 0; j < C; ++j) refit_leak.at(i, j) = lt.at(j, i);
  // The refit maps equalized energies; compose with the current equalizer to
  // express it against raw targets: y = (x_raw * W0^T) * L^T.
  Mat composed(C, C);
  gemm_nn_acc(C, C, C, refit_leak.data.data(), C, probe_equalizer.data.data(), C,
              composed.data.data(), C);
  model.energy_equalizer = ridge_inverse(composed, 1e-8);
  const double snr_refit = refit_snr();
  if (snr_probe >= snr_refit) model.energy_equalizer = probe_equalizer;

  DSR_REQUIRE(model.energy_equalizer.all_finite(), "codec_train: equalizer not finite");
  return model;
}

double codec_feature_snr(const Manifest& manifest, const CodecModel& model, bool quantize) {
  DSR_REQUIRE(!manifest.rows.empty(), "codec_feature_snr: empty manifest");
  double snr = 0.0;
  for (const auto& row : manifest.rows) {
    int sr = 0;
    Waveform x = read_wav(manifest.audio_file(row), &sr);
    Mat frames = codec_analysis_frames(x, model.analysis);
    Mat latents = quantize ? codec_quantize(frames, model, nullptr, nullptr) : frames;
    Waveform y = codec_decode(latents, model);
    Mat re = codec_analysis_frames(y, model.analysis);
    snr += snr_db(frames.data, re.data);
  }
  return snr / manifest.rows.size();
}

void save_codec(const std::string& path, const CodecModel& model) {
  BinaryWriter w(path, kCodecMagic, 1);
  w.put_string(model.codec_id);
  w.put_i32(model.analysis.bands);
  w.put_f64(model.analysis.fmin);
  w.put_f64(model.analysis.fmax);
  w.put_i32(model.analysis.win);
  w.put_i32(model.analysis.nfft);
  w.put_i32(model.stages);
  w.put_i32(model.codebook_size);
  for (const auto& cb : model.codebooks) w.put_mat(cb);
  w.put_vector(model.band_freq);
  w.put_mat(model.energy_equalizer);
  w.put_vector(model.latent_mean);
  w.put_vector(model.latent_std);
  w.close();
}

CodecModel load_codec(const std::string& path) {
  BinaryReader r(path, kCodecMagic, 1);
  CodecModel m;
  m.codec_id = r.get_string();
  m.analysis.bands = r.get_i32();
  m.analysis.fmin = r.get_f64();
  m.analysis.fmax = r.get_f64();
  m.analysis.win = r.get_i32();
  m.analysis.nfft = r.get_i32();
  m.stages = r.get_i32();
  m.codebook_size = r.get_i32();
  for (int i = 0; i < m.stages; ++i) {
    m.codebooks.push_back(r.get_mat());
    DSR_REQUIRE(m.codebooks.back().rows == m.codebook_size &&
                    m.codebooks.back().cols == m.analysis.bands,
                "codec checkpoint: codebook shape mismatch");
  }
  m.band_freq = r.get_vector();
  m.energy_equalizer = r.get_mat();
  m.latent_mean = r.get_vector();
  m.latent_std = r.get_vector();
  DSR_REQUIRE(static_cast<int>(m.band_freq.size()) == m.analysis.bands &&
                  static_cast<int>(m.latent_mean.size()) == m.analysis.bands &&
                  static_cast<int>(m.latent_std.size()) == m.analysis.bands,
              "codec checkpoint: vector size mismatch");
  return m;
}

}  // namespace dsr

// dsr/sv.cc

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

#include "dsr/sv.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "dsr/wav.h"

namespace dsr {

namespace {

constexpr char kSvMagic[4] = {'S', 'V', 'E', '0'};

// Per-band mean/std pooling: N x B frames -> 1 x 2B statistics row.
Mat pooled_stats(const Mat& frames) {
  DSR_REQUIRE(frames.rows >= 1, "sv_embed: empty frame window");
  const int B = frames.cols;
  Mat stats(1, 2 * B);
  for (int c = 0; c < B; ++c) {
    double mean = 0.0;
    for (int t = 0; t < frames.rows; ++t) mean += frames.at(t, c);
    mean /= frames.rows;
    double var = 0.0;
    for (int t = 0; t < frames.rows; ++t) {
      const double d = frames.at(t, c) - mean;
      var += d * d;
    }
    stats.at(0, c) = mean;
    stats.at(0, B + c) = std::sqrt(var / frames.rows + 1e-8);
  }
  return stats;
}

std::vector<double> l2_normalize_row(const double* x, int n) {
  double norm = 0.0;
  for (int i = 0; i < n; ++i) norm += x[i] * x[i];
  norm = std::sqrt(std::max(norm, 1e-24));
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = x[i] / norm;
  return out;
}

class SpecstatEmbedder : public SvEmbedder {
 public:
  SpecstatEmbedder(int dim, const AnalysisSpec& spec) : dim_(dim), spec_(spec) {
    proj_ = Mat(2 * spec.bands, dim);
    Rng rng(derive_seed(fnv1a64(std::string("specstat")), "projection"));
    for (auto& v : proj_.data) v = rng.normal() / std::sqrt(2.0 * spec.bands);
  }

  std::string id() const override { return "specstat"; }
  int dim() const override { return dim_; }
  const AnalysisSpec& analysis() const override { return spec_; }

  SpeakerEmbedding embed_frames(const Mat& frames) const override {
    DSR_REQUIRE(frames.cols == spec_.bands,
                "specstat: expected " << spec_.bands << " bands, got " << frames.cols);
    Mat stats = pooled_stats(frames);
    Mat h(1, dim_);
    matmul_nn(stats, proj_, &h);
    SpeakerEmbedding e;
    e.vector = l2_normalize_row(h.row(0), dim_);
    e.embedder_id = id();
    return e;
  }

 private:
  int dim_;
  AnalysisSpec spec_;
  Mat proj_;
};

}  // namespace

SpeakerEmbedding SvEmbedder::embed_waveform(const Waveform& x) const {
  return embed_frames(codec_analysis_frames(x, analysis()));
}

double embedding_l1(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  DSR_REQUIRE(a.vector.size() == b.vector.size(),
              "embedding_l1: dim mismatch " << a.vector.size() << " vs " << b.vector.size());
  double d = 0.0;
  for (size_t i = 0; i < a.vector.size(); ++i) d += std::abs(a.vector[i] - b.vector[i]);
  return d;
}

std::unique_ptr<SvEmbedder> make_specstat_embedder(int dim, const AnalysisSpec& spec) {
  DSR_REQUIRE(dim >= 1, "make_specstat_embedder: bad dim");
  return std::make_unique<SpecstatEmbedder>(dim, spec);
}

TrainedSvEmbedder::TrainedSvEmbedder(int dim, int hidden, const AnalysisSpec& spec,
                                     uint64_t init_seed)
    : dim_(dim), hidden_(hidden), spec_(spec) {
  Rng rng(init_seed);
  lin1_ = std::make_unique<Linear>(&params_, "sv.lin1", 2 * spec.bands, hidden, &rng);
  lin2_ = std::make_unique<Linear>(&params_, "sv.lin2", hidden, dim, &rng);
  params_.create("sv.scale", 1, 2);  // [w, b] of the GE2E similarity
  params_.all().back()->value.at(0, 0) = 1.0;
}

SpeakerEmbedding TrainedSvEmbedder::embed_frames(const Mat& frames) const {
  DSR_REQUIRE(frames.cols == spec_.bands,
              "svnet: expected " << spec_.bands << " bands, got " << frames.cols);
  Mat out = lin2_->forward(relu(lin1_->forward(pooled_stats(frames))));
  SpeakerEmbedding e;
  e.vector = l2_normalize_row(out.row(0), dim_);
  e.embedder_id = id();
  return e;
}

TrainedSvEmbedder train_sv_embedder(const Manifest& manifest, const Config& config,
                                    std::vector<double>* loss_curve) {
  const int dim = config.get_int("sv.dim");
  const int steps = config.get_int("sv.steps");
  const double lr0 = config.get_double("sv.lr");
  const int windows_per_speaker = config.get_int("sv.utts_per_speaker");
  const int W = config.get_int("speaker.window");
  AnalysisSpec spec;
  spec.bands = config.get_int("codec.bands");

  DSR_REQUIRE(windows_per_speaker >= 2, "train_sv_embedder: sv.utts_per_speaker must be >= 2");
  Manifest normal = manifest.filter_severity(0.0);
  std::map<std::string, std::vector<int>> by_speaker;
  for (int i = 0; i < static_cast<int>(normal.rows.size()); ++i)
    by_speaker[normal.rows[i].speaker_id].push_back(i);
  DSR_REQUIRE(by_speaker.size() >= 2,
              "train_sv_embedder: need >= 2 speakers, got " << by_speaker.size());

  // Cache analysis frames once; utterances are short.
  std::vector<Mat> frames(normal.rows.size());
  for (size_t i = 0; i < normal.rows.size(); ++i) {
    int sr = 0;
    frames[i] = codec_analysis_frames(read_wav(normal.audio_file(normal.rows[i]), &sr), spec);
  }

  Rng rng(derive_seed(config.get_u64("seed"), "sv"));
  TrainedSvEmbedder emb(dim, 128, spec, rng.next_u64());
  Adam opt(&emb.params_, lr0);
  Param* scale = nullptr;
  for (const auto& p : emb.params_.all())
    if (p->name == "sv.scale") scale = p.get();

  const int S = static_cast<int>(by_speaker.size());
  const int M = windows_per_speaker;
  const int B = S * M;
  std::vector<std::string> speakers;
  for (const auto& [sid, _] : by_speaker) speakers.push_back(sid);

  for (int step = 0; step < steps; ++step) {
    // Sample a window per (speaker, slot) and pool statistics.
    Mat stats(B, 2 * spec.bands);
    for (int s = 0; s < S; ++s)
      for (int m = 0; m < M; ++m) {
        const auto& utts = by_speaker[speakers[s]];
        const Mat& f = frames[utts[rng.uniform_int(0, static_cast<int>(utts.size()) - 1)]];
        const int t0 = f.rows > W ? rng.uniform_int(0, f.rows - W) : 0;
        Mat window(std::min(W, f.rows), f.cols);
        for (int t = 0; t < window.rows; ++t)
          for (int c = 0; c < f.cols; ++c) window.at(t, c) = f.at(t0 + t, c);
        Mat row = pooled_stats(window);
        for (int c = 0; c < stats.cols; ++c) stats.at(s * M + m, c) = row.at(0, c);
      }

    emb.params_.zero_grads();
    Linear::Cache c1, c2;
    Mat h = emb.lin1_->forward(stats, &c1);
    Mat hrelu = relu(h);
    Mat raw = emb.lin2_->forward(hrelu, &c2);

    // L2 normalization with cached norms.
    Mat e(B, dim);
    std::vector<double> norms(B);
    for (int i = 0; i < B; ++i) {
      double n2 = 0.0;
      for (int c = 0; c < dim; ++c) n2 += raw.at(i, c) * raw.at(i, c);
      norms[i] = std::sqrt(std::max(n2, 1e-24));
      for (int c = 0; c < dim; ++c) e.at(i, c) = raw.at(i, c) / norms[i];
    }

    // Centroids; c_full[s] over all M windows, used when s is a negative.
    Mat c_full(S, dim);
    for (int s = 0; s < S; ++s)
      for (int m = 0; m < M; ++m)
        for (int c = 0; c < dim; ++c) c_full.at(s, c) += e.at(s * M + m, c) / M;

    const double w = scale->value.at(0, 0);
    const double bias = scale->value.at(0, 1);
    Mat de(B, dim);
    double loss = 0.0;
    double dw = 0.0, dbias = 0.0;
    std::vector<double> sims(S), probs(S);
    for (int i = 0; i < B; ++i) {
      const int self = i / M;
      // Distances to each speaker's centroid (own centroid excludes self).
      std::vector<std::vector<double>> cents(S, std::vector<double>(dim));
      for (int s = 0; s < S; ++s)
        for (int c = 0; c < dim; ++c) {
          if (s == self)
            cents[s][c] = (c_full.at(s, c) * M - e.at(i, c)) / (M - 1);
          else
            cents[s][c] = c_full.at(s, c);
        }
      std::vector<double> dist(S, 0.0);
      for (int s = 0; s < S; ++s)
        for (int c = 0; c < dim; ++c) dist[s] += std::abs(e.at(i, c) - cents[s][c]);
      for (int s = 0; s < S; ++s) sims[s] = bias - w * dist[s];
      double mx = *std::max_element(sims.begin(), sims.end());
      double z = 0.0;
      for (int s = 0; s < S; ++s) z += std::exp(sims[s] - mx);
      const double lse = mx + std::log(z);
      loss += (lse - sims[self]) / B;
      for (int s = 0; s < S; ++s) {
        probs[s] = std::exp(sims[s] - lse);
        const double dsim = (probs[s] - (s == self ? 1.0 : 0.0)) / B;
        dw += dsim * (-dist[s]);
        dbias += dsim;
        const double ddist = dsim * (-w);
        for (int c = 0; c < dim; ++c) {
          const double diff = e.at(i, c) - cents[s][c];
          const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          de.at(i, c) += ddist * sgn;
          // Centroid contribution back to member embeddings.
          if (s == self) {
            for (int m = 0; m < M; ++m) {
              const int j = s * M + m;
              if (j == i) continue;
              de.at(j, c) += ddist * (-sgn) / (M - 1);
            }
          } else {
            for (int m = 0; m < M; ++m) de.at(s * M + m, c) += ddist * (-sgn) / M;
          }
        }
      }
    }
    scale->grad.at(0, 0) += dw;
    scale->grad.at(0, 1) += dbias;

    // Through the normalization, the relu and the two linears.
    Mat draw(B, dim);
    for (int i = 0; i < B; ++i) {
      double dot = 0.0;
      for (int c = 0; c < dim; ++c) dot += e.at(i, c) * de.at(i, c);
      for (int c = 0; c < dim; ++c)
        draw.at(i, c) = (de.at(i, c) - e.at(i, c) * dot) / norms[i];
    }
    Mat dhrelu(B, emb.hidden_);
    emb.lin2_->backward(c2, draw, &dhrelu);
    Mat dh(B, emb.hidden_);
    relu_backward(h, dhrelu, &dh);
    Mat dstats(B, 2 * spec.bands);
    emb.lin1_->backward(c1, dh, &dstats);

    opt.set_lr(cosine_lr(lr0, step, steps));
    opt.step();
    scale->value.at(0, 0) = std::max(1e-3, scale->value.at(0, 0));
    if (loss_curve) loss_curve->push_back(loss);
  }
  return emb;
}

void save_sv_embedder(const std::string& path, const TrainedSvEmbedder& emb) {
  BinaryWriter w(path, kSvMagic, 1);
  w.put_string(emb.id());
  w.put_i32(emb.dim());
  const AnalysisSpec& s = emb.analysis();
  w.put_i32(s.bands);
  w.put_f64(s.fmin);
  w.put_f64(s.fmax);
  w.put_i32(s.win);
  w.put_i32(s.nfft);
  emb.params().save(&w);
  w.close();
}

std::unique_ptr<SvEmbedder> load_sv_embedder(const std::string& path) {
  BinaryReader r(path, kSvMagic, 1);
  const std::string id = r.get_string();
  DSR_REQUIRE(id == "svnet", "unknown sv embedder id: " << id);
  const int dim = r.get_i32();
  AnalysisSpec spec;
  spec.bands = r.get_i32();
  spec.fmin = r.get_f64();
  spec.fmax = r.get_f64();
  spec.win = r.get_i32();
  spec.nfft = r.get_i32();
  auto emb = std::make_unique<TrainedSvEmbedder>(dim, 128, spec, 0);
  emb->params().load(&r);
  return emb;
}

SvSeparation sv_separation(const Manifest& manifest, const SvEmbedder& emb) {
  DSR_REQUIRE(manifest.rows.size() >= 2, "sv_separation: need >= 2 utterances");
  std::vector<SpeakerEmbedding> embs;
  for (const auto& row : manifest.rows) {
    int sr = 0;
    embs.push_back(emb.embed_waveform(read_wav(manifest.audio_file(row), &sr)));
  }
  SvSeparation sep;
  int n_intra = 0, n_inter = 0;
  for (size_t i = 0; i < embs.size(); ++i)
    for (size_t j = i + 1; j < embs.size(); ++j) {
      const double d = embedding_l1(embs[i], embs[j]);
      if (manifest.rows[i].speaker_id == manifest.rows[j].speaker_id) {
        sep.intra += d;
        ++n_intra;
      } else {
        sep.inter += d;
        ++n_inter;
      }
    }
  DSR_REQUIRE(n_intra > 0 && n_inter > 0, "sv_separation: need both pair kinds");
  sep.intra /= n_intra;
  sep.inter /= n_inter;
  return sep;
}

}  // namespace dsr

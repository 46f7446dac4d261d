// dsr/speaker_encoder.cc

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

#include "dsr/speaker_encoder.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>
#include <utility>

#include "dsr/dsp.h"
#include "dsr/manifest.h"
#include "dsr/wav.h"

namespace dsr {

namespace {

// Spectral gate: the noise profile is the average power spectrum of the
// quietest tenth of the frames (speech pauses and transition dips), and each
// time-frequency cell gets a Wiener-style gain against that profile with a
// small floor against musical noise. A clean recording's quietest frames are
// near-silent, so its profile is negligible and the gate approaches the
// identity.
constexpr double kGateQuietFraction = 0.1;
constexpr double kGateOversubtract = 1.5;
constexpr double kGateMinGain = 0.05;

Waveform spectral_gate(const Waveform& x) {
  const Stft stft(400, kHopSamples, 512);
  auto spec = stft.analyze(x);
  const size_t num_t = spec.size();
  const size_t num_k = spec.empty() ? 0 : spec[0].size();

  std::vector<double> frame_energy(num_t, 0.0);
  for (size_t t = 0; t < num_t; ++t)
    for (size_t k = 0; k < num_k; ++k) frame_energy[t] += std::norm(spec[t][k]);
  std::vector<size_t> order(num_t);
  for (size_t t = 0; t < num_t; ++t) order[t] = t;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return frame_energy[a] < frame_energy[b]; });
  const size_t quiet =
      std::max<size_t>(1, static_cast<size_t>(kGateQuietFraction * num_t));

  std::vector<double> noise_floor(num_k, 0.0);
  for (size_t i = 0; i < quiet; ++i)
    for (size_t k = 0; k < num_k; ++k) noise_floor[k] += std::norm(spec[order[i]][k]);
  for (size_t k = 0; k < num_k; ++k) noise_floor[k] /= static_cast<double>(quiet);

  for (size_t t = 0; t < num_t; ++t) {
    for (size_t k = 0; k < num_k; ++k) {
      const double p = std::norm(spec[t][k]);
      if (p <= 0.0) continue;
      const double gain =
          std::max(kGateMinGain, 1.0 - kGateOversubtract * noise_floor[k] / p);
      spec[t][k] *= gain;
    }
  }
  return stft.synthesize(spec, x.size());
}

std::string window_bytes(const Mat& w) {
  std::string key(w.data.size() * sizeof(double), '\0');
  std::memcpy(key.data(), w.data.data(), key.size());
  return key;
}

double embedding_l1_raw(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

Mat copy_rows(const Mat& src, int row_begin, int num_rows) {
  Mat out(num_rows, src.cols);
  for (int i = 0; i < num_rows; ++i)
    for (int j = 0; j < src.cols; ++j) out.at(i, j) = src.at(row_begin + i, j);
  return out;
}

}  // namespace

Waveform enhance(const Waveform& x, const std::string& method) {
  if (method == "passthrough") return x;
  DSR_REQUIRE(method == "specgate", "enhance: unknown method: " << method);
  if (x.empty()) return x;
  Waveform y = spectral_gate(x);
  DSR_REQUIRE(y.size() == x.size(), "enhance: length changed");
  return y;
}

NormalCodecSet build_normal_set(const Manifest& manifest, const CodecModel& codec,
                                const SvEmbedder& embedder, const Config& config) {
  DSR_REQUIRE(!manifest.rows.empty(), "build_normal_set: empty manifest");
  for (const auto& row : manifest.rows)
    DSR_REQUIRE(row.severity == 0.0, "build_normal_set: non-normal row (severity "
                                         << row.severity << "): " << row.id);

  NormalCodecSet set;
  set.window = config.get_int("speaker.window");
  set.bands = codec.analysis.bands;
  set.embed_dim = embedder.dim();
  set.embedder_id = embedder.id();
  set.codec_id = codec.codec_id;
  set.seed = derive_seed(config.get_u64("seed"), "normal_set");
  const int target = config.get_int("speaker.set_size");
  DSR_REQUIRE(set.window >= 1 && target >= 1, "build_normal_set: bad window/set size");

  // Harvest every stride-1 window of quantized codec frames, in corpus order.
  std::vector<Mat> windows;
  std::unordered_set<std::string> seen;
  for (const auto& row : manifest.rows) {
    int sr = 0;
    Waveform x = read_wav(manifest.audio_file(row), &sr);
    DSR_REQUIRE(sr == kSampleRate, "build_normal_set: bad sample rate in " << row.id);
    CodecEncoding enc = codec_encode(x, codec);
    const Mat& q = enc.quantized.frames;
    for (int t0 = 0; t0 + set.window <= q.rows; ++t0) {
      Mat w = copy_rows(q, t0, set.window);
      if (seen.insert(window_bytes(w)).second) windows.push_back(std::move(w));
    }
  }
  DSR_REQUIRE(!windows.empty(), "build_normal_set: no windows harvested (utterances "
                                "shorter than the window?)");

  // Uniform subsample with a fixed seed; keep harvest order for determinism.
  if (static_cast<int>(windows.size()) > target) {
    std::vector<int> idx(windows.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    Rng rng(set.seed);
    rng.shuffle(&idx);
    idx.resize(target);
    std::sort(idx.begin(), idx.end());
    std::vector<Mat> picked;
    picked.reserve(idx.size());
    for (int i : idx) picked.push_back(std::move(windows[i]));
    windows = std::move(picked);
  }

  set.entries = std::move(windows);
  set.embeddings.reserve(set.entries.size());
  for (const Mat& w : set.entries) {
    SpeakerEmbedding e = embedder.embed_frames(w);
    set.embeddings.push_back(std::move(e.vector));
  }
  return set;
}

static constexpr char kNormalSetMagic[4] = {'N', 'C', 'S', '0'};

void save_normal_set(const std::string& path, const NormalCodecSet& set) {
  DSR_REQUIRE(set.size() >= 1, "save_normal_set: empty set");
  BinaryWriter w(path, kNormalSetMagic, 1);
  w.put_i32(set.window);
  w.put_i32(set.bands);
  w.put_i32(set.embed_dim);
  w.put_i32(set.size());
  w.put_string(set.embedder_id);
  w.put_string(set.codec_id);
  w.put_u64(set.seed);
  for (const Mat& e : set.entries) w.put_mat(e);
  for (const auto& v : set.embeddings) w.put_vector(v);
}

NormalCodecSet load_normal_set(const std::string& path) {
  BinaryReader r(path, kNormalSetMagic, 1);
  NormalCodecSet set;
  set.window = r.get_i32();
  set.bands = r.get_i32();
  set.embed_dim = r.get_i32();
  const int count = r.get_i32();
  set.embedder_id = r.get_string();
  set.codec_id = r.get_string();
  set.seed = r.get_u64();
  DSR_REQUIRE(set.window >= 1 && set.bands >= 1 && set.embed_dim >= 1 && count >= 1,
              "load_normal_set: corrupt header in " << path);
  set.entries.reserve(count);
  for (int i = 0; i < count; ++i) {
    Mat e = r.get_mat();
    DSR_REQUIRE(e.rows == set.window && e.cols == set.bands,
                "load_normal_set: entry " << i << " has bad shape");
    set.entries.push_back(std::move(e));
  }
  set.embeddings.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::vector<double> v = r.get_vector();
    DSR_REQUIRE(static_cast<int>(v.size()) == set.embed_dim,
                "load_normal_set: embedding " << i << " has bad size");
    set.embeddings.push_back(std::move(v));
  }
  return set;
}

CodecFrameSequence normalize_codec(const CodecFrameSequence& z_hat, const NormalCodecSet& set,
                                   const SvEmbedder& embedder) {
  DSR_REQUIRE(set.size() >= 1, "normalize_codec: empty normal set");
  DSR_REQUIRE(embedder.id() == set.embedder_id,
              "normalize_codec: embedder " << embedder.id() << " does not match set ("
                                           << set.embedder_id << ")");
  DSR_REQUIRE(embedder.dim() == set.embed_dim, "normalize_codec: embedder dim mismatch");
  const Mat& in = z_hat.frames;
  DSR_REQUIRE(in.rows >= 1 && in.cols == set.bands,
              "normalize_codec: input is " << in.rows << "x" << in.cols << ", set has "
                                           << set.bands << " bands");
  DSR_REQUIRE(in.all_finite(), "normalize_codec: non-finite input");

  const int w = set.window;
  CodecFrameSequence out;
  out.frames = Mat(in.rows, in.cols);
  out.frame_rate = z_hat.frame_rate;
  out.source_tag = "normalized";

  for (int t0 = 0; t0 < in.rows; t0 += w) {
    const int len = std::min(w, in.rows - t0);
    const SpeakerEmbedding query = embedder.embed_frames(copy_rows(in, t0, len));
    int best = 0;
    double best_dist = 0.0;
    for (int j = 0; j < set.size(); ++j) {
      // A trailing partial window competes against entry prefixes of the
      // same length so that re-normalizing the output is exact.
      const std::vector<double> cand =
          (len == w) ? set.embeddings[j]
                     : embedder.embed_frames(copy_rows(set.entries[j], 0, len)).vector;
      const double d = embedding_l1_raw(query.vector, cand);
      if (j == 0 || d < best_dist) {
        best = j;
        best_dist = d;
      }
    }
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < in.cols; ++j)
        out.frames.at(t0 + i, j) = set.entries[best].at(i, j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PromptEncoder

struct PromptEncoder::Block {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Linear ff1, ff2;

  using Cache = PromptEncoder::BlockCache;

  Block(ParamStore* store, const std::string& prefix, int hidden, int heads, Rng* rng)
      : ln1(store, prefix + ".ln1", hidden),
        ln2(store, prefix + ".ln2", hidden),
        attn(store, prefix + ".attn", hidden, hidden, hidden, heads, rng),
        ff1(store, prefix + ".ff1", hidden, 4 * hidden, rng),
        ff2(store, prefix + ".ff2", 4 * hidden, hidden, rng) {}

  Mat forward(const Mat& u, Cache* cache) const {
    Cache local;
    Cache* c = cache ? cache : &local;
    Mat a = ln1.forward(u, &c->ln1c);
    Mat att = attn.forward(a, a, &c->attnc);
    Mat u1 = u;
    for (size_t i = 0; i < u1.data.size(); ++i) u1.data[i] += att.data[i];
    Mat b = ln2.forward(u1, &c->ln2c);
    c->ff1_out = ff1.forward(b, &c->ff1c);
    Mat f = ff2.forward(relu(c->ff1_out), &c->ff2c);
    for (size_t i = 0; i < u1.data.size(); ++i) u1.data[i] += f.data[i];
    return u1;
  }

  // du accumulates the gradient with respect to the block input.
  void backward(const Cache& c, const Mat& dy, Mat* du) const {
    Mat dh(c.ff2c.x.rows, c.ff2c.x.cols);
    ff2.backward(c.ff2c, dy, &dh);
    Mat dpre(c.ff1_out.rows, c.ff1_out.cols);
    relu_backward(c.ff1_out, dh, &dpre);
    Mat db(dy.rows, dy.cols);
    ff1.backward(c.ff1c, dpre, &db);
    Mat du1 = dy;  // residual skip into u1
    ln2.backward(c.ln2c, db, &du1);
    Mat da(dy.rows, dy.cols);
    attn.backward(c.attnc, du1, &da, &da);  // self-attention: q and kv share da
    ln1.backward(c.ln1c, da, du);
    for (size_t i = 0; i < du->data.size(); ++i) du->data[i] += du1.data[i];
  }
};

PromptEncoder::PromptEncoder(ParamStore* store, const std::string& prefix, int in_dim,
                             int hidden, int heads, int blocks, Rng* rng)
    : in_dim_(in_dim), hidden_(hidden) {
  DSR_REQUIRE(in_dim >= 1 && hidden >= 1 && heads >= 1 && blocks >= 1,
              "PromptEncoder: bad dimensions");
  DSR_REQUIRE(hidden % heads == 0, "PromptEncoder: hidden not divisible by heads");
  input_proj_ = std::make_unique<Linear>(store, prefix + ".proj", in_dim, hidden, rng);
  for (int b = 0; b < blocks; ++b)
    blocks_.push_back(std::make_unique<Block>(store, prefix + ".block" + std::to_string(b),
                                              hidden, heads, rng));
}

PromptEncoder::~PromptEncoder() = default;

Mat PromptEncoder::forward(const Mat& x) const {
  Cache cache;
  return forward(x, &cache);
}

Mat PromptEncoder::forward(const Mat& x, Cache* cache) const {
  DSR_REQUIRE(x.cols == in_dim_, "PromptEncoder: input has " << x.cols << " dims, expected "
                                                             << in_dim_);
  DSR_REQUIRE(x.rows >= 1, "PromptEncoder: empty input");
  cache->blocks.resize(blocks_.size());
  Mat u = input_proj_->forward(x, &cache->proj);
  for (size_t b = 0; b < blocks_.size(); ++b) u = blocks_[b]->forward(u, &cache->blocks[b]);
  return u;
}

void PromptEncoder::backward(const Cache& cache, const Mat& dy, Mat* dx) const {
  Mat du = dy;
  for (size_t b = blocks_.size(); b-- > 0;) {
    Mat dprev(du.rows, du.cols);
    blocks_[b]->backward(cache.blocks[b], du, &dprev);
    du = std::move(dprev);
  }
  input_proj_->backward(cache.proj, du, dx);
}

SpeakerPrompt PromptEncoder::encode(const CodecFrameSequence& z_tilde) const {
  DSR_REQUIRE(z_tilde.frames.all_finite(), "encode_prompt: non-finite codec frames");
  SpeakerPrompt p;
  p.frames = forward(z_tilde.frames);
  return p;
}

}  // namespace dsr

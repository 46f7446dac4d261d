// dsr/test_speaker_encoder.cc

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

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dsr/speaker_encoder.h"
#include "dsr/synthcorpus.h"
#include "dsr/wav.h"
#include "grad_check.h"

using namespace dsr;
using dsr::testing::check_grads;
using dsr::testing::randn;
using dsr::testing::weighted_sum;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dsr_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::string> phrase(uint64_t seed) {
  const auto& inv = default_inventory();
  Rng rng(seed);
  std::vector<std::string> out;
  const int n = rng.uniform_int(4, 8);
  for (int i = 0; i < n; ++i) out.push_back(inv.symbols[rng.uniform_int(0, inv.size() - 1)]);
  return out;
}

Manifest make_clean_manifest(const fs::path& dir, int count, uint64_t seed) {
  auto speakers = make_speakers(2);
  fs::create_directories(dir / "audio");
  Manifest m;
  m.dir = dir.string();
  for (int i = 0; i < count; ++i) {
    const auto& spk = speakers[i % speakers.size()];
    Utterance u = generate_utterance(phrase(seed + i), spk, seed + 1000 + i);
    char id[32];
    std::snprintf(id, sizeof(id), "n%04d_%s", i, spk.speaker_id.c_str());
    ManifestRow row;
    row.id = id;
    row.audio_path = "audio/" + std::string(id) + ".wav";
    row.phonemes = u.phonemes;
    row.speaker_id = spk.speaker_id;
    row.severity = 0.0;
    write_wav(m.dir + "/" + row.audio_path, u.waveform, kSampleRate);
    m.rows.push_back(row);
  }
  return m;
}

const Manifest& normal_manifest() {
  static TempDir dir("spk_normal");
  static Manifest m = make_clean_manifest(dir.path, 12, 2100);
  return m;
}

const CodecModel& codec() {
  static CodecModel model = [] {
    Config cfg;
    cfg.set("seed", "4242");
    return codec_train(normal_manifest(), cfg);
  }();
  return model;
}

Config set_config(int set_size) {
  Config cfg;
  cfg.set("seed", "77");
  cfg.set("speaker.set_size", std::to_string(set_size));
  return cfg;
}

// Random synthetic normal set over the specstat embedder; no codec needed.
NormalCodecSet random_set(int count, int window, int bands, const SvEmbedder& emb,
                          uint64_t seed) {
  Rng rng(seed);
  NormalCodecSet set;
  set.window = window;
  set.bands = bands;
  set.embed_dim = emb.dim();
  set.embedder_id = emb.id();
  set.codec_id = "test";
  set.seed = seed;
  for (int i = 0; i < count; ++i) {
    set.entries.push_back(randn(window, bands, &rng));
    set.embeddings.push_back(emb.embed_frames(set.entries.back()).vector);
  }
  return set;
}

// Independent exhaustive-scan reference for normalize_codec.
CodecFrameSequence brute_force_normalize(const CodecFrameSequence& z, const NormalCodecSet& set,
                                         const SvEmbedder& emb) {
  CodecFrameSequence out;
  out.frames = Mat(z.frames.rows, z.frames.cols);
  out.frame_rate = z.frame_rate;
  out.source_tag = "normalized";
  for (int t0 = 0; t0 < z.frames.rows; t0 += set.window) {
    const int len = std::min(set.window, z.frames.rows - t0);
    Mat chunk(len, z.frames.cols);
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < z.frames.cols; ++j) chunk.at(i, j) = z.frames.at(t0 + i, j);
    const auto q = emb.embed_frames(chunk).vector;
    int best = -1;
    double best_d = 0.0;
    for (int e = 0; e < set.size(); ++e) {
      Mat prefix(len, set.bands);
      for (int i = 0; i < len; ++i)
        for (int j = 0; j < set.bands; ++j) prefix.at(i, j) = set.entries[e].at(i, j);
      const auto c = emb.embed_frames(prefix).vector;
      double d = 0.0;
      for (size_t i = 0; i < q.size(); ++i) d += std::abs(q[i] - c[i]);
      if (best < 0 || d < best_d) {
        best = e;
        best_d = d;
      }
    }
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < set.bands; ++j) out.frames.at(t0 + i, j) = set.entries[best].at(i, j);
  }
  return out;
}

bool same_frames(const Mat& a, const Mat& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

// Same embedder scaled by a positive constant (violates unit norm on
// purpose; exercises the argmin-invariance property of the L1 rule).
class ScaledEmbedder : public SvEmbedder {
 public:
  ScaledEmbedder(const SvEmbedder* base, double scale) : base_(base), scale_(scale) {}
  std::string id() const override { return base_->id(); }
  int dim() const override { return base_->dim(); }
  const AnalysisSpec& analysis() const override { return base_->analysis(); }
  SpeakerEmbedding embed_frames(const Mat& frames) const override {
    SpeakerEmbedding e = base_->embed_frames(frames);
    for (double& v : e.vector) v *= scale_;
    return e;
  }

 private:
  const SvEmbedder* base_;
  double scale_;
};

}  // namespace

// ---------------------------------------------------------------------------
// enhance

TEST_CASE("enhance passthrough is the identity and unknown methods throw") {
  Rng rng(11);
  Waveform x(4000);
  for (auto& v : x) v = 0.1 * rng.normal();
  Waveform y = enhance(x, "passthrough");
  REQUIRE(y.size() == x.size());
  for (size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  CHECK_THROWS_WITH_AS(enhance(x, "wiener"), doctest::Contains("unknown method"), Error);
}

TEST_CASE("spectral gate preserves length and improves SNR by >= 3 dB") {
  auto speakers = make_speakers(1);
  Utterance u = generate_utterance({"aa", "ss", "ii", "mm", "oo"}, speakers[0], 321);
  const Waveform& clean = u.waveform;

  // White noise at 10 dB SNR against the clean reference.
  Rng rng(99);
  Waveform noise(clean.size());
  for (auto& v : noise) v = rng.normal();
  const double target = signal_power(clean) / std::pow(10.0, 10.0 / 10.0);
  const double gain = std::sqrt(target / signal_power(noise));
  Waveform noisy(clean.size());
  for (size_t i = 0; i < clean.size(); ++i) noisy[i] = clean[i] + gain * noise[i];

  Waveform out = enhance(noisy, "specgate");
  REQUIRE(out.size() == noisy.size());
  const double in_snr = snr_db(clean, noisy);
  const double out_snr = snr_db(clean, out);
  MESSAGE("specgate snr in " << in_snr << " dB out " << out_snr << " dB");
  CHECK(in_snr == doctest::Approx(10.0).epsilon(0.01));
  CHECK(out_snr >= in_snr + 3.0);
}

TEST_CASE("spectral gate leaves clean speech mostly intact") {
  auto speakers = make_speakers(1);
  Utterance u = generate_utterance({"aa", "ii", "oo"}, speakers[0], 77);
  Waveform out = enhance(u.waveform, "specgate");
  REQUIRE(out.size() == u.waveform.size());
  // Gating a clean signal should cost little fidelity.
  CHECK(snr_db(u.waveform, out) > 10.0);
}

// ---------------------------------------------------------------------------
// build_normal_set

TEST_CASE("build_normal_set harvests aligned windows and embeddings") {
  auto emb = make_specstat_embedder(16);
  NormalCodecSet set = build_normal_set(normal_manifest(), codec(), *emb, set_config(100000));

  REQUIRE(set.size() >= 100);
  CHECK(set.window == 8);
  CHECK(set.bands == 64);
  CHECK(set.embed_dim == 16);
  CHECK(set.embedder_id == "specstat");
  CHECK(set.codec_id == codec().codec_id);
  for (const Mat& e : set.entries) {
    REQUIRE(e.rows == 8);
    REQUIRE(e.cols == 64);
    REQUIRE(e.all_finite());
  }
  Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    const int i = rng.uniform_int(0, set.size() - 1);
    const auto direct = emb->embed_frames(set.entries[i]).vector;
    REQUIRE(direct.size() == set.embeddings[i].size());
    for (size_t j = 0; j < direct.size(); ++j) CHECK(set.embeddings[i][j] == direct[j]);
  }
}

TEST_CASE("build_normal_set subsamples to the target size deterministically") {
  auto emb = make_specstat_embedder(16);
  NormalCodecSet a = build_normal_set(normal_manifest(), codec(), *emb, set_config(64));
  NormalCodecSet b = build_normal_set(normal_manifest(), codec(), *emb, set_config(64));
  REQUIRE(a.size() == 64);
  REQUIRE(b.size() == 64);

  TempDir dir("spk_set");
  const std::string pa = (dir.path / "a.bin").string();
  const std::string pb = (dir.path / "b.bin").string();
  save_normal_set(pa, a);
  save_normal_set(pb, b);
  std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
  std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  REQUIRE(ca.size() == cb.size());
  CHECK(ca == cb);
}

TEST_CASE("build_normal_set rejects non-normal rows and empty manifests") {
  auto emb = make_specstat_embedder(16);
  Manifest bad = normal_manifest();
  bad.rows[1].severity = 0.7;
  CHECK_THROWS_WITH_AS(build_normal_set(bad, codec(), *emb, set_config(64)),
                       doctest::Contains("non-normal"), Error);
  Manifest empty;
  CHECK_THROWS_AS(build_normal_set(empty, codec(), *emb, set_config(64)), Error);
}

TEST_CASE("normal set survives a save/load round trip") {
  auto emb = make_specstat_embedder(16);
  NormalCodecSet set = build_normal_set(normal_manifest(), codec(), *emb, set_config(32));
  TempDir dir("spk_roundtrip");
  const std::string path = (dir.path / "set.bin").string();
  save_normal_set(path, set);
  NormalCodecSet loaded = load_normal_set(path);

  REQUIRE(loaded.size() == set.size());
  CHECK(loaded.window == set.window);
  CHECK(loaded.bands == set.bands);
  CHECK(loaded.embed_dim == set.embed_dim);
  CHECK(loaded.embedder_id == set.embedder_id);
  CHECK(loaded.codec_id == set.codec_id);
  CHECK(loaded.seed == set.seed);
  for (int i = 0; i < set.size(); ++i) {
    CHECK(same_frames(loaded.entries[i], set.entries[i]));
    CHECK(loaded.embeddings[i] == set.embeddings[i]);
  }

  // Normalization behaves identically through the loaded copy.
  Rng rng(8);
  CodecFrameSequence z;
  z.frames = randn(24, 64, &rng);
  CodecFrameSequence via_built = normalize_codec(z, set, *emb);
  CodecFrameSequence via_loaded = normalize_codec(z, loaded, *emb);
  CHECK(same_frames(via_built.frames, via_loaded.frames));
}

// ---------------------------------------------------------------------------
// normalize_codec

TEST_CASE("normalize_codec matches the exhaustive-scan oracle on 100 inputs") {
  auto emb = make_specstat_embedder(12, AnalysisSpec{});
  NormalCodecSet set = random_set(64, 8, 64, *emb, 42);
  Rng rng(1234);
  int tail_cases = 0;
  for (int trial = 0; trial < 100; ++trial) {
    CodecFrameSequence z;
    const int n = rng.uniform_int(1, 40);
    if (n % set.window != 0) ++tail_cases;
    z.frames = randn(n, 64, &rng);
    CodecFrameSequence got = normalize_codec(z, set, *emb);
    CodecFrameSequence want = brute_force_normalize(z, set, *emb);
    REQUIRE(same_frames(got.frames, want.frames));
    CHECK(got.source_tag == "normalized");
    CHECK(got.frame_rate == z.frame_rate);
  }
  CHECK(tail_cases > 10);  // partial trailing windows were exercised
}

TEST_CASE("every normalized window is an exact member of the set") {
  auto emb = make_specstat_embedder(12);
  NormalCodecSet set = random_set(32, 8, 64, *emb, 43);
  Rng rng(55);
  CodecFrameSequence z;
  z.frames = randn(32, 64, &rng);
  CodecFrameSequence out = normalize_codec(z, set, *emb);
  for (int t0 = 0; t0 < out.frames.rows; t0 += set.window) {
    bool found = false;
    for (const Mat& e : set.entries) {
      bool eq = true;
      for (int i = 0; i < set.window && eq; ++i)
        for (int j = 0; j < set.bands && eq; ++j) eq = out.frames.at(t0 + i, j) == e.at(i, j);
      if (eq) {
        found = true;
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("set members map to themselves and normalization is idempotent") {
  auto emb = make_specstat_embedder(12);
  NormalCodecSet set = random_set(48, 8, 64, *emb, 44);

  // Concatenation of two exact members maps to itself.
  CodecFrameSequence z;
  z.frames = Mat(16, 64);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 64; ++j) {
      z.frames.at(i, j) = set.entries[17].at(i, j);
      z.frames.at(8 + i, j) = set.entries[3].at(i, j);
    }
  CodecFrameSequence out = normalize_codec(z, set, *emb);
  CHECK(same_frames(out.frames, z.frames));

  // Idempotence on random inputs, including partial trailing windows.
  Rng rng(66);
  for (int trial = 0; trial < 20; ++trial) {
    CodecFrameSequence raw;
    raw.frames = randn(rng.uniform_int(1, 40), 64, &rng);
    CodecFrameSequence once = normalize_codec(raw, set, *emb);
    CodecFrameSequence twice = normalize_codec(once, set, *emb);
    CHECK(same_frames(once.frames, twice.frames));
  }
}

TEST_CASE("singleton set forces every window to that entry") {
  auto emb = make_specstat_embedder(12);
  NormalCodecSet set = random_set(1, 8, 64, *emb, 45);
  Rng rng(77);
  CodecFrameSequence z;
  z.frames = randn(20, 64, &rng);
  CodecFrameSequence out = normalize_codec(z, set, *emb);
  for (int t0 = 0; t0 < 16; t0 += 8)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 64; ++j) CHECK(out.frames.at(t0 + i, j) == set.entries[0].at(i, j));
  for (int i = 0; i < 4; ++i)  // 4-frame tail = prefix of the only entry
    for (int j = 0; j < 64; ++j) CHECK(out.frames.at(16 + i, j) == set.entries[0].at(i, j));
}

TEST_CASE("scaling all embeddings by a positive constant keeps the argmin") {
  auto base = make_specstat_embedder(12);
  NormalCodecSet set = random_set(64, 8, 64, *base, 46);

  ScaledEmbedder scaled(base.get(), 3.7);
  NormalCodecSet scaled_set = set;
  for (auto& e : scaled_set.embeddings)
    for (double& v : e) v *= 3.7;

  Rng rng(88);
  for (int trial = 0; trial < 20; ++trial) {
    CodecFrameSequence z;
    z.frames = randn(rng.uniform_int(1, 32), 64, &rng);
    CodecFrameSequence a = normalize_codec(z, set, *base);
    CodecFrameSequence b = normalize_codec(z, scaled_set, scaled);
    CHECK(same_frames(a.frames, b.frames));
  }
}

TEST_CASE("normalize_codec rejects bad sets and mismatched embedders") {
  auto emb = make_specstat_embedder(12);
  NormalCodecSet set = random_set(4, 8, 64, *emb, 47);
  Rng rng(99);
  CodecFrameSequence z;
  z.frames = randn(8, 64, &rng);

  NormalCodecSet empty = set;
  empty.entries.clear();
  empty.embeddings.clear();
  CHECK_THROWS_WITH_AS(normalize_codec(z, empty, *emb), doctest::Contains("empty"), Error);

  NormalCodecSet other = set;
  other.embedder_id = "someotherid";
  CHECK_THROWS_WITH_AS(normalize_codec(z, other, *emb), doctest::Contains("does not match"),
                       Error);

  CodecFrameSequence bad;
  bad.frames = randn(8, 32, &rng);
  CHECK_THROWS_AS(normalize_codec(bad, set, *emb), Error);
}

// ---------------------------------------------------------------------------
// PromptEncoder

TEST_CASE("prompt encoder is length preserving and deterministic") {
  Rng rng(7);
  ParamStore store;
  PromptEncoder penc(&store, "penc", 64, 32, 4, 2, &rng);
  Mat x = randn(11, 64, &rng);
  Mat y1 = penc.forward(x);
  Mat y2 = penc.forward(x);
  REQUIRE(y1.rows == 11);
  REQUIRE(y1.cols == 32);
  CHECK(y1.all_finite());
  CHECK(same_frames(y1, y2));

  CodecFrameSequence z;
  z.frames = x;
  z.source_tag = "normalized";
  SpeakerPrompt p = penc.encode(z);
  CHECK(same_frames(p.frames, y1));

  Mat wrong = randn(4, 16, &rng);
  CHECK_THROWS_AS(penc.forward(wrong), Error);
}

TEST_CASE("zero-weight blocks reduce to the input projection") {
  Rng rng(8);
  ParamStore store;
  PromptEncoder penc(&store, "penc", 10, 8, 2, 2, &rng);
  for (const auto& p : store.all())
    if (p->name.rfind("penc.block", 0) == 0)
      for (auto& v : p->value.data) v = 0.0;

  Mat x = randn(6, 10, &rng);
  Mat y = penc.forward(x);

  // Recompute the bare projection from the stored weights.
  const Param* w = nullptr;
  const Param* b = nullptr;
  for (const auto& p : store.all()) {
    if (p->name == "penc.proj.w") w = p.get();
    if (p->name == "penc.proj.b") b = p.get();
  }
  REQUIRE(w != nullptr);
  REQUIRE(b != nullptr);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < 8; ++j) {
      double acc = b->value.at(0, j);
      for (int k = 0; k < 10; ++k) acc += x.at(i, k) * w->value.at(k, j);
      CHECK(y.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("prompt encoder items are independent of processing order") {
  Rng rng(9);
  ParamStore store;
  PromptEncoder penc(&store, "penc", 6, 8, 2, 2, &rng);
  Mat a = randn(5, 6, &rng);
  Mat b = randn(9, 6, &rng);
  Mat ya1 = penc.forward(a);
  Mat yb1 = penc.forward(b);
  Mat yb2 = penc.forward(b);
  Mat ya2 = penc.forward(a);
  CHECK(same_frames(ya1, ya2));
  CHECK(same_frames(yb1, yb2));
}

TEST_CASE("prompt encoder gradients match finite differences") {
  Rng rng(10);
  ParamStore store;
  PromptEncoder penc(&store, "penc", 5, 8, 2, 2, &rng);
  Mat x = randn(4, 5, &rng);
  Mat R = randn(4, 8, &rng);

  store.zero_grads();
  PromptEncoder::Cache cache;
  penc.forward(x, &cache);
  Mat dx(4, 5);
  penc.backward(cache, R, &dx);
  check_grads(&store, [&] { return weighted_sum(penc.forward(x), R); }, {{&x, &dx}});
}

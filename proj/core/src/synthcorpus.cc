// dsr/synthcorpus.cc

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

#include "dsr/synthcorpus.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "dsr/serialize.h"
#include "dsr/wav.h"

namespace dsr {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPeakScale = 0.26;

// 9 voiced symbols followed by 3 unvoiced ones. Formant-like centers follow
// rough vowel-chart spacing so symbols are distinguishable yet confusable.
struct PhonemeDef {
  const char* symbol;
  PhonemeAcoustics ac;
};

constexpr PhonemeDef kPhonemes[] = {
    {"aa", {{730, 1090, 2440}, true}},
    {"ee", {{530, 1840, 2480}, true}},
    {"ii", {{270, 2290, 3010}, true}},
    {"oo", {{570, 840, 2410}, true}},
    {"uu", {{300, 870, 2240}, true}},
    {"mm", {{250, 1100, 2100}, true}},
    {"nn", {{280, 1700, 2600}, true}},
    {"ll", {{360, 1300, 2700}, true}},
    {"rr", {{310, 1060, 1380}, true}},
    {"ss", {{5500, 6500, 7200}, false}},
    {"sh", {{2500, 3300, 4200}, false}},
    {"ff", {{4000, 5100, 6200}, false}},
};
constexpr int kNumPhonemes = 12;
constexpr int kNumVoiced = 9;

// Unit uniform derived from a hash chain; used for timbre parameters so a
// speaker's spectral signature is a pure function of timbre_seed.
double hash_unit(uint64_t seed, uint64_t a, uint64_t b) {
  uint64_t h = seed;
  h = (h ^ (a + 0x9e3779b97f4a7c15ull)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27) ^ (b + 0x94d049bb133111ebull)) * 0x94d049bb133111ebull;
  h ^= h >> 31;
  return (h >> 11) * 0x1.0p-53;
}

// Speaker-consistent confusion target within the same voicing pool.
int confusion_target(const SpeakerProfile& spk, int phoneme_index) {
  bool voiced = phoneme_acoustics(phoneme_index).voiced;
  int pool_begin = voiced ? 0 : kNumVoiced;
  int pool_size = voiced ? kNumVoiced : kNumPhonemes - kNumVoiced;
  int offset =
      1 + static_cast<int>(hash_unit(spk.timbre_seed, 77, phoneme_index) * (pool_size - 1));
  return pool_begin + (phoneme_index - pool_begin + offset) % pool_size;
}

double adsr(int s, int len) {
  int att = std::min(len / 5, 480);
  int rel = std::min(len / 4, 560);
  if (s < att) return 0.5 - 0.5 * std::cos(kTwoPi / 2.0 * (s + 1) / (att + 1));
  if (s >= len - rel) return 0.5 - 0.5 * std::cos(kTwoPi / 2.0 * (len - s) / (rel + 1));
  return 1.0;
}

// The shared renderer behind generate_utterance and perturb_dysarthric.
// `durations` are final (already stretched); `severity` drives articulatory
// blending, jitter, pitch flattening and additive noise; `rng` supplies every
// random draw in a fixed order.
Utterance render(const std::vector<std::string>& phonemes, const std::vector<int>& durations,
                 const SpeakerProfile& speaker, double severity, Rng* rng) {
  const auto& inv = default_inventory();
  std::vector<int> idx = inv.encode(phonemes);
  const int F = std::accumulate(durations.begin(), durations.end(), 0);
  const int n = F * kHopSamples;

  Utterance u;
  u.phonemes = phonemes;
  u.durations = durations;
  u.speaker = speaker;
  u.severity = severity;
  u.waveform.assign(n, 0.0);
  u.pitch_hz.assign(F, 0.0);
  u.voiced.assign(F, 0);

  // Smooth f0 contour: start offset, declination, two slow wobbles, vibrato;
  // flattened toward base_f0 with severity.
  const double start = 1.0 + 0.08 * (rng->uniform() - 0.5);
  const double ph1 = rng->uniform(), ph2 = rng->uniform();
  std::vector<double> f0(F);
  for (int f = 0; f < F; ++f) {
    double pos = F > 1 ? static_cast<double>(f) / (F - 1) : 0.0;
    double scale = start * (1.0 - 0.08 * pos);
    scale += 0.03 * std::sin(kTwoPi * (1.3 * pos + ph1));
    scale += 0.02 * std::sin(kTwoPi * (3.1 * pos + ph2));
    scale += 0.02 * std::sin(kTwoPi * 5.5 * (f * 0.01));
    double hz = speaker.base_f0 * scale;
    f0[f] = speaker.base_f0 + (hz - speaker.base_f0) * (1.0 - 0.8 * severity);
  }

  int frame0 = 0;
  for (size_t i = 0; i < idx.size(); ++i) {
    bool voiced = phoneme_acoustics(idx[i]).voiced;
    for (int f = frame0; f < frame0 + durations[i]; ++f) {
      u.voiced[f] = voiced ? 1 : 0;
      u.pitch_hz[f] = voiced ? f0[f] : 0.0;
    }
    frame0 += durations[i];
  }

  double f0_phase = 0.0;
  int sample0 = 0;
  frame0 = 0;
  for (size_t i = 0; i < idx.size(); ++i) {
    const int p = idx[i];
    const PhonemeAcoustics& base = phoneme_acoustics(p);
    const int seg = durations[i] * kHopSamples;

    // Fixed rng draw order per phoneme: substitution coin, 3 formant jitters,
    // then the per-rendition voiced phases.
    const double sub_coin = rng->uniform();
    double jitter[3];
    for (double& j : jitter)
      j = severity > 0.0 ? (2.0 * rng->uniform() - 1.0) * 120.0 * severity : 0.0;

    const bool substituted = severity > 0.0 && sub_coin < 0.3 * severity;
    const int q = confusion_target(speaker, p);
    const double w = substituted ? 0.4 + 0.35 * severity : 0.0;
    const PhonemeAcoustics& blend = phoneme_acoustics(q);

    double freq[3], amp[3];
    for (int k = 0; k < 3; ++k) {
      freq[k] = (1.0 - w) * base.formants[k] + w * blend.formants[k] +
                speaker.formant_offsets[k] + jitter[k];
      amp[k] = (1.0 - w) * speaker.formant_amp(p, k) + w * speaker.formant_amp(q, k);
    }

    if (base.voiced) {
      double phase[3];
      for (double& ph : phase) ph = kTwoPi * rng->uniform();
      for (int s = 0; s < seg; ++s) {
        const int abs_s = sample0 + s;
        const double t = static_cast<double>(abs_s) / kSampleRate;
        f0_phase += kTwoPi * f0[std::min(F - 1, abs_s / kHopSamples)] / kSampleRate;
        const double am = 0.75 + 0.25 * std::sin(f0_phase);
        double x = 0.5 * std::sin(f0_phase);
        for (int k = 0; k < 3; ++k) x += am * amp[k] * std::sin(kTwoPi * freq[k] * t + phase[k]);
        u.waveform[abs_s] = kPeakScale * adsr(s, seg) * x;
      }
    } else {
      // Band-limited sinusoid "noise": 4 components around each center. The
      // component layout comes from the speaker's timbre signature, not the
      // per-utterance rng, so a given speaker's fricative keeps a stable
      // spectrum across renditions (the centers themselves still move under
      // dysarthric jitter/substitution).
      constexpr int kComps = 12;
      Rng noise_rng(derive_seed(speaker.timbre_seed, "fric" + std::to_string(p)));
      double cfreq[kComps], cphase[kComps], camp[kComps];
      for (int j = 0; j < kComps; ++j) {
        cfreq[j] = freq[j / 4] + noise_rng.uniform(-600.0, 600.0);
        cphase[j] = kTwoPi * noise_rng.uniform();
        camp[j] = 0.11 * (0.5 + noise_rng.uniform());
      }
      for (int s = 0; s < seg; ++s) {
        const int abs_s = sample0 + s;
        const double t = static_cast<double>(abs_s) / kSampleRate;
        f0_phase += kTwoPi * f0[std::min(F - 1, abs_s / kHopSamples)] / kSampleRate;
        double x = 0.0;
        for (int j = 0; j < kComps; ++j) x += camp[j] * std::sin(kTwoPi * cfreq[j] * t + cphase[j]);
        u.waveform[abs_s] = kPeakScale * adsr(s, seg) * x;
      }
    }
    sample0 += seg;
    frame0 += durations[i];
  }

  if (severity > 0.0) {
    const double snr = 30.0 - 20.0 * severity;
    const double sigma = std::sqrt(signal_power(u.waveform) / std::pow(10.0, snr / 10.0));
    for (auto& v : u.waveform) v += sigma * rng->normal();
  }

  double peak = 0.0;
  for (double v : u.waveform) peak = std::max(peak, std::abs(v));
  if (peak > 0.98)
    for (auto& v : u.waveform) v *= 0.98 / peak;
  return u;
}

}  // namespace

int PhonemeInventory::index_of(const std::string& symbol) const {
  for (int i = 0; i < size(); ++i)
    if (symbols[i] == symbol) return i;
  throw Error("unknown phoneme symbol '" + symbol + "'");
}

std::vector<int> PhonemeInventory::encode(const std::vector<std::string>& phonemes) const {
  std::vector<int> out;
  out.reserve(phonemes.size());
  for (const auto& p : phonemes) out.push_back(index_of(p));
  return out;
}

const PhonemeInventory& default_inventory() {
  static const PhonemeInventory inv = [] {
    PhonemeInventory v;
    for (const auto& d : kPhonemes) v.symbols.push_back(d.symbol);
    return v;
  }();
  return inv;
}

const PhonemeAcoustics& phoneme_acoustics(int phoneme_index) {
  DSR_REQUIRE(phoneme_index >= 0 && phoneme_index < kNumPhonemes,
              "phoneme index " << phoneme_index << " out of range");
  return kPhonemes[phoneme_index].ac;
}

double SpeakerProfile::formant_amp(int phoneme_index, int formant) const {
  static const double kBase[3] = {1.0, 0.63, 0.35};
  const double tilt = 0.85 + 0.3 * hash_unit(timbre_seed, 11, 0);
  double a = kBase[formant] * (0.7 + 0.6 * hash_unit(timbre_seed, phoneme_index, formant));
  for (int k = 0; k < formant; ++k) a *= tilt;
  return a;
}

std::vector<SpeakerProfile> make_speakers(int count) {
  struct Row {
    const char* id;
    double f0;
    double off[3];
  };
  static const Row kTable[8] = {
      {"spk_a", 95.0, {-40, 60, -90}},   {"spk_b", 130.0, {35, -80, 70}},
      {"spk_c", 180.0, {-25, 110, 40}},  {"spk_d", 225.0, {55, -45, -120}},
      {"spk_e", 110.0, {10, 95, 85}},    {"spk_f", 160.0, {-55, -30, 110}},
      {"spk_g", 205.0, {25, 45, -60}},   {"spk_h", 250.0, {-15, -100, 30}},
  };
  DSR_REQUIRE(count >= 1 && count <= 8, "speaker count " << count << " outside [1, 8]");
  std::vector<SpeakerProfile> out;
  for (int i = 0; i < count; ++i) {
    SpeakerProfile s;
    s.speaker_id = kTable[i].id;
    s.base_f0 = kTable[i].f0;
    for (int k = 0; k < 3; ++k) s.formant_offsets[k] = kTable[i].off[k];
    s.timbre_seed = fnv1a64(s.speaker_id);
    out.push_back(s);
  }
  return out;
}

int Utterance::total_frames() const {
  return std::accumulate(durations.begin(), durations.end(), 0);
}

Utterance generate_utterance(const std::vector<std::string>& phonemes,
                             const SpeakerProfile& speaker, uint64_t seed) {
  DSR_REQUIRE(!phonemes.empty(), "generate_utterance: empty phoneme sequence");
  const auto& inv = default_inventory();
  Rng rng(seed);
  std::vector<int> durations;
  durations.reserve(phonemes.size());
  for (const auto& p : phonemes) {
    bool voiced = phoneme_acoustics(inv.index_of(p)).voiced;
    durations.push_back(voiced ? rng.uniform_int(6, 14) : rng.uniform_int(5, 10));
  }
  return render(phonemes, durations, speaker, 0.0, &rng);
}

Utterance perturb_dysarthric(const Utterance& u, double severity, uint64_t seed) {
  DSR_REQUIRE(severity >= 0.0 && severity <= 1.0, "severity " << severity << " outside [0, 1]");
  if (severity == 0.0) return u;
  Rng rng(seed);
  std::vector<int> stretched;
  stretched.reserve(u.durations.size());
  for (int d : u.durations) {
    double factor = rng.uniform(1.0, 1.0 + severity);
    stretched.push_back(static_cast<int>(std::max<long long>(2, round_half_up(d * factor))));
  }
  Utterance out = render(u.phonemes, stretched, u.speaker, severity, &rng);
  out.id = u.id;
  return out;
}

void write_alignment(const std::string& path, const Utterance& u) {
  BinaryWriter w(path, "ALN0", 1);
  w.put_string(u.id);
  w.put_i32(static_cast<int32_t>(u.durations.size()));
  for (int d : u.durations) w.put_i32(d);
  w.put_vector(u.pitch_hz);
  w.put_i32(static_cast<int32_t>(u.voiced.size()));
  for (uint8_t v : u.voiced) w.put_u8(v);
}

AlignInfo read_alignment(const std::string& path) {
  BinaryReader r(path, "ALN0", 1);
  AlignInfo a;
  (void)r.get_string();
  int nd = r.get_i32();
  a.durations.resize(nd);
  for (int i = 0; i < nd; ++i) a.durations[i] = r.get_i32();
  a.pitch_hz = r.get_vector();
  int nv = r.get_i32();
  a.voiced.resize(nv);
  for (int i = 0; i < nv; ++i) a.voiced[i] = r.get_u8();
  DSR_REQUIRE(static_cast<int>(a.pitch_hz.size()) == nv, "alignment " << path << " corrupt");
  return a;
}

std::string alignment_path(const std::string& corpus_dir, const std::string& utt_id) {
  return corpus_dir + "/align/" + utt_id + ".aln";
}

void parse_severity_grid(const std::string& text, std::vector<double>* levels,
                         std::vector<double>* shares) {
  levels->clear();
  shares->clear();
  double total = 0.0;
  for (const auto& part : split_string(text, ',')) {
    auto kv = split_string(part, ':');
    DSR_REQUIRE(kv.size() == 2, "severity grid entry '" << part << "' is not level:share");
    char* end = nullptr;
    double level = std::strtod(kv[0].c_str(), &end);
    DSR_REQUIRE(end && *end == '\0' && level >= 0.0 && level <= 1.0,
                "bad severity level '" << kv[0] << "'");
    double share = std::strtod(kv[1].c_str(), &end);
    DSR_REQUIRE(end && *end == '\0' && share > 0.0, "bad severity share '" << kv[1] << "'");
    levels->push_back(level);
    shares->push_back(share);
    total += share;
  }
  DSR_REQUIRE(!levels->empty(), "empty severity grid");
  DSR_REQUIRE(std::abs(total - 1.0) < 1e-6, "severity shares sum to " << total << ", expected 1");
}

std::string build_corpus(const Config& config, const std::string& dir) {
  const int num_speakers = config.get_int("corpus.speakers", 4);
  const int num_utts = config.get_int("corpus.utts", 600);
  const int min_ph = config.get_int("corpus.min_phonemes", 3);
  const int max_ph = config.get_int("corpus.max_phonemes", 10);
  const double train_frac = config.get_double("corpus.train_frac", 0.6);
  const double dev_frac = config.get_double("corpus.dev_frac", 0.1);
  const uint64_t seed = derive_seed(config.get_u64("seed", 1234), "corpus");
  DSR_REQUIRE(min_ph >= 1 && max_ph >= min_ph, "bad phoneme length range");
  DSR_REQUIRE(train_frac > 0 && dev_frac >= 0 && train_frac + dev_frac < 1.0,
              "bad split fractions");

  std::vector<double> levels, shares;
  parse_severity_grid(config.get_string("corpus.severities", ""), &levels, &shares);

  auto speakers = make_speakers(num_speakers);
  const auto& inv = default_inventory();

  // Per-severity utterance counts (largest share absorbs rounding).
  std::vector<int> counts(levels.size());
  int assigned = 0;
  size_t largest = 0;
  for (size_t i = 0; i < levels.size(); ++i) {
    counts[i] = static_cast<int>(round_half_up(shares[i] * num_utts));
    assigned += counts[i];
    if (shares[i] > shares[largest]) largest = i;
  }
  counts[largest] += num_utts - assigned;
  DSR_REQUIRE(counts[largest] > 0, "severity grid rounding left no utterances");

  Rng master(seed);
  std::set<std::string> used_transcripts;
  auto draw_transcript = [&]() {
    for (int tries = 0; tries < 1000; ++tries) {
      int len = master.uniform_int(min_ph, max_ph);
      std::vector<std::string> ph;
      for (int i = 0; i < len; ++i) ph.push_back(inv.symbols[master.uniform_int(0, inv.size() - 1)]);
      std::string key = join_strings(ph, " ");
      if (used_transcripts.insert(key).second) return ph;
    }
    throw Error("could not draw a fresh transcript after 1000 tries");
  };

  std::filesystem::create_directories(std::filesystem::path(dir) / "audio");
  std::filesystem::create_directories(std::filesystem::path(dir) / "align");

  Manifest all;
  all.dir = dir;
  int index = 0;
  for (size_t sev_i = 0; sev_i < levels.size(); ++sev_i) {
    for (int c = 0; c < counts[sev_i]; ++c, ++index) {
      const SpeakerProfile& spk = speakers[index % num_speakers];
      const double severity = levels[sev_i];
      char id[64];
      std::snprintf(id, sizeof(id), "u%04d_%s_s%02d", index, spk.speaker_id.c_str(),
                    static_cast<int>(round_half_up(severity * 100)));
      auto transcript = draw_transcript();
      Utterance u = generate_utterance(transcript, spk, derive_seed(seed, id));
      if (severity > 0.0)
        u = perturb_dysarthric(u, severity, derive_seed(seed, std::string(id) + "_perturb"));
      u.id = id;
      std::string rel = "audio/" + std::string(id) + ".wav";
      write_wav(dir + "/" + rel, u.waveform, kSampleRate);
      write_alignment(alignment_path(dir, id), u);
      all.rows.push_back({u.id, rel, transcript, spk.speaker_id, severity});
    }
  }

  // Stratified split by (speaker, severity). Transcripts are globally unique,
  // so test transcripts are disjoint from train by construction.
  std::map<std::pair<std::string, double>, std::vector<int>> cells;
  for (size_t i = 0; i < all.rows.size(); ++i)
    cells[{all.rows[i].speaker_id, all.rows[i].severity}].push_back(static_cast<int>(i));

  Manifest train, dev, test;
  train.dir = dev.dir = test.dir = dir;
  for (auto& [key, rows] : cells) {
    Rng cell_rng(derive_seed(seed, "split_" + key.first + "_" + std::to_string(key.second)));
    cell_rng.shuffle(&rows);
    const int n = static_cast<int>(rows.size());
    const int n_train = static_cast<int>(round_half_up(train_frac * n));
    const int n_dev = static_cast<int>(round_half_up(dev_frac * n));
    for (int i = 0; i < n; ++i) {
      const ManifestRow& r = all.rows[rows[i]];
      (i < n_train ? train : i < n_train + n_dev ? dev : test).rows.push_back(r);
    }
  }
  auto by_id = [](const ManifestRow& a, const ManifestRow& b) { return a.id < b.id; };
  std::sort(train.rows.begin(), train.rows.end(), by_id);
  std::sort(dev.rows.begin(), dev.rows.end(), by_id);
  std::sort(test.rows.begin(), test.rows.end(), by_id);

  std::string all_path = dir + "/manifest_all.tsv";
  write_manifest(all_path, all);
  write_manifest(dir + "/manifest_train.tsv", train);
  write_manifest(dir + "/manifest_dev.tsv", dev);
  write_manifest(dir + "/manifest_test.tsv", test);
  return all_path;
}

}  // namespace dsr

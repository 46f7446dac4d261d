// dsr/synthcorpus.h

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

#ifndef DSR_SYNTHCORPUS_H_
#define DSR_SYNTHCORPUS_H_

#include <string>
#include <vector>

#include "dsr/config.h"
#include "dsr/dsp.h"
#include "dsr/manifest.h"

namespace dsr {

// Label space targeted by the CTC head: 12 pseudo-phonemes plus one blank
// appended at index size().
struct PhonemeInventory {
  std::vector<std::string> symbols;

  int size() const { return static_cast<int>(symbols.size()); }
  int blank_index() const { return size(); }
  int num_classes() const { return size() + 1; }

  // Index of a symbol; throws naming the offending symbol if unknown.
  int index_of(const std::string& symbol) const;
  std::vector<int> encode(const std::vector<std::string>& phonemes) const;
};

// 9 voiced vowel/sonorant-like symbols + 3 fricative-like noise symbols.
const PhonemeInventory& default_inventory();

// Per-phoneme acoustic template: three formant-like band centers and a
// voicing flag. Voiced symbols are rendered as harmonic-modulated sinusoid
// stacks, unvoiced ones as band-limited sinusoid noise.
struct PhonemeAcoustics {
  double formants[3];
  bool voiced;
};
const PhonemeAcoustics& phoneme_acoustics(int phoneme_index);

struct SpeakerProfile {
  std::string speaker_id;
  double base_f0 = 0.0;              // Hz
  double formant_offsets[3] = {0, 0, 0};  // Hz shifts applied to every phoneme
  uint64_t timbre_seed = 0;  // fully determines per-phoneme spectral signature

  // Deterministic per-(phoneme, formant) amplitude, derived from timbre_seed.
  double formant_amp(int phoneme_index, int formant) const;
};

// First `count` entries of a fixed speaker table (count <= 8). Pitch ranges
// and formant shifts are spread so speakers are separable in band space.
std::vector<SpeakerProfile> make_speakers(int count);

struct Utterance {
  std::string id;
  Waveform waveform;                  // 16 kHz mono in [-1, 1]
  std::vector<std::string> phonemes;  // reference transcript (never perturbed)
  std::vector<int> durations;         // frames per phoneme, 10 ms hop
  std::vector<double> pitch_hz;       // per frame; 0 on unvoiced frames
  std::vector<uint8_t> voiced;        // per frame mask
  SpeakerProfile speaker;
  double severity = 0.0;

  int total_frames() const;
};

// Renders one clean utterance. Deterministic in (phonemes, speaker, seed);
// waveform length is exactly sum(durations) * hop samples.
Utterance generate_utterance(const std::vector<std::string>& phonemes,
                             const SpeakerProfile& speaker, uint64_t seed);

// Dysarthric-style corruption: per-phoneme articulatory blending toward a
// speaker-consistent confusion target (probability 0.3*severity), random
// time-stretch in [1, 1+severity], pitch flattening toward base f0, formant
// jitter, and additive noise from 30 dB down to 10 dB SNR. The transcript and
// speaker parameters are preserved; severity 0 returns the input unchanged.
Utterance perturb_dysarthric(const Utterance& u, double severity, uint64_t seed);

// Ground-truth alignment sidecar stored per utterance next to the audio.
struct AlignInfo {
  std::vector<int> durations;
  std::vector<double> pitch_hz;
  std::vector<uint8_t> voiced;
};
void write_alignment(const std::string& path, const Utterance& u);
AlignInfo read_alignment(const std::string& path);
std::string alignment_path(const std::string& corpus_dir, const std::string& utt_id);

// Builds the full corpus under `dir`: audio/, align/, manifest_all.tsv and
// train/dev/test manifests (stratified by speaker and severity; transcripts
// are globally unique so test transcripts never occur in train).
// Returns the path of manifest_all.tsv.
std::string build_corpus(const Config& config, const std::string& dir);

// Severity grid "level:share,level:share,..." -> parallel vectors.
void parse_severity_grid(const std::string& text, std::vector<double>* levels,
                         std::vector<double>* shares);

}  // namespace dsr

#endif  // DSR_SYNTHCORPUS_H_

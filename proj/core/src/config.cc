// dsr/config.cc

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

#include "dsr/config.h"

#include <array>
#include <cstdlib>

namespace dsr {

namespace {

struct KeyInfo {
  const char* key;
  const char* def;
};

// Single source of truth for documented keys and their defaults. The
// resolved-config snapshot written next to every run materializes all of
// these, so snapshot + seed fully determine the artifacts.
constexpr std::array<KeyInfo, 59> kKeyTable = {{
    {"seed", "1234"},
    {"out.dir", ""},

    {"corpus.speakers", "4"},
    {"corpus.utts", "600"},
    {"corpus.severities", "0:0.4,0.3:0.2,0.7:0.4"},
    {"corpus.min_phonemes", "3"},
    {"corpus.max_phonemes", "10"},
    {"corpus.train_frac", "0.6"},
    {"corpus.dev_frac", "0.1"},
    {"corpus.dir", ""},

    {"features.backend", "mockfbank"},

    {"content.channels", "128"},
    {"content.kernel", "5"},
    {"content.layers", "3"},
    {"content.base_steps", "700"},
    {"content.finetune_steps", "200"},
    {"content.batch", "8"},
    {"content.lr", "1e-3"},
    {"content.finetune_lr", "5e-4"},
    {"content.eval_every", "100"},

    {"sv.steps", "600"},
    {"sv.lr", "2e-3"},
    {"sv.utts_per_speaker", "8"},
    {"sv.dim", "64"},

    {"codec.bands", "64"},
    {"codec.stages", "4"},
    {"codec.codebook", "256"},
    {"codec.kmeans_iters", "10"},
    {"codec.max_frames", "24000"},

    {"speaker.window", "8"},
    {"speaker.set_size", "4096"},
    {"speaker.embedder", "trained"},
    {"speaker.enhancer", "specgate"},
    {"speaker.prompt_max_frames", "96"},

    {"prompt.blocks", "2"},
    {"prompt.heads", "4"},

    {"model.hidden", "128"},

    {"variance.kernel", "3"},
    {"variance.heads", "4"},
    {"variance.pitch_bins", "64"},

    {"diffusion.blocks", "6"},
    {"diffusion.dilation_cycle", "3"},
    {"diffusion.heads", "4"},
    {"diffusion.beta_min", "0.1"},
    {"diffusion.beta_max", "20"},
    {"diffusion.t_min", "1e-3"},
    {"diffusion.sample_steps", "100"},
    {"diffusion.temperature", "1"},

    {"generator.steps", "700"},
    {"generator.batch", "4"},
    {"generator.lr", "1e-3"},
    {"generator.crop_frames", "64"},
    {"generator.dur_loss_weight", "0.1"},
    {"generator.pitch_loss_weight", "2e-4"},
    {"generator.voice_loss_weight", "0.02"},

    {"eval.severity", "0.7"},
    {"eval.max_utts_per_speaker", "13"},
    {"eval.systems", "input,full,no_normalizer"},
    {"eval.sample_steps", "0"},
}};

const KeyInfo* find_key(const std::string& key) {
  for (const auto& k : kKeyTable)
    if (key == k.key) return &k;
  return nullptr;
}

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> s;
    for (const auto& k : kKeyTable) s.insert(k.key);
    return s;
  }();
  return keys;
}

Config Config::from_file(const std::string& path) {
  return from_string(read_text_file(path));
}

Config Config::from_string(const std::string& text) {
  Config c;
  int lineno = 0;
  for (const auto& raw : split_string(text, '\n')) {
    ++lineno;
    std::string line = strip(raw);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    DSR_REQUIRE(eq != std::string::npos, "config line " << lineno << ": expected key=value, got '"
                                                        << line << "'");
    c.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  c.validate_keys(known_config_keys());
  return c;
}

void Config::apply_override(const std::string& assignment) {
  auto eq = assignment.find('=');
  DSR_REQUIRE(eq != std::string::npos && eq > 0,
              "override must be key=value, got '" << assignment << "'");
  std::string key = strip(assignment.substr(0, eq));
  DSR_REQUIRE(known_config_keys().count(key), "unknown config key '" << key << "'");
  set(key, strip(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string Config::get_string(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const KeyInfo* info = find_key(key);
  if (info) return info->def;
  return def;
}

int Config::get_int(const std::string& key, int def) const {
  std::string s = get_string(key, "");
  if (s.empty()) return def;
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  DSR_REQUIRE(end && *end == '\0', "config key " << key << ": '" << s << "' is not an integer");
  return static_cast<int>(v);
}

double Config::get_double(const std::string& key, double def) const {
  std::string s = get_string(key, "");
  if (s.empty()) return def;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  DSR_REQUIRE(end && *end == '\0', "config key " << key << ": '" << s << "' is not a number");
  return v;
}

uint64_t Config::get_u64(const std::string& key, uint64_t def) const {
  std::string s = get_string(key, "");
  if (s.empty()) return def;
  char* end = nullptr;
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  DSR_REQUIRE(end && *end == '\0', "config key " << key << ": '" << s << "' is not an integer");
  return v;
}

bool Config::get_bool(const std::string& key, bool def) const {
  std::string s = get_string(key, "");
  if (s.empty()) return def;
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  throw Error("config key " + key + ": '" + s + "' is not a boolean");
}

std::string Config::get_string(const std::string& key) const {
  DSR_REQUIRE(find_key(key) != nullptr, "undocumented config key: " << key);
  return get_string(key, "");
}

int Config::get_int(const std::string& key) const {
  DSR_REQUIRE(find_key(key) != nullptr, "undocumented config key: " << key);
  return get_int(key, 0);
}

double Config::get_double(const std::string& key) const {
  DSR_REQUIRE(find_key(key) != nullptr, "undocumented config key: " << key);
  return get_double(key, 0.0);
}

uint64_t Config::get_u64(const std::string& key) const {
  DSR_REQUIRE(find_key(key) != nullptr, "undocumented config key: " << key);
  return get_u64(key, 0);
}

void Config::validate_keys(const std::set<std::string>& known) const {
  std::vector<std::string> bad;
  for (const auto& [k, _] : values_)
    if (!known.count(k)) bad.push_back(k);
  DSR_REQUIRE(bad.empty(), "unknown config key(s): " << join_strings(bad, ", "));
}

std::string Config::canonical_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << "=" << v << "\n";
  return os.str();
}

Config Config::resolved() const {
  Config out = *this;
  for (const auto& k : kKeyTable)
    if (!out.has(k.key)) out.set(k.key, k.def);
  return out;
}

Config Config::subset(const std::vector<std::string>& prefixes) const {
  Config out;
  auto matches = [&](const std::string& key) {
    for (const auto& p : prefixes)
      if (key == p || key.rfind(p + ".", 0) == 0) return true;
    return false;
  };
  for (const auto& [k, v] : values_)
    if (matches(k)) out.set(k, v);
  return out;
}

}  // namespace dsr

// dsr/config.h

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

#ifndef DSR_CONFIG_H_
#define DSR_CONFIG_H_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dsr/common.h"

namespace dsr {

// Flat experiment configuration: "key=value" lines with dotted keys
// (e.g. diffusion.sample_steps=100), '#' comments, later assignments and
// command-line overrides winning. Keys are validated against the documented
// key set so typos fail loudly instead of silently using defaults.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  // "key=value"; rejects malformed strings.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& def) const;
  int get_int(const std::string& key, int def) const;
  double get_double(const std::string& key, double def) const;
  uint64_t get_u64(const std::string& key, uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;

  // Documented-key forms: explicit value, else the key table's default;
  // throws for keys absent from the table.
  std::string get_string(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;

  // Throws listing every key not in `known`.
  void validate_keys(const std::set<std::string>& known) const;

  // Canonical text form of the explicitly set keys: sorted, one per line.
  std::string canonical_text() const;
  uint64_t hash() const { return fnv1a64(canonical_text()); }

  // Copy with every documented key materialized at its effective value.
  // Runs snapshot this form beside their outputs so snapshot + seed fully
  // determine the artifacts even if compiled-in defaults later change.
  Config resolved() const;

  // Subset whose keys match one of the given dotted prefixes ("corpus",
  // "content", ...); stage checkpoints hash only the keys they depend on.
  Config subset(const std::vector<std::string>& prefixes) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Every documented configuration key (see README for semantics).
const std::set<std::string>& known_config_keys();

}  // namespace dsr

#endif  // DSR_CONFIG_H_

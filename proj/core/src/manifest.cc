// dsr/manifest.cc

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

#include "dsr/manifest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>

namespace dsr {

Manifest Manifest::filter_severity(double severity, double tol) const {
  Manifest out;
  out.dir = dir;
  for (const auto& r : rows)
    if (std::abs(r.severity - severity) <= tol) out.rows.push_back(r);
  return out;
}

Manifest Manifest::filter_speaker(const std::string& speaker_id) const {
  Manifest out;
  out.dir = dir;
  for (const auto& r : rows)
    if (r.speaker_id == speaker_id) out.rows.push_back(r);
  return out;
}

void write_manifest(const std::string& path, const Manifest& m) {
  std::ostringstream os;
  for (const auto& r : m.rows) {
    DSR_REQUIRE(!r.id.empty() && !r.phonemes.empty(), "manifest row missing id or phonemes");
    os << r.id << '\t' << r.audio_path << '\t' << join_strings(r.phonemes, " ") << '\t'
       << r.speaker_id << '\t' << r.severity << '\n';
  }
  write_text_file(path, os.str());
}

Manifest read_manifest(const std::string& path) {
  Manifest m;
  m.dir = std::filesystem::path(path).parent_path().string();
  if (m.dir.empty()) m.dir = ".";
  int lineno = 0;
  for (const auto& line : split_string(read_text_file(path), '\n')) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_string(line, '\t');
    DSR_REQUIRE(fields.size() == 5,
                path << ":" << lineno << ": expected 5 tab-separated fields, got "
                     << fields.size());
    ManifestRow r;
    r.id = fields[0];
    r.audio_path = fields[1];
    for (const auto& p : split_string(fields[2], ' '))
      if (!p.empty()) r.phonemes.push_back(p);
    r.speaker_id = fields[3];
    char* end = nullptr;
    r.severity = std::strtod(fields[4].c_str(), &end);
    DSR_REQUIRE(end && *end == '\0' && r.severity >= 0.0 && r.severity <= 1.0,
                path << ":" << lineno << ": bad severity '" << fields[4] << "'");
    DSR_REQUIRE(!r.phonemes.empty(), path << ":" << lineno << ": empty phoneme sequence");
    m.rows.push_back(std::move(r));
  }
  return m;
}

}  // namespace dsr

// dsr/manifest.h

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

#ifndef DSR_MANIFEST_H_
#define DSR_MANIFEST_H_

#include <string>
#include <vector>

#include "dsr/common.h"

namespace dsr {

// One corpus record. The audio path is relative to the manifest's directory.
struct ManifestRow {
  std::string id;
  std::string audio_path;
  std::vector<std::string> phonemes;
  std::string speaker_id;
  double severity = 0.0;
};

struct Manifest {
  std::vector<ManifestRow> rows;
  std::string dir;  // directory the manifest was loaded from (for audio paths)

  std::string audio_file(const ManifestRow& row) const { return dir + "/" + row.audio_path; }

  Manifest filter_severity(double severity, double tol = 1e-9) const;
  Manifest filter_speaker(const std::string& speaker_id) const;
};

// Tab-separated records: id, relative audio path, space-separated phoneme
// symbols, speaker_id, severity. UTF-8, one record per line.
void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

}  // namespace dsr

#endif  // DSR_MANIFEST_H_

// dsr/serialize.h

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

#ifndef DSR_SERIALIZE_H_
#define DSR_SERIALIZE_H_

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dsr/common.h"
#include "dsr/mat.h"

namespace dsr {

// Little-endian binary checkpoint writer. Every file starts with a 4-byte
// magic and a version byte so formats can evolve.
class BinaryWriter {
 public:
  BinaryWriter(const std::string& path, const char magic[4], uint8_t version);
  ~BinaryWriter();

  void put_u8(uint8_t v);
  void put_i32(int32_t v);
  void put_u64(uint64_t v);
  void put_f64(double v);
  void put_string(const std::string& s);
  void put_doubles(const double* p, size_t n);
  void put_vector(const std::vector<double>& v);
  void put_mat(const Mat& m);
  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
 public:
  // Checks magic and that the file's version equals expected_version.
  BinaryReader(const std::string& path, const char magic[4], uint8_t expected_version);

  uint8_t get_u8();
  int32_t get_i32();
  uint64_t get_u64();
  double get_f64();
  std::string get_string();
  void get_doubles(double* p, size_t n);
  std::vector<double> get_vector();
  Mat get_mat();

 private:
  std::ifstream in_;
  std::string path_;
};

// Plain "key=value" metadata records used beside parameter blobs.
void write_kv_file(const std::string& path, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_kv_file(const std::string& path);

}  // namespace dsr

#endif  // DSR_SERIALIZE_H_

// dsr/serialize.cc

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

#include "dsr/serialize.h"

#include <cstring>
#include <filesystem>

namespace dsr {

namespace {
template <typename T>
void write_raw(std::ofstream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
  char buf[sizeof(T)];
  in.read(buf, sizeof(T));
  DSR_REQUIRE(in.good(), "truncated checkpoint file " << path);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace

BinaryWriter::BinaryWriter(const std::string& path, const char magic[4], uint8_t version)
    : path_(path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  DSR_REQUIRE(out_.good(), "cannot open " << path << " for writing");
  out_.write(magic, 4);
  put_u8(version);
}

BinaryWriter::~BinaryWriter() {
  if (out_.is_open()) out_.close();
}

void BinaryWriter::put_u8(uint8_t v) { write_raw(out_, v); }
void BinaryWriter::put_i32(int32_t v) { write_raw(out_, v); }
void BinaryWriter::put_u64(uint64_t v) { write_raw(out_, v); }
void BinaryWriter::put_f64(double v) { write_raw(out_, v); }

void BinaryWriter::put_string(const std::string& s) {
  put_u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::put_doubles(const double* p, size_t n) {
  put_u64(n);
  out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void BinaryWriter::put_vector(const std::vector<double>& v) { put_doubles(v.data(), v.size()); }

void BinaryWriter::put_mat(const Mat& m) {
  put_i32(m.rows);
  put_i32(m.cols);
  out_.write(reinterpret_cast<const char*>(m.data.data()),
             static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

void BinaryWriter::close() {
  out_.flush();
  DSR_REQUIRE(out_.good(), "write failed for " << path_);
  out_.close();
}

BinaryReader::BinaryReader(const std::string& path, const char magic[4],
                           uint8_t expected_version)
    : path_(path) {
  in_.open(path, std::ios::binary);
  DSR_REQUIRE(in_.good(), "cannot open checkpoint " << path);
  char got[4];
  in_.read(got, 4);
  DSR_REQUIRE(in_.good() && std::memcmp(got, magic, 4) == 0,
              path << ": wrong file magic, expected '" << std::string(magic, 4) << "'");
  uint8_t ver = get_u8();
  DSR_REQUIRE(ver == expected_version,
              path << ": unsupported format version " << int(ver) << ", expected "
                   << int(expected_version));
}

uint8_t BinaryReader::get_u8() { return read_raw<uint8_t>(in_, path_); }
int32_t BinaryReader::get_i32() { return read_raw<int32_t>(in_, path_); }
uint64_t BinaryReader::get_u64() { return read_raw<uint64_t>(in_, path_); }
double BinaryReader::get_f64() { return read_raw<double>(in_, path_); }

std::string BinaryReader::get_string() {
  size_t n = get_u64();
  std::string s(n, '\0');
  in_.read(s.data(), static_cast<std::streamsize>(n));
  DSR_REQUIRE(in_.good(), "truncated checkpoint file " << path_);
  return s;
}

void BinaryReader::get_doubles(double* p, size_t n) {
  size_t stored = get_u64();
  DSR_REQUIRE(stored == n, path_ << ": array length " << stored << ", expected " << n);
  in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  DSR_REQUIRE(in_.good(), "truncated checkpoint file " << path_);
}

std::vector<double> BinaryReader::get_vector() {
  size_t n = get_u64();
  std::vector<double> v(n);
  in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  DSR_REQUIRE(in_.good(), "truncated checkpoint file " << path_);
  return v;
}

Mat BinaryReader::get_mat() {
  int r = get_i32();
  int c = get_i32();
  DSR_REQUIRE(r >= 0 && c >= 0, path_ << ": bad matrix dims " << r << "x" << c);
  Mat m(r, c);
  in_.read(reinterpret_cast<char*>(m.data.data()),
           static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  DSR_REQUIRE(in_.good(), "truncated checkpoint file " << path_);
  return m;
}

void write_kv_file(const std::string& path, const std::map<std::string, std::string>& kv) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  write_text_file(path, os.str());
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::map<std::string, std::string> kv;
  for (const auto& line : split_string(read_text_file(path), '\n')) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    DSR_REQUIRE(eq != std::string::npos, path << ": bad metadata line '" << line << "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace dsr

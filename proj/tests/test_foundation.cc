// dsr/test_foundation.cc

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

#include <cstdio>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "dsr/config.h"
#include "dsr/dsp.h"
#include "dsr/mat.h"
#include "dsr/serialize.h"
#include "dsr/wav.h"

using namespace dsr;

namespace {
std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("rng is deterministic and well distributed") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(7);
  double sum = 0.0, sumsq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(sumsq / n == doctest::Approx(1.0 / 3.0).epsilon(0.03));

  double nsum = 0.0, nsumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = r.normal();
    nsum += g;
    nsumsq += g * g;
  }
  CHECK(std::abs(nsum / n) < 0.03);
  CHECK(nsumsq / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("rng shuffle is a permutation and uniform_int covers its range") {
  Rng r(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(&v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);

  bool lo_seen = false, hi_seen = false;
  for (int i = 0; i < 1000; ++i) {
    int x = r.uniform_int(2, 5);
    CHECK(x >= 2);
    CHECK(x <= 5);
    lo_seen |= (x == 2);
    hi_seen |= (x == 5);
  }
  CHECK(lo_seen);
  CHECK(hi_seen);
}

TEST_CASE("log_add matches direct computation and handles log-zero") {
  CHECK(log_add(std::log(0.25), std::log(0.5)) == doctest::Approx(std::log(0.75)).epsilon(1e-12));
  CHECK(log_add(kLogZero, std::log(0.3)) == doctest::Approx(std::log(0.3)));
  CHECK(log_add(std::log(0.3), kLogZero) == doctest::Approx(std::log(0.3)));
  CHECK(log_add(kLogZero, kLogZero) == kLogZero);
  CHECK(log_add(std::log(0.1), std::log(0.2), std::log(0.3)) ==
        doctest::Approx(std::log(0.6)).epsilon(1e-12));
  // Stability: both operands very negative.
  CHECK(log_add(-1000.0, -1000.0) == doctest::Approx(-1000.0 + std::log(2.0)));
}

TEST_CASE("round_half_up follows the documented rule") {
  CHECK(round_half_up(0.5) == 1);
  CHECK(round_half_up(1.5) == 2);
  CHECK(round_half_up(2.5) == 3);
  CHECK(round_half_up(-0.5) == 0);
  CHECK(round_half_up(2.49) == 2);
  CHECK(round_half_up(2.51) == 3);
  CHECK(round_half_up(0.0) == 0);
}

TEST_CASE("derive_seed separates streams by tag and is reproducible") {
  CHECK(derive_seed(1234, "utt_0001") == derive_seed(1234, "utt_0001"));
  CHECK(derive_seed(1234, "utt_0001") != derive_seed(1234, "utt_0002"));
  CHECK(derive_seed(1234, "utt_0001") != derive_seed(1235, "utt_0001"));
}

TEST_CASE("fft matches a naive DFT and round-trips") {
  Rng r(11);
  const int n = 64;
  std::vector<std::complex<double>> x(n);
  for (auto& v : x) v = {r.normal(), r.normal()};

  // Naive DFT reference.
  std::vector<std::complex<double>> ref(n);
  const double two_pi = 6.283185307179586476925286766559;
  for (int k = 0; k < n; ++k) {
    std::complex<double> s = 0.0;
    for (int t = 0; t < n; ++t) {
      double ang = -two_pi * k * t / n;
      s += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    ref[k] = s;
  }

  auto y = x;
  fft_inplace(&y);
  for (int k = 0; k < n; ++k) CHECK(std::abs(y[k] - ref[k]) < 1e-9);

  fft_inplace(&y, /*inverse=*/true);
  for (int k = 0; k < n; ++k) CHECK(std::abs(y[k] - x[k]) < 1e-10);
}

TEST_CASE("stft round-trip reconstructs the interior exactly") {
  Rng r(5);
  Waveform x(4000);
  for (auto& v : x) v = r.normal();
  Stft stft(320, 160, 512);
  auto spec = stft.analyze(x);
  Waveform y = stft.synthesize(spec, x.size());
  REQUIRE(y.size() == x.size());
  for (size_t i = 320; i + 320 < x.size(); ++i)
    CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-9));
}

TEST_CASE("snr_db reports the documented cap on exact match") {
  Waveform x = {0.1, -0.2, 0.3};
  CHECK(snr_db(x, x) == doctest::Approx(300.0));
  Waveform y = {0.1, -0.2, 0.4};
  CHECK(snr_db(x, y) < 300.0);
  CHECK(snr_db(x, y) > 0.0);
}

TEST_CASE("centered framing covers the signal with len/hop frames") {
  CHECK(num_frames(1600, 160) == 10);
  CHECK(num_frames(1599, 160) == 9);
  CHECK(num_frames(10, 160) == 1);

  Waveform x(480);
  std::iota(x.begin(), x.end(), 0.0);
  std::vector<double> frame(320);
  // Frame 0 centered at 80: window [80-160, 80+160) -> left zero padding.
  extract_centered_frame(x, 0, 160, 320, frame.data());
  CHECK(frame[0] == 0.0);
  CHECK(frame[79] == 0.0);
  CHECK(frame[80] == 0.0);
  CHECK(frame[160] == 80.0);
  // Frame 1 centered at 240: fully inside.
  extract_centered_frame(x, 1, 160, 320, frame.data());
  CHECK(frame[0] == 80.0);
  CHECK(frame[319] == 399.0);
}

TEST_CASE("wav write/read round-trips within quantization error") {
  Rng r(9);
  Waveform x(1234);
  for (auto& v : x) v = 0.9 * std::sin(0.01 * static_cast<double>(&v - x.data()));
  for (auto& v : x) v += 0.05 * r.normal();
  for (auto& v : x) v = std::max(-1.0, std::min(1.0, v));

  std::string path = temp_path("dsr_test_roundtrip.wav");
  write_wav(path, x, 16000);
  int sr = 0;
  Waveform y = read_wav(path, &sr);
  CHECK(sr == 16000);
  REQUIRE(y.size() == x.size());
  for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) <= 0.5 / 32767.0 + 1e-12);
  std::remove(path.c_str());
}

TEST_CASE("binary serialization round-trips and rejects bad magic") {
  std::string path = temp_path("dsr_test_blob.bin");
  Mat m(3, 4);
  Rng r(1);
  for (auto& v : m.data) v = r.normal();
  {
    BinaryWriter w(path, "TST0", 1);
    w.put_i32(-17);
    w.put_u64(0xdeadbeefcafe1234ull);
    w.put_f64(3.25);
    w.put_string("hello world");
    w.put_vector({1.0, 2.0, 3.0});
    w.put_mat(m);
  }
  {
    BinaryReader b(path, "TST0", 1);
    CHECK(b.get_i32() == -17);
    CHECK(b.get_u64() == 0xdeadbeefcafe1234ull);
    CHECK(b.get_f64() == 3.25);
    CHECK(b.get_string() == "hello world");
    auto v = b.get_vector();
    REQUIRE(v.size() == 3);
    CHECK(v[1] == 2.0);
    Mat m2 = b.get_mat();
    REQUIRE(m2.rows == 3);
    REQUIRE(m2.cols == 4);
    for (size_t i = 0; i < m.size(); ++i) CHECK(m2.data[i] == m.data[i]);
  }
  CHECK_THROWS_AS(BinaryReader(path, "XXX0", 1), Error);
  CHECK_THROWS_AS(BinaryReader(path, "TST0", 2), Error);
  std::remove(path.c_str());
}

TEST_CASE("kv files round-trip") {
  std::string path = temp_path("dsr_test_meta.txt");
  std::map<std::string, std::string> kv = {{"alpha", "1"}, {"beta", "two words"}};
  write_kv_file(path, kv);
  auto back = read_kv_file(path);
  CHECK(back == kv);
  std::remove(path.c_str());
}

TEST_CASE("config parses, validates, overrides and hashes") {
  Config c = Config::from_string(
      "# comment\n"
      "diffusion.sample_steps = 50\n"
      "eval.severity=0.7\n");
  CHECK(c.get_int("diffusion.sample_steps", 0) == 50);
  CHECK(c.get_double("eval.severity", 0.0) == 0.7);
  // Defaults come from the documented key table.
  CHECK(c.get_int("codec.stages", 0) == 4);
  CHECK(c.get_double("diffusion.beta_min", 0.0) == 0.1);
  CHECK(c.get_string("features.backend", "") == "mockfbank");

  CHECK_THROWS_AS(Config::from_string("diffusion.samplesteps=50\n"), Error);
  CHECK_THROWS_AS(c.apply_override("not_a_key=1"), Error);
  CHECK_THROWS_AS(c.apply_override("garbage"), Error);

  uint64_t h0 = c.hash();
  c.apply_override("diffusion.sample_steps=100");
  CHECK(c.get_int("diffusion.sample_steps", 0) == 100);
  CHECK(c.hash() != h0);

  Config sub = c.resolved().subset({"diffusion"});
  CHECK(sub.get_int("diffusion.sample_steps", 0) == 100);
  CHECK(sub.canonical_text().find("eval.") == std::string::npos);
  CHECK(sub.canonical_text().find("diffusion.beta_max=20\n") != std::string::npos);

  // Resolved canonical text is sorted and covers all documented keys.
  std::string text = c.resolved().canonical_text();
  CHECK(text.find("codec.bands=64\n") != std::string::npos);
  auto lines = split_string(text, '\n');
  for (size_t i = 1; i + 1 < lines.size(); ++i) CHECK(lines[i - 1] < lines[i]);
}

TEST_CASE("config rejects malformed numbers") {
  Config c;
  c.set("content.batch", "8x");
  CHECK_THROWS_AS(c.get_int("content.batch", 0), Error);
  c.set("content.lr", "fast");
  CHECK_THROWS_AS(c.get_double("content.lr", 0.0), Error);
}

TEST_CASE("gemm kernels agree with a naive reference, including strided blocks") {
  Rng r(21);
  const int m = 7, k = 5, n = 6;
  Mat A(m, k), B(k, n), Bt(n, k), C(m, n), ref(m, n);
  for (auto& v : A.data) v = r.normal();
  for (auto& v : B.data) v = r.normal();
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) Bt.at(j, i) = B.at(i, j);

  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += A.at(i, p) * B.at(p, j);
      ref.at(i, j) = s;
    }

  C.set_zero();
  gemm_nn_acc(m, k, n, A.data.data(), k, B.data.data(), n, C.data.data(), n);
  for (size_t i = 0; i < ref.size(); ++i) CHECK(C.data[i] == doctest::Approx(ref.data[i]));

  C.set_zero();
  gemm_nt_acc(m, k, n, A.data.data(), k, Bt.data.data(), k, C.data.data(), n);
  for (size_t i = 0; i < ref.size(); ++i) CHECK(C.data[i] == doctest::Approx(ref.data[i]));

  // A^T * C2 with A [m x k]: result [k x n2].
  Mat C2(m, n), AtC(k, n);
  for (auto& v : C2.data) v = r.normal();
  Mat ref2(k, n);
  for (int p = 0; p < k; ++p)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += A.at(i, p) * C2.at(i, j);
      ref2.at(p, j) = s;
    }
  gemm_tn_acc(m, k, n, A.data.data(), k, C2.data.data(), n, AtC.data.data(), n);
  for (size_t i = 0; i < ref2.size(); ++i) CHECK(AtC.data[i] == doctest::Approx(ref2.data[i]));

  // Strided: multiply the middle 2-column block of B only.
  Mat Cb(m, 2);
  gemm_nn_acc(m, k, 2, A.data.data(), k, B.data.data() + 2, n, Cb.data.data(), 2);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < 2; ++j) CHECK(Cb.at(i, j) == doctest::Approx(ref.at(i, j + 2)));
}

TEST_CASE("softmax rows are normalized and log-softmax is consistent") {
  Mat x(2, 4);
  Rng r(2);
  for (auto& v : x.data) v = 3.0 * r.normal();
  Mat lx = x;
  softmax_rows(&x);
  for (int i = 0; i < 2; ++i) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += x.at(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    log_softmax_row(lx.row(i), 4);
    for (int j = 0; j < 4; ++j)
      CHECK(std::exp(lx.at(i, j)) == doctest::Approx(x.at(i, j)).epsilon(1e-10));
  }
}

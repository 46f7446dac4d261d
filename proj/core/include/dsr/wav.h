// dsr/wav.h

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

#ifndef DSR_WAV_H_
#define DSR_WAV_H_

#include <string>

#include "dsr/dsp.h"

namespace dsr {

// 16-bit PCM mono WAV. Samples are doubles in [-1, 1]; values outside the
// range are clipped on write.
void write_wav(const std::string& path, const Waveform& x, int sample_rate);

// Rejects anything that is not 16-bit PCM mono.
Waveform read_wav(const std::string& path, int* sample_rate);

}  // namespace dsr

#endif  // DSR_WAV_H_

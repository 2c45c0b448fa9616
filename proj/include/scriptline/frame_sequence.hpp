// Copyright 2026 The scriptline Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "scriptline/binary_io.hpp"
#include "scriptline/error.hpp"

namespace scriptline {

/// Observation stream for the HMMs: one histogram per sliding window,
/// first frame = rightmost window.
struct FrameSequence {
  std::size_t dim = 0;
  std::vector<float> data;  // n_frames x dim, row-major

  // Provenance; not serialized.
  std::size_t frame_width = 0;
  std::size_t shift = 0;
  bool right_to_left = true;
  std::size_t source_image_width = 0;

  FrameSequence() = default;
  FrameSequence(std::size_t n_frames, std::size_t dim_) : dim(dim_), data(n_frames * dim_, 0.0f) {}

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  bool empty() const { return size() == 0; }

  std::span<const float> frame(std::size_t t) const { return {data.data() + t * dim, dim}; }
  std::span<float> frame(std::size_t t) { return {data.data() + t * dim, dim}; }

  bool same_frames(const FrameSequence& other) const { return dim == other.dim && data == other.data; }
};

/// Scales every non-zero frame to unit L1 mass; all-zero frames stay zero.
inline void normalize_frames_l1(FrameSequence& seq) {
  for (std::size_t t = 0; t < seq.size(); ++t) {
    auto f = seq.frame(t);
    double total = 0.0;
    for (float v : f) total += v;
    if (total <= 0.0) continue;
    for (float& v : f) v = static_cast<float>(v / total);
  }
}

// BOF1: "BOF1", u32 n_frames, u32 dim, f32 frames row-major; little-endian.
inline std::vector<char> encode_frames(const FrameSequence& seq) {
  io::Writer w;
  w.magic("BOF1");
  w.u32(seq.size());
  w.u32(seq.dim);
  for (float v : seq.data) w.put(v);
  return w.bytes();
}

inline FrameSequence decode_frames(std::vector<char> bytes, std::string source) {
  io::Reader r(std::move(bytes), std::move(source));
  r.expect_magic("BOF1");
  const std::size_t n = r.u32();
  const std::size_t dim = r.u32();
  if (dim == 0 && n != 0) throw FormatError(r.source() + ": zero frame dimension");
  r.need_elements(n * dim, sizeof(float));
  FrameSequence seq(n, dim);
  for (float& v : seq.data) v = r.f32();
  r.expect_end();
  return seq;
}

inline void save_frames(const std::filesystem::path& path, const FrameSequence& seq) {
  io::write_file_atomic(path, encode_frames(seq));
}

inline FrameSequence load_frames(const std::filesystem::path& path) {
  return decode_frames(io::read_file(path), path.string());
}

}  // namespace scriptline

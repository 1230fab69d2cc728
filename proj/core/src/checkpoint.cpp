// Copyright 2026 The TSBD Lab Authors. All Rights Reserved.
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

#include "tsbd/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "tsbd/binary_io.hpp"

namespace tsbd {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<std::uint8_t> encode_checkpoint(const Network& net) {
  ByteWriter w;
  w.magic("TSBD");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(net.depth()));
  for (const Layer& layer : net.layers()) {
    w.u32(static_cast<std::uint32_t>(layer.neurons()));
    w.u32(static_cast<std::uint32_t>(layer.fan_in()));
    w.u8(static_cast<std::uint8_t>(layer.activation));
    for (float v : layer.weights.values()) w.f32(v);
    for (float v : layer.biases) w.f32(v);
  }
  return w.take();
}

Network decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  r.expect_magic("TSBD");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t depth = r.u32();
  if (depth == 0) throw FormatError("checkpoint: zero layers");
  std::vector<Layer> layers;
  for (std::uint32_t l = 0; l < depth; ++l) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    const std::uint8_t tag = r.u8();
    if (tag > 1) throw FormatError("checkpoint: unknown activation tag " + std::to_string(tag));
    const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols + rows;
    r.require_available(count, 4);
    Layer layer;
    layer.activation = static_cast<Activation>(tag);
    std::vector<float> weights(static_cast<std::size_t>(rows) * cols);
    for (float& v : weights) v = r.f32();
    layer.weights = Tensor2D(rows, cols, std::move(weights));
    layer.biases.resize(rows);
    for (float& v : layer.biases) v = r.f32();
    for (float v : layer.weights.values()) {
      if (!std::isfinite(v)) throw FormatError("checkpoint: non-finite weight");
    }
    for (float v : layer.biases) {
      if (!std::isfinite(v)) throw FormatError("checkpoint: non-finite bias");
    }
    layers.push_back(std::move(layer));
  }
  r.expect_end();
  try {
    return Network(std::move(layers));
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(net));
}

Network load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace tsbd

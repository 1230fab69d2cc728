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

#ifndef TSBD_CHECKPOINT_HPP_
#define TSBD_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tsbd/network.hpp"

namespace tsbd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian, unpadded):
//   "TSBD" | u32 version | u32 layers |
//   per layer: u32 rows | u32 cols | u8 activation | rows*cols f32 | rows f32
std::vector<std::uint8_t> encode_checkpoint(const Network& net);
Network decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace tsbd

#endif  // TSBD_CHECKPOINT_HPP_

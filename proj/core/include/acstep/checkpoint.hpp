// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint layout (all integers and reals little-endian):
//
//   magic    8 bytes  "ACSTEPCK"
//   version  u32      kCheckpointVersion
//   count    u64      number of parameters
//   per parameter, in name order:
//     name   u32 byte length, then UTF-8 bytes
//     shape  u32 rank, then rank x u64 dimensions
//     data   product(shape) x f64
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "acstep/param_store.hpp"

namespace acstep {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ParamStore& store);
/// Gradient slots of the result are zero.
ParamStore decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace acstep

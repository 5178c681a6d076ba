// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>

namespace a1o {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary parameter file.
///
///     "A1OC"  u32 version  u32 count
///     count x { u16 path_len, path bytes (UTF-8), u8 rank,
///               rank x u32 extent, product(extents) x f32 value }
///
/// All integers and floats are little-endian. Values are narrowed to
/// 32-bit on write, so a round trip is exact only for float-representable
/// values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& file, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> load_checkpoint(const std::filesystem::path& file);

}  // namespace a1o

// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "simtrace/tensor/tensor.hpp"

namespace simtrace::nn {

// Named-tensor archive, little-endian:
//   "STNA" | u16 version | u16 reserved
//   u32 metadata count, then (string key, string value) pairs
//   u32 tensor count, then per tensor: string name | u32 rank | rank x u32 dims | f64 data
// Strings are u32 length + bytes. Tensors keep insertion order.
inline constexpr std::uint16_t kArchiveVersion = 1;

class ArchiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Archive {
    std::map<std::string, std::string> metadata;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const;
};

std::vector<std::uint8_t> serialize_archive(const Archive& a);
Archive deserialize_archive(std::span<const std::uint8_t> bytes);

void save_archive(const Archive& a, const std::filesystem::path& path);
Archive load_archive(const std::filesystem::path& path);

}  // namespace simtrace::nn

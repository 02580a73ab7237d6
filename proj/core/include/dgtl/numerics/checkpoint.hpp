#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgtl/numerics/tensor.hpp"

namespace dgtl::numerics {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// DGTL0001 tensor container, bit-exact:
//   magic "DGTL0001", then per record:
//     u32 LE name length, UTF-8 name, u32 LE rank, u32 LE dims,
//     raw little-endian 32-bit floats, row-major;
//   terminated by a record with name length 0.
std::string serialize_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// FNV-1a 64-bit content checksum.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t file_checksum(const std::filesystem::path& path);
std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace dgtl::numerics

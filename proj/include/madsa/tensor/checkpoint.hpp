#pragma once

#include "madsa/tensor/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace madsa {

// Binary layout, all integers little-endian:
//   "MDSA" | u32 version (=1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 rank | u32 dims[rank] |
//               f32 data, row-major
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const ParameterSet<double>& params);

// Copies every tensor of the set from the checkpoint. Names and shapes must
// match exactly; extra checkpoint entries are rejected too.
void load_parameters(ParameterSet<double>& params, const Checkpoint& ckpt);

}  // namespace madsa

#include "madsa/tensor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace madsa {
namespace {

constexpr char kMagic[4] = {'M', 'D', 'S', 'A'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw CheckpointError(std::string("truncated ") + what);
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

std::uint64_t element_count(const std::vector<std::uint32_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, Checkpoint::kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xFFFF) throw CheckpointError("tensor name too long: " + t.name.substr(0, 32));
    if (t.dims.size() > 0xFF) throw CheckpointError("tensor rank too large: " + t.name);
    if (element_count(t.dims) != t.data.size()) throw CheckpointError("dims disagree with data for " + t.name);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put_le<std::uint32_t>(out, d);
    for (float f : t.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw CheckpointError("write failed");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("bad magic, not a checkpoint");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != Checkpoint::kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(in, "tensor count");
  Checkpoint ckpt;
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto len = get_le<std::uint16_t>(in, "name length");
    t.name.resize(len);
    if (!in.read(t.name.data(), len)) throw CheckpointError("truncated name");
    const auto rank = get_le<std::uint8_t>(in, "rank");
    for (std::uint8_t r = 0; r < rank; ++r) t.dims.push_back(get_le<std::uint32_t>(in, "dims"));
    const auto n = element_count(t.dims);
    t.data.resize(n);
    for (std::uint64_t k = 0; k < n; ++k) t.data[k] = std::bit_cast<float>(get_le<std::uint32_t>(in, "tensor data"));
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(in);
}

Checkpoint to_checkpoint(const ParameterSet<double>& params) {
  Checkpoint ckpt;
  for (const auto& e : params.entries()) {
    NamedTensor t;
    t.name = e.name;
    for (Index d : e.tensor.shape()) t.dims.push_back(static_cast<std::uint32_t>(d));
    const auto& v = e.tensor.value();
    t.data.resize(static_cast<std::size_t>(v.size()));
    for (Index k = 0; k < v.size(); ++k) t.data[static_cast<std::size_t>(k)] = static_cast<float>(v.data()[k]);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void load_parameters(ParameterSet<double>& params, const Checkpoint& ckpt) {
  std::unordered_set<std::string> expected;
  for (auto& e : params.entries()) {
    expected.insert(e.name);
    const NamedTensor* t = ckpt.find(e.name);
    if (!t) throw CheckpointError("checkpoint is missing tensor " + e.name);
    Shape shape(t->dims.begin(), t->dims.end());
    if (shape != e.tensor.shape()) {
      throw CheckpointError("shape mismatch for " + e.name + ": checkpoint " + shape_string(shape) + ", model " +
                            shape_string(e.tensor.shape()));
    }
    auto& v = e.tensor.value();
    for (Index k = 0; k < v.size(); ++k) v.data()[k] = static_cast<double>(t->data[static_cast<std::size_t>(k)]);
  }
  for (const auto& t : ckpt.tensors) {
    if (!expected.count(t.name)) throw CheckpointError("unexpected tensor in checkpoint: " + t.name);
  }
}

}  // namespace madsa

#include "dgtl/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dgtl/errors.hpp"

namespace dgtl::numerics {

namespace {

constexpr std::string_view kMagic = "DGTL0001";

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  put_u32(out, bits);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) throw CheckpointError("truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + i]);
    }
    pos_ += 4;
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
  }

  std::string str(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw CheckpointError("truncated checkpoint");
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(std::span<const NamedTensor> tensors) {
  std::string out(kMagic);
  for (const NamedTensor& nt : tensors) {
    if (nt.name.empty()) throw CheckpointError("tensor name must be nonempty");
    put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out += nt.name;
    const Shape& shape = nt.tensor.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : nt.tensor.values()) put_f32(out, static_cast<float>(v));
  }
  put_u32(out, 0);
  return out;
}

std::vector<NamedTensor> parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError("bad checkpoint magic");
  }
  Reader r(bytes.substr(kMagic.size()));
  std::vector<NamedTensor> out;
  for (;;) {
    const std::uint32_t name_len = r.u32();
    if (name_len == 0) break;
    std::string name = r.str(name_len);
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<int>(r.u32());
      if (shape[i] <= 0) throw CheckpointError("non-positive dimension in checkpoint");
      n *= static_cast<std::size_t>(shape[i]);
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<double>(r.f32());
    out.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  if (r.pos() != r.size()) throw CheckpointError("trailing bytes after end marker");
  return out;
}

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const NamedTensor> tensors) {
  const std::string bytes = serialize_checkpoint(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file_bytes(path));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  return fnv1a64(read_file_bytes(path));
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace dgtl::numerics

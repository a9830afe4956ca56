// SPDX-License-Identifier: Apache-2.0
#include "acstep/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "acstep/errors.hpp"

namespace acstep {

namespace {

constexpr char kMagic[8] = {'A', 'C', 'S', 'T', 'E', 'P', 'C', 'K'};

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get_le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParamStore& store) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, store.count());
  for (const auto& [name, p] : store.entries()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put_le<std::uint64_t>(out, d);
    for (double x : p.value.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

ParamStore decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw IoError("not a checkpoint (bad magic)");
  }
  const auto version = r.get_le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get_le<std::uint64_t>();
  ParamStore store;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = r.get_le<std::uint32_t>();
    std::string name = r.get_bytes(name_len);
    const auto rank = r.get_le<std::uint32_t>();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get_le<std::uint64_t>());
    std::vector<double> data(shape_size(shape));
    for (double& x : data) x = std::bit_cast<double>(r.get_le<std::uint64_t>());
    store.add(name, DenseArray(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw IoError("trailing bytes after checkpoint payload");
  return store;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  const std::string bytes = encode_checkpoint(store);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace acstep

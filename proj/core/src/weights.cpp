#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pitchnet/error.hpp"
#include "pitchnet/model.hpp"
#include "pitchnet/random.hpp"

namespace pitchnet {

namespace {

constexpr std::array<char, 4> kWeightMagic = {'P', 'N', 'W', '1'};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  std::uint64_t offset() const { return pos_; }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated ") + what, pos_);
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8(const char* what) { return *take(1, what); }
  std::uint16_t u16(const char* what) {
    const auto* p = take(2, what);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    const auto* p = take(4, what);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_bytes(std::ostream& out, std::uint32_t v, int n) {
  for (int i = 0; i < n; ++i) {
    out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

std::string dims_string(std::span<const std::uint32_t> dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    s += (i ? ", " : "") + std::to_string(dims[i]);
  }
  return s + "]";
}

} // namespace

std::size_t WeightTensor::numel() const {
  std::size_t n = 1;
  for (auto d : dims) {
    n *= d;
  }
  return n;
}

void WeightStore::set(std::string name, WeightTensor tensor) {
  if (tensor.values.size() != tensor.numel()) {
    throw ShapeError("tensor '" + name + "' holds " + std::to_string(tensor.values.size()) +
                     " values for dims " + dims_string(tensor.dims));
  }
  tensors_[std::move(name)] = std::move(tensor);
}

const WeightTensor& WeightStore::get(const std::string& name,
                                     std::span<const std::uint32_t> expected) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw InvalidArgument("missing weight tensor '" + name + "'");
  }
  if (!std::equal(it->second.dims.begin(), it->second.dims.end(), expected.begin(),
                  expected.end())) {
    throw InvalidArgument("weight tensor '" + name + "' has dims " +
                          dims_string(it->second.dims) + ", expected " + dims_string(expected));
  }
  return it->second;
}

WeightStore random_weights(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore store;
  for (const auto& p : required_parameters(config)) {
    WeightTensor t;
    t.dims = p.dims;
    t.values.resize(t.numel());
    // Fan-in of the owning layer: product of all kernel dims but the first.
    std::size_t fan_in = 1;
    const std::string stem = p.name.substr(0, p.name.rfind('.'));
    const std::string weight_name = stem.ends_with(".bn") ? std::string() : stem + ".weight";
    if (!weight_name.empty()) {
      for (const auto& q : required_parameters(config)) {
        if (q.name == weight_name) {
          for (std::size_t i = 1; i < q.dims.size(); ++i) {
            fan_in *= q.dims[i];
          }
        }
      }
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (float& v : t.values) {
      if (p.name.ends_with(".bn.gamma")) {
        v = static_cast<float>(rng.uniform(0.9, 1.1));
      } else if (p.name.ends_with(".bn.beta") || p.name.ends_with(".bn.mean")) {
        v = static_cast<float>(rng.uniform(-0.1, 0.1));
      } else if (p.name.ends_with(".bn.var")) {
        v = static_cast<float>(rng.uniform(0.5, 1.5));
      } else {
        v = static_cast<float>(rng.uniform(-bound, bound));
      }
    }
    store.set(p.name, std::move(t));
  }
  return store;
}

void write_weights(const WeightStore& weights, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.write(kWeightMagic.data(), kWeightMagic.size());
  put_bytes(out, static_cast<std::uint32_t>(weights.tensors().size()), 4);
  for (const auto& [name, t] : weights.tensors()) {
    if (name.size() > 0xFFFF || t.dims.size() > 0xFF) {
      throw InvalidArgument("tensor '" + name + "' cannot be stored in PNW1");
    }
    put_bytes(out, static_cast<std::uint32_t>(name.size()), 2);
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_bytes(out, static_cast<std::uint32_t>(t.dims.size()), 1);
    for (auto d : t.dims) {
      put_bytes(out, d, 4);
    }
    for (float v : t.values) {
      put_bytes(out, std::bit_cast<std::uint32_t>(v), 4);
    }
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

WeightStore read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  ByteReader r(std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>()));
  const auto* magic = r.take(4, "magic");
  if (std::memcmp(magic, kWeightMagic.data(), 4) != 0) {
    throw FormatError("missing PNW1 magic", 0);
  }
  const std::uint32_t count = r.u32("tensor count");
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16("name length");
    const auto* name_bytes = r.take(len, "name");
    std::string name(name_bytes, name_bytes + len);
    const std::uint8_t ndim = r.u8("ndim");
    WeightTensor t;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      t.dims.push_back(r.u32("dims"));
    }
    const std::size_t n = t.numel();
    const std::uint64_t data_offset = r.offset();
    const auto* data = r.take(4 * n, "tensor data");
    t.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint32_t bits;
      std::memcpy(&bits, data + 4 * k, 4);
      // Stored little-endian; this build targets little-endian hosts only.
      static_assert(std::endian::native == std::endian::little);
      t.values[k] = std::bit_cast<float>(bits);
    }
    if (store.contains(name)) {
      throw FormatError("duplicate tensor '" + name + "'", data_offset);
    }
    store.set(std::move(name), std::move(t));
  }
  if (!r.done()) {
    throw FormatError("trailing bytes after last tensor", r.offset());
  }
  return store;
}

} // namespace pitchnet

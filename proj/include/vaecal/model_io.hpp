#pragma once

// Model file layout (all integers and floats little-endian):
//
//   magic        8 bytes  "VAECALM\0"
//   version      u32      kModelFormatVersion
//   topology     5 x u32  input, encoder, latent, decoder hidden, output widths
//   seed         u64
//   target       str      (u32 length + bytes) reference column name
//   inputs       norm     u32 count, then count x (str name, f64 min, f64 max)
//   target norm  norm
//   layers       u32 count, then per layer in LayerId order:
//                u32 rows, u32 cols, u8 activation, rows*cols f64 weights
//                (row-major), rows f64 biases
//   crc32        u32      over every preceding byte

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <zlib.h>

#include "vaecal/data.hpp"
#include "vaecal/errors.hpp"
#include "vaecal/vae.hpp"

namespace vaecal {

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::array<char, 8> kModelMagic = {'V', 'A', 'E', 'C', 'A', 'L', 'M', '\0'};
inline constexpr std::array<std::uint32_t, 5> kTopology = {
    static_cast<std::uint32_t>(kInputDim), static_cast<std::uint32_t>(kEncoderWidth),
    static_cast<std::uint32_t>(kLatentDim), static_cast<std::uint32_t>(kDecoderWidth),
    static_cast<std::uint32_t>(kInputDim)};

/// Everything needed to reproduce predictions from a trained run.
struct ModelBundle {
  VaeModel model;
  Normalizer inputs;
  Normalizer target_norm;
  Target target = Target::CO;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    std::array<unsigned char, sizeof(T)> raw{};
    std::memcpy(raw.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }

  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  void put_raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::array<unsigned char, sizeof(T)> raw{};
    std::memcpy(raw.data(), data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ModelFileError("model file truncated");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

inline void put_normalizer(ByteWriter& w, const Normalizer& n) {
  w.put(static_cast<std::uint32_t>(n.size()));
  for (const auto& c : n.columns()) {
    w.put_string(c.name);
    w.put(c.min);
    w.put(c.max);
  }
}

inline Normalizer get_normalizer(ByteReader& r) {
  const auto n = r.get<std::uint32_t>();
  if (n > 64) throw ModelFileError("implausible normalizer width");
  std::vector<Normalizer::Column> cols;
  for (std::uint32_t i = 0; i < n; ++i) {
    Normalizer::Column c;
    c.name = r.get_string();
    c.min = r.get<double>();
    c.max = r.get<double>();
    cols.push_back(std::move(c));
  }
  return Normalizer(std::move(cols));
}

}  // namespace detail

inline std::string encode_model(const ModelBundle& b) {
  detail::ByteWriter w;
  w.put_raw(std::string_view(kModelMagic.data(), kModelMagic.size()));
  w.put(kModelFormatVersion);
  for (auto d : kTopology) w.put(d);
  w.put(b.seed);
  w.put_string(target_column(b.target));
  detail::put_normalizer(w, b.inputs);
  detail::put_normalizer(w, b.target_norm);
  w.put(static_cast<std::uint32_t>(kLayerCount));
  for (const auto& l : b.model.parameters().layers) {
    w.put(static_cast<std::uint32_t>(l.outputs()));
    w.put(static_cast<std::uint32_t>(l.inputs()));
    w.put(static_cast<std::uint8_t>(l.activation));
    for (double v : l.weights.data()) w.put(v);
    for (double v : l.biases) w.put(v);
  }
  w.put(detail::crc32_of(w.bytes()));
  return std::move(w.bytes());
}

inline ModelBundle decode_model(std::string_view bytes) {
  constexpr std::size_t kMinSize = kModelMagic.size() + 4 + 4;
  if (bytes.size() < kMinSize) throw ModelFileError("model file truncated");
  if (bytes.substr(0, kModelMagic.size()) != std::string_view(kModelMagic.data(), kModelMagic.size())) {
    throw ModelFileError("not a vaecal model file");
  }
  const auto body = bytes.substr(0, bytes.size() - 4);
  detail::ByteReader tail(bytes.substr(bytes.size() - 4));
  if (tail.get<std::uint32_t>() != detail::crc32_of(body)) {
    throw ChecksumError("model file checksum mismatch (corrupt or truncated)");
  }

  detail::ByteReader r(body.substr(kModelMagic.size()));
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw ModelVersionError("model format version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kModelFormatVersion) + ")");
  }
  for (auto expected : kTopology) {
    if (r.get<std::uint32_t>() != expected) {
      throw ModelVersionError("model topology differs from this build's architecture");
    }
  }

  ModelBundle b;
  b.seed = r.get<std::uint64_t>();
  const auto target = parse_target(r.get_string());
  if (!target) throw ModelFileError("unknown target column in model file");
  b.target = *target;
  b.inputs = detail::get_normalizer(r);
  b.target_norm = detail::get_normalizer(r);

  if (r.get<std::uint32_t>() != kLayerCount) throw ModelVersionError("unexpected layer count");
  for (auto& l : b.model.parameters().layers) {
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    const auto act = r.get<std::uint8_t>();
    if (rows != l.outputs() || cols != l.inputs() || act != static_cast<std::uint8_t>(l.activation)) {
      throw ModelVersionError("layer shape or activation differs from this build");
    }
    for (double& v : l.weights.data()) v = r.get<double>();
    for (double& v : l.biases) v = r.get<double>();
  }
  if (!r.done()) throw ModelFileError("trailing bytes in model file");
  return b;
}

/// Writes to a sibling temp file and renames over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void save_model(const std::filesystem::path& path, const ModelBundle& b) {
  write_file_atomic(path, encode_model(b));
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  return decode_model(read_file(path));
}

}  // namespace vaecal

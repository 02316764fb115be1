#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "procast/errors.hpp"

namespace procast {

// Self-describing binary container: magic, format version, a JSON metadata
// string, named f64 arrays with shapes, and a CRC32 trailer over everything
// before it. Model checkpoints and encoded-dataset caches both use it.

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed = 0) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = ~seed;
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return ~c;
}

struct NamedArray {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;  // row-major
};

struct Container {
  std::string metadata;  // JSON document
  std::map<std::string, NamedArray> arrays;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct ByteReader {
  const std::uint8_t* p;
  std::size_t n;
  std::size_t pos = 0;

  void need(std::size_t k) const {
    if (pos + k > n) throw DataError("container truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str(std::size_t k) {
    need(k);
    std::string s(reinterpret_cast<const char*>(p + pos), k);
    pos += k;
    return s;
  }
  void f64s(double* dst, std::size_t count) {
    need(count * 8);
    std::memcpy(dst, p + pos, count * 8);
    pos += count * 8;
  }
};

}  // namespace detail

inline constexpr std::uint32_t kContainerMagic = 0x50524354;  // "PRCT"
inline constexpr std::uint32_t kContainerVersion = 1;

inline std::vector<std::uint8_t> serialize_container(const Container& c) {
  std::vector<std::uint8_t> out;
  detail::put_u32(out, kContainerMagic);
  detail::put_u32(out, kContainerVersion);
  detail::put_u64(out, c.metadata.size());
  out.insert(out.end(), c.metadata.begin(), c.metadata.end());
  detail::put_u32(out, static_cast<std::uint32_t>(c.arrays.size()));
  for (const auto& [name, arr] : c.arrays) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(arr.shape.size()));
    std::uint64_t count = 1;
    for (std::uint64_t d : arr.shape) {
      detail::put_u64(out, d);
      count *= d;
    }
    if (count != arr.data.size()) throw NumericError("array '" + name + "' shape/data mismatch");
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(arr.data.data());
    out.insert(out.end(), bytes, bytes + arr.data.size() * 8);
  }
  detail::put_u32(out, crc32(out.data(), out.size()));
  return out;
}

inline Container parse_container(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) throw DataError("container truncated");
  const std::uint32_t stored = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
    return v;
  }();
  if (crc32(bytes.data(), bytes.size() - 4) != stored)
    throw DataError("container checksum mismatch (file truncated or corrupted)");

  detail::ByteReader r{bytes.data(), bytes.size() - 4};
  if (r.u32() != kContainerMagic) throw DataError("not a recognized container file");
  const std::uint32_t version = r.u32();
  if (version != kContainerVersion)
    throw DataError("unsupported container version " + std::to_string(version));
  Container c;
  c.metadata = r.str(r.u64());
  const std::uint32_t narrays = r.u32();
  for (std::uint32_t a = 0; a < narrays; ++a) {
    const std::string name = r.str(r.u32());
    NamedArray arr;
    const std::uint32_t ndim = r.u32();
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      arr.shape.push_back(r.u64());
      count *= arr.shape.back();
    }
    arr.data.resize(count);
    r.f64s(arr.data.data(), count);
    c.arrays.emplace(name, std::move(arr));
  }
  if (r.pos != r.n) throw DataError("container has trailing bytes");
  return c;
}

inline void write_container_file(const std::string& path, const Container& c) {
  const auto bytes = serialize_container(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline Container read_container_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_container(bytes);
}

}  // namespace procast

#include "pimc/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pimc/errors.hpp"

namespace pimc {

static_assert(std::endian::native == std::endian::little, "PIMC containers assume a little-endian host");

namespace {

template <typename T>
void put(std::vector<char>& out, std::size_t offset, T value) {
  std::memcpy(out.data() + offset, &value, sizeof(T));
}

template <typename T>
void append(std::vector<char>& out, T value) {
  const auto at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &value, sizeof(T));
}

template <typename T>
T get(std::span<const char> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

}  // namespace

std::vector<char> encode_container(const Container& ct) {
  if (ct.bands.size() != ct.c) {
    throw ValidationError("container: " + std::to_string(ct.bands.size()) + " band names for c=" + std::to_string(ct.c));
  }
  if (ct.timestamps.size() != ct.t) {
    throw ValidationError("container: " + std::to_string(ct.timestamps.size()) + " timestamps for t=" +
                          std::to_string(ct.t));
  }
  if (ct.values.size() != ct.numel()) {
    throw ValidationError("container: payload holds " + std::to_string(ct.values.size()) + " values, header needs " +
                          std::to_string(ct.numel()));
  }
  std::vector<char> out(kHeaderBytes, 0);
  std::memcpy(out.data(), "PIMC", 4);
  put<std::uint16_t>(out, 4, kContainerVersion);
  put<std::uint8_t>(out, 6, static_cast<std::uint8_t>(ct.dtype));
  put<float>(out, 8, ct.scale);
  put<std::uint32_t>(out, 12, ct.t);
  put<std::uint32_t>(out, 16, ct.c);
  put<std::uint32_t>(out, 20, ct.h);
  put<std::uint32_t>(out, 24, ct.w);
  put<float>(out, 28, ct.nodata);
  put<std::uint32_t>(out, 32, ct.has_nodata ? 1u : 0u);
  for (const auto& name : ct.bands) {
    if (name.size() > 0xFFFF) throw ValidationError("container: band name too long");
    append<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
  }
  for (auto day : ct.timestamps) append<std::uint32_t>(out, day);
  if (ct.dtype == DType::F32) {
    const auto at = out.size();
    out.resize(at + ct.values.size() * sizeof(float));
    std::memcpy(out.data() + at, ct.values.data(), ct.values.size() * sizeof(float));
  } else {
    for (float v : ct.values) {
      if (!(v >= 0.0f && v <= 65535.0f)) throw ValidationError("container: u16 payload value out of range");
      append<std::uint16_t>(out, static_cast<std::uint16_t>(std::lround(v)));
    }
  }
  return out;
}

Container decode_container(std::span<const char> bytes, std::size_t* consumed) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "PIMC", 4) != 0) {
    throw FormatError("container: bad magic (expected \"PIMC\")");
  }
  if (bytes.size() < kHeaderBytes) throw CorruptionError("container: truncated header");
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version != kContainerVersion) throw FormatError("container: unsupported version " + std::to_string(version));
  const auto dtype_code = get<std::uint8_t>(bytes, 6);
  if (dtype_code > 1) throw FormatError("container: unknown dtype code " + std::to_string(dtype_code));

  Container ct;
  ct.dtype = static_cast<DType>(dtype_code);
  ct.scale = get<float>(bytes, 8);
  ct.t = get<std::uint32_t>(bytes, 12);
  ct.c = get<std::uint32_t>(bytes, 16);
  ct.h = get<std::uint32_t>(bytes, 20);
  ct.w = get<std::uint32_t>(bytes, 24);
  ct.nodata = get<float>(bytes, 28);
  ct.has_nodata = (get<std::uint32_t>(bytes, 32) & 1u) != 0;
  if (ct.t == 0 || ct.c == 0 || ct.h == 0 || ct.w == 0) {
    throw ValidationError("container: header declares an empty dimension (t=" + std::to_string(ct.t) +
                          ", c=" + std::to_string(ct.c) + ", h=" + std::to_string(ct.h) + ", w=" +
                          std::to_string(ct.w) + ")");
  }
  if (!(ct.scale > 0.0f) || !std::isfinite(ct.scale)) throw ValidationError("container: scale must be positive");

  std::size_t pos = kHeaderBytes;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() < pos + n) throw CorruptionError(std::string("container: truncated ") + what);
  };
  ct.bands.reserve(ct.c);
  for (std::uint32_t i = 0; i < ct.c; ++i) {
    need(2, "band-name block");
    const auto len = get<std::uint16_t>(bytes, pos);
    pos += 2;
    need(len, "band-name block");
    ct.bands.emplace_back(bytes.data() + pos, len);
    pos += len;
  }
  need(static_cast<std::size_t>(ct.t) * 4, "timestamp block");
  ct.timestamps.resize(ct.t);
  std::memcpy(ct.timestamps.data(), bytes.data() + pos, static_cast<std::size_t>(ct.t) * 4);
  pos += static_cast<std::size_t>(ct.t) * 4;

  const std::size_t n = ct.numel();
  const std::size_t width = ct.dtype == DType::F32 ? 4 : 2;
  need(n * width, "payload");
  ct.values.resize(n);
  if (ct.dtype == DType::F32) {
    std::memcpy(ct.values.data(), bytes.data() + pos, n * 4);
  } else {
    for (std::size_t i = 0; i < n; ++i) ct.values[i] = static_cast<float>(get<std::uint16_t>(bytes, pos + 2 * i));
  }
  pos += n * width;
  if (consumed != nullptr) {
    *consumed = pos;
  } else if (pos != bytes.size()) {
    throw CorruptionError("container: " + std::to_string(bytes.size() - pos) + " trailing bytes after payload");
  }
  return ct;
}

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_container(const Container& ct, const std::filesystem::path& path) {
  write_file_bytes(path, encode_container(ct));
}

Container read_container(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_container(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const CorruptionError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

Container tensor_container(std::span<const std::size_t> shape, std::span<const float> values,
                           std::vector<std::string> channel_names) {
  if (shape.size() > 4) throw DimensionError("tensor_container: rank > 4");
  std::size_t dims[4] = {1, 1, 1, 1};
  for (std::size_t i = 0; i < shape.size(); ++i) dims[4 - shape.size() + i] = shape[i];
  Container ct;
  ct.t = static_cast<std::uint32_t>(dims[0]);
  ct.c = static_cast<std::uint32_t>(dims[1]);
  ct.h = static_cast<std::uint32_t>(dims[2]);
  ct.w = static_cast<std::uint32_t>(dims[3]);
  if (channel_names.empty()) {
    for (std::uint32_t i = 0; i < ct.c; ++i) channel_names.push_back("c" + std::to_string(i));
  }
  if (channel_names.size() != ct.c) throw DimensionError("tensor_container: channel name count mismatch");
  ct.bands = std::move(channel_names);
  for (std::uint32_t i = 0; i < ct.t; ++i) ct.timestamps.push_back(i);
  ct.values.assign(values.begin(), values.end());
  if (ct.values.size() != ct.numel()) throw DimensionError("tensor_container: value count mismatch");
  return ct;
}

}  // namespace pimc

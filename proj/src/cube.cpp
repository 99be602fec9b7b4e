#include "pimc/cube.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "pimc/errors.hpp"

namespace pimc {

std::size_t SitsCube::band_index(const std::string& name) const {
  const auto it = std::find(bands.begin(), bands.end(), name);
  if (it == bands.end()) throw ConfigError("cube " + region_id + " has no band \"" + name + "\"");
  return static_cast<std::size_t>(it - bands.begin());
}

bool SitsCube::has_band(const std::string& name) const {
  return std::find(bands.begin(), bands.end(), name) != bands.end();
}

void SitsCube::validate() const {
  if (t == 0 || c == 0 || h == 0 || w == 0) throw ValidationError("cube " + region_id + ": empty dimension");
  if (timestamps.size() != t) throw ValidationError("cube " + region_id + ": t != number of timestamps");
  if (bands.size() != c) throw ValidationError("cube " + region_id + ": c != number of bands");
  for (std::size_t i = 1; i < t; ++i) {
    if (timestamps[i] <= timestamps[i - 1]) {
      throw ValidationError("cube " + region_id + ": timestamps not strictly increasing at index " + std::to_string(i));
    }
  }
  if (data.size() != t * c * h * w) throw ValidationError("cube " + region_id + ": payload size mismatch");
  for (float v : data) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("cube " + region_id + ": reflectance outside [0, 1]");
  }
}

std::string iso_date(std::uint32_t days_since_epoch) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{days_since_epoch}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::uint32_t days_from_iso(const std::string& iso) {
  using namespace std::chrono;
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::sscanf(iso.c_str(), "%d-%u-%u", &y, &m, &d) != 3) throw ValidationError("bad ISO-8601 date: " + iso);
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw ValidationError("invalid calendar date: " + iso);
  const auto count = sys_days{ymd}.time_since_epoch().count();
  if (count < 0) throw ValidationError("date before 1970-01-01: " + iso);
  return static_cast<std::uint32_t>(count);
}

namespace {

void fill_gaps(std::vector<float>& values, const std::vector<bool>& missing, std::size_t t, std::size_t stride,
               std::size_t base, const std::vector<std::uint32_t>& days) {
  std::ptrdiff_t prev = -1;
  for (std::size_t i = 0; i < t; ++i) {
    if (missing[base + i * stride]) continue;
    const auto cur = static_cast<std::ptrdiff_t>(i);
    const float vc = values[base + i * stride];
    if (prev < 0) {
      for (std::ptrdiff_t j = 0; j < cur; ++j) values[base + static_cast<std::size_t>(j) * stride] = vc;
    } else {
      const float vp = values[base + static_cast<std::size_t>(prev) * stride];
      const double span = static_cast<double>(days[i]) - days[static_cast<std::size_t>(prev)];
      for (std::ptrdiff_t j = prev + 1; j < cur; ++j) {
        const double a = (static_cast<double>(days[static_cast<std::size_t>(j)]) - days[static_cast<std::size_t>(prev)]) / span;
        values[base + static_cast<std::size_t>(j) * stride] = static_cast<float>(vp + a * (vc - vp));
      }
    }
    prev = cur;
  }
  if (prev < 0) {
    for (std::size_t i = 0; i < t; ++i) values[base + i * stride] = 0.0f;  // no valid observation at all
  } else {
    const float vl = values[base + static_cast<std::size_t>(prev) * stride];
    for (std::size_t i = static_cast<std::size_t>(prev) + 1; i < t; ++i) values[base + i * stride] = vl;
  }
}

}  // namespace

SitsCube cube_from_container(Container ct, std::string region_id) {
  SitsCube cube;
  cube.region_id = std::move(region_id);
  cube.t = ct.t;
  cube.c = ct.c;
  cube.h = ct.h;
  cube.w = ct.w;
  cube.bands = std::move(ct.bands);
  cube.timestamps = std::move(ct.timestamps);
  for (std::size_t i = 1; i < cube.t; ++i) {
    if (cube.timestamps[i] <= cube.timestamps[i - 1]) {
      throw ValidationError("cube " + cube.region_id + ": timestamps not strictly increasing");
    }
  }
  std::vector<bool> missing;
  if (ct.has_nodata) {
    missing.resize(ct.values.size());
    for (std::size_t i = 0; i < ct.values.size(); ++i) missing[i] = ct.values[i] == ct.nodata;
  }
  cube.data = std::move(ct.values);
  const float inv = 1.0f / ct.scale;
  for (auto& v : cube.data) {
    if (ct.scale != 1.0f) v *= inv;
    v = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
  }
  if (ct.has_nodata) {
    const std::size_t stride = cube.c * cube.h * cube.w;
    for (std::size_t off = 0; off < stride; ++off) fill_gaps(cube.data, missing, cube.t, stride, off, cube.timestamps);
  }
  return cube;
}

SitsCube read_cube(const std::filesystem::path& path) {
  auto ct = read_container(path);
  return cube_from_container(std::move(ct), path.stem().string());
}

void write_cube(const SitsCube& cube, const std::filesystem::path& path, CubeWriteOptions opt) {
  cube.validate();
  Container ct;
  ct.dtype = opt.dtype;
  ct.scale = opt.dtype == DType::F32 ? 1.0f : opt.scale;
  ct.t = static_cast<std::uint32_t>(cube.t);
  ct.c = static_cast<std::uint32_t>(cube.c);
  ct.h = static_cast<std::uint32_t>(cube.h);
  ct.w = static_cast<std::uint32_t>(cube.w);
  ct.bands = cube.bands;
  ct.timestamps = cube.timestamps;
  if (opt.dtype == DType::F32) {
    ct.values = cube.data;
  } else {
    ct.values.resize(cube.data.size());
    for (std::size_t i = 0; i < cube.data.size(); ++i) {
      ct.values[i] = std::round(std::min(cube.data[i] * opt.scale, 65535.0f));
    }
  }
  try {
    write_container(ct, path);
  } catch (const std::exception& e) {
    throw std::runtime_error("write_cube " + path.string() + ": " + e.what());
  }
}

void write_labels(const LabelRaster& labels, const std::filesystem::path& path) {
  std::vector<float> values(labels.labels.begin(), labels.labels.end());
  const std::size_t shape[] = {labels.h, labels.w};
  write_container(tensor_container(shape, values, {"label"}), path);
}

LabelRaster read_labels(const std::filesystem::path& path) {
  const auto ct = read_container(path);
  if (ct.t != 1 || ct.c != 1) throw ValidationError(path.string() + ": label raster must have t=1, c=1");
  LabelRaster out;
  out.h = ct.h;
  out.w = ct.w;
  out.labels.reserve(ct.values.size());
  for (float v : ct.values) out.labels.push_back(static_cast<std::int32_t>(std::lround(v)));
  return out;
}

}  // namespace pimc

#include "pimc/recurrence.hpp"

#include <algorithm>
#include <cmath>

#include "pimc/container.hpp"
#include "pimc/errors.hpp"

namespace pimc {

std::vector<float> recurrence_plot(std::span<const float> series) {
  const std::size_t n = series.size();
  if (n < 2) throw DomainError("recurrence_plot: series must have at least 2 values");
  for (float v : series) {
    if (!std::isfinite(v)) throw DomainError("recurrence_plot: non-finite value in series");
  }
  std::vector<float> rp(n * n, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const float d = std::fabs(series[i] - series[j]);
      rp[i * n + j] = d;
      rp[j * n + i] = d;
    }
  }
  return rp;
}

RpImage stack_channels(std::span<const float> series, std::size_t n, PixelCoord pixel) {
  if (series.size() != 3 * n) throw DimensionError("stack_channels: expected 3 x n series values");
  RpImage img;
  img.n = n;
  img.pixel = pixel;
  img.data.resize(3 * n * n);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    auto plane = recurrence_plot(series.subspan(ch * n, n));
    const auto [lo, hi] = std::minmax_element(plane.begin(), plane.end());
    img.channel_min[ch] = *lo;
    img.channel_max[ch] = *hi;
    const float range = *hi - *lo;
    float* out = img.data.data() + ch * n * n;
    if (range > 0.0f) {
      const float lo_v = *lo;
      for (std::size_t i = 0; i < plane.size(); ++i) out[i] = (plane[i] - lo_v) / range;
    } else {
      std::fill(out, out + n * n, 0.0f);
    }
  }
  return img;
}

namespace {

struct Tap {
  std::size_t i0, i1;
  float w1;
};

std::vector<Tap> taps(std::size_t in, std::size_t out) {
  std::vector<Tap> t(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const auto i1 = std::min(i0 + 1, in - 1);
    t[o] = {i0, i1, static_cast<float>(src - static_cast<double>(i0))};
  }
  return t;
}

}  // namespace

std::vector<float> resize_planes(std::span<const float> src, std::size_t planes, std::size_t h, std::size_t w,
                                 std::size_t oh, std::size_t ow) {
  if (src.size() != planes * h * w) throw DimensionError("resize_planes: source size mismatch");
  if (h == oh && w == ow) return {src.begin(), src.end()};
  const auto ty = taps(h, oh), tx = taps(w, ow);
  std::vector<float> tmp(h * ow);
  std::vector<float> out(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p) {
    const float* s = src.data() + p * h * w;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        const auto& t = tx[c];
        tmp[r * ow + c] = s[r * w + t.i0] * (1.0f - t.w1) + s[r * w + t.i1] * t.w1;
      }
    }
    float* d = out.data() + p * oh * ow;
    for (std::size_t r = 0; r < oh; ++r) {
      const auto& t = ty[r];
      for (std::size_t c = 0; c < ow; ++c) d[r * ow + c] = tmp[t.i0 * ow + c] * (1.0f - t.w1) + tmp[t.i1 * ow + c] * t.w1;
    }
  }
  return out;
}

RpImage resize_rp(const RpImage& rp, std::size_t s) {
  if (s < 8) throw DomainError("resize_rp: target size must be >= 8");
  RpImage out = rp;
  out.n = s;
  out.data = resize_planes(rp.data, 3, rp.n, rp.n, s, s);
  return out;
}

void save_rp_batch(std::span<const RpImage> batch, const std::filesystem::path& path) {
  if (batch.empty()) throw DomainError("save_rp_batch: empty batch");
  const std::size_t n = batch.front().n;
  std::vector<float> values;
  values.reserve(batch.size() * 3 * n * n);
  for (const auto& rp : batch) {
    if (rp.n != n) throw DimensionError("save_rp_batch: mixed plot sizes");
    values.insert(values.end(), rp.data.begin(), rp.data.end());
  }
  const std::size_t shape[] = {batch.size(), 3, n, n};
  write_container(tensor_container(shape, values, {"NDVI", "EVI", "SAVI"}), path);
}

std::vector<RpImage> load_rp_batch(const std::filesystem::path& path) {
  const auto ct = read_container(path);
  if (ct.c != 3 || ct.h != ct.w) throw ValidationError(path.string() + ": not a recurrence-plot batch");
  std::vector<RpImage> out(ct.t);
  const std::size_t plane = 3 * static_cast<std::size_t>(ct.h) * ct.w;
  for (std::size_t i = 0; i < ct.t; ++i) {
    out[i].n = ct.h;
    out[i].data.assign(ct.values.begin() + static_cast<std::ptrdiff_t>(i * plane),
                       ct.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * plane));
  }
  return out;
}

}  // namespace pimc

#include "pimc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pimc/errors.hpp"

namespace pimc {

SynthResult synth_cube(const SynthOptions& opt) {
  if (opt.classes < 2) throw DomainError("synth_cube: need at least 2 classes");
  if (opt.t < 8) throw DomainError("synth_cube: need t >= 8");
  if (opt.h == 0 || opt.w == 0 || opt.field == 0) throw DomainError("synth_cube: empty extent");
  if (opt.noise < 0.0f) throw DomainError("synth_cube: negative noise");
  constexpr double pi = std::numbers::pi;

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t fy = (opt.h + opt.field - 1) / opt.field;
  const std::size_t fx = (opt.w + opt.field - 1) / opt.field;
  SynthResult res;
  res.fields.resize(fy * fx);
  for (auto& f : res.fields) {
    f.label = static_cast<std::int32_t>(rng() % opt.classes);
    f.u = static_cast<float>(unit(rng) * opt.latent_jitter);
    f.v = static_cast<float>(unit(rng) * opt.latent_jitter);
    f.w = static_cast<float>(unit(rng) * opt.latent_jitter);
    f.onset = static_cast<float>(unit(rng) * opt.latent_jitter);
  }

  auto& cube = res.cube;
  cube.region_id = "synth";
  cube.t = opt.t;
  cube.c = 4;
  cube.h = opt.h;
  cube.w = opt.w;
  cube.bands = {"blue", "green", "red", "nir"};
  for (std::size_t i = 0; i < opt.t; ++i) cube.timestamps.push_back(opt.start_day + static_cast<std::uint32_t>(i) * opt.day_step);
  cube.data.assign(cube.t * cube.c * cube.h * cube.w, 0.0f);
  res.labels.h = opt.h;
  res.labels.w = opt.w;
  res.labels.labels.resize(opt.h * opt.w);

  const double span = static_cast<double>(std::max<std::size_t>(opt.classes - 1, 1));
  const double freq_step = 3.5 / span;
  std::vector<double> season(opt.t);
  for (std::size_t y = 0; y < opt.h; ++y) {
    for (std::size_t x = 0; x < opt.w; ++x) {
      const auto& f = res.fields[(y / opt.field) * fx + x / opt.field];
      const double cls = f.label;
      const double level = cls / span;
      res.labels.labels[y * opt.w + x] = f.label;

      const double freq = 1.0 + freq_step * (cls + 0.9 * f.v);
      const double phase = 2.0 * pi * cls / static_cast<double>(opt.classes);
      const double harmonic = 0.6 * f.u;
      for (std::size_t ti = 0; ti < opt.t; ++ti) {
        const double a = 2.0 * pi * freq * static_cast<double>(ti) / static_cast<double>(opt.cycle_steps) + phase;
        season[ti] = (std::sin(a) + harmonic * std::sin(2.0 * a)) / (1.0 + harmonic);
      }
      // Bare-soil spell: the curve sits at its floor for `spell` steps.
      const double spell = 0.25 * static_cast<double>(opt.t) * f.w;
      const double start = static_cast<double>(opt.t) * (0.25 + 0.25 * f.onset);
      for (std::size_t ti = 0; spell > 0.0 && ti < opt.t; ++ti) {
        const double pos = static_cast<double>(ti) - start;
        const double cover = std::clamp(std::min(pos + 1.0, spell - pos), 0.0, 1.0);
        season[ti] += cover * (-1.0 - season[ti]);
      }
      const double theta = pi * f.u;
      const double wavelength = 4.0 + 4.0 * f.v;
      const double stripe =
          std::sin(2.0 * pi * (static_cast<double>(x) * std::cos(theta) + static_cast<double>(y) * std::sin(theta)) /
                   wavelength);
      const double contrast = 0.03 + 0.02 * level + 0.04 * f.w;

      for (std::size_t ti = 0; ti < opt.t; ++ti) {
        const double s = season[ti];
        const double values[4] = {
            0.04 + 0.02 * s + 0.05 * f.onset,                 // blue
            0.08 + 0.04 * level + 0.02 * s + contrast * stripe,  // green
            0.15 - 0.10 * s,                                  // red
            0.35 + 0.10 * level + 0.25 * s,                   // nir
        };
        for (std::size_t ci = 0; ci < 4; ++ci) {
          double v = values[ci];
          if (opt.noise > 0.0f) v += opt.noise * std::clamp(gauss(rng), -3.0, 3.0);
          cube.at(ti, ci, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  }
  return res;
}

}  // namespace pimc

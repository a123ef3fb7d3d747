#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "arr/encoder/encoder.hpp"
#include "arr/error.hpp"
#include "arr/numerics/rng.hpp"
#include "json.hpp"

namespace arr {

struct RenderConfig {
  std::size_t frames = 4;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 3;
  double sigma = 0.25;
  std::uint64_t template_seed = 0;

  void validate() const {
    if (frames < 1 || height < 1 || width < 1 || channels < 1) throw ConfigError("render geometry must be positive");
    if (!(sigma >= 0.0)) throw ConfigError("render sigma must be >= 0");
  }

  nlohmann::json to_json() const {
    return {{"frames", frames}, {"height", height}, {"width", width}, {"channels", channels},
            {"sigma", sigma},   {"template_seed", template_seed}};
  }
  static RenderConfig from_json(const nlohmann::json& j) {
    RenderConfig c;
    c.frames = j.at("frames").get<std::size_t>();
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.sigma = j.at("sigma").get<double>();
    c.template_seed = j.at("template_seed").get<std::uint64_t>();
    c.validate();
    return c;
  }
};

/// Binary random pattern identifying one action; the same for every frame.
inline std::vector<float> class_template(int action, const RenderConfig& cfg) {
  if (action < 0) throw DataError("class template needs a non-negative action id");
  Rng rng(derive_seed(cfg.template_seed, static_cast<std::uint64_t>(action)));
  std::vector<float> out(cfg.height * cfg.width * cfg.channels);
  for (auto& v : out) v = (rng() >> 63) ? 1.0f : 0.0f;
  return out;
}

/// A clip showing `action` (template plus Gaussian noise, clipped to [0,1]).
/// A negative action means nothing recognizable is on screen: uniform noise.
inline Clip render_clip(int action, const RenderConfig& cfg, std::uint64_t noise_seed) {
  cfg.validate();
  Clip clip(cfg.frames, cfg.height, cfg.width, cfg.channels);
  Rng rng(noise_seed);
  if (action < 0) {
    for (auto& v : clip.pixels) v = static_cast<float>(uniform01(rng));
    return clip;
  }
  const auto tmpl = class_template(action, cfg);
  const std::size_t fs = clip.frame_size();
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    for (std::size_t i = 0; i < fs; ++i) {
      const double noise = cfg.sigma > 0.0 ? cfg.sigma * standard_normal(rng) : 0.0;
      clip.pixels[f * fs + i] = static_cast<float>(std::clamp(tmpl[i] + noise, 0.0, 1.0));
    }
  }
  return clip;
}

}  // namespace arr

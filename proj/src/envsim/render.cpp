#include "diswm/envsim/render.hpp"

#include <algorithm>
#include <cmath>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

namespace {

constexpr std::array<double, 4> kSchemeA{0.0, 0.15, 0.3, 0.45};
constexpr std::array<double, 3> kSchemeB{0.55, 0.7, 0.85};

double overlap_1d(double lo, double hi, double cell) {
  return std::clamp(std::min(hi, cell + 1.0) - std::max(lo, cell), 0.0, 1.0);
}

}  // namespace

const std::array<std::string_view, FactorVector::kCount>& FactorVector::names() {
  static const std::array<std::string_view, kCount> kNames{
      "agent_x", "agent_y", "goal_x", "goal_y", "agent_hue", "background_hue", "distractor_hue", "distractor_x",
      "distractor_y"};
  return kNames;
}

std::size_t FactorVector::index_of(std::string_view name) {
  const auto& n = names();
  auto it = std::find(n.begin(), n.end(), name);
  if (it == n.end()) throw ConfigError("unknown factor '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - n.begin());
}

std::array<double, FactorVector::kCount> FactorVector::to_array() const {
  return {agent_x, agent_y, goal_x, goal_y, agent_hue, background_hue, distractor_hue, distractor_x, distractor_y};
}

FactorVector FactorVector::from_array(std::span<const double> v) {
  if (v.size() != kCount) throw ShapeError("factor vector needs 9 values, got " + std::to_string(v.size()));
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
}

std::span<const double> hue_palette(ColorScheme scheme) {
  if (scheme == ColorScheme::A) return kSchemeA;
  return kSchemeB;
}

double draw_hue(ColorScheme scheme, Rng& rng) {
  const auto palette = hue_palette(scheme);
  const double base = palette[rng.below(palette.size())];
  double h = base + rng.uniform(-kHueJitter, kHueJitter);
  h -= std::floor(h);
  return h >= 1.0 ? 0.0 : h;
}

Tensor Observation::to_tensor() const {
  return Tensor({height, width, 3}, std::vector<double>(pixels.begin(), pixels.end()));
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = (h - std::floor(h)) * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

std::array<double, 2> sprite_center_px(double x, double y, double radius, std::size_t height, std::size_t width) {
  const double r = radius * static_cast<double>(width);
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);
  return {r + x * (w - 2.0 * r), r + y * (h - 2.0 * r)};
}

Observation render_sprites(std::size_t height, std::size_t width, const std::array<double, 3>& background,
                           std::span<const Sprite> sprites) {
  std::vector<double> img(height * width * 3);
  for (std::size_t i = 0; i < height * width; ++i) {
    for (std::size_t c = 0; c < 3; ++c) img[i * 3 + c] = background[c];
  }
  for (const Sprite& s : sprites) {
    const auto [cx, cy] = sprite_center_px(s.x, s.y, s.radius, height, width);
    const double r = s.radius * static_cast<double>(width);
    for (std::size_t row = 0; row < height; ++row) {
      for (std::size_t col = 0; col < width; ++col) {
        const double px = static_cast<double>(col);
        const double py = static_cast<double>(row);
        double cov = 0.0;
        if (s.shape == SpriteShape::square) {
          cov = overlap_1d(cx - r, cx + r, px) * overlap_1d(cy - r, cy + r, py);
        } else {
          const double d = std::hypot(px + 0.5 - cx, py + 0.5 - cy);
          cov = std::clamp(r - d + 0.5, 0.0, 1.0);
        }
        if (cov <= 0.0) continue;
        double* dst = &img[(row * width + col) * 3];
        for (std::size_t c = 0; c < 3; ++c) dst[c] = cov * s.rgb[c] + (1.0 - cov) * dst[c];
      }
    }
  }
  Observation obs{height, width, std::vector<float>(img.size())};
  for (std::size_t i = 0; i < img.size(); ++i) obs.pixels[i] = static_cast<float>(std::clamp(img[i], 0.0, 1.0));
  return obs;
}

}  // namespace diswm

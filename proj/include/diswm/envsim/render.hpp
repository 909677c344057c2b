#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "diswm/diffcore/rng.hpp"
#include "diswm/diffcore/tensor.hpp"

namespace diswm {

/// Ground-truth generative factors of one frame. Positions live in [0,1]²,
/// hues in [0,1).
struct FactorVector {
  double agent_x = 0.5;
  double agent_y = 0.5;
  double goal_x = 0.5;
  double goal_y = 0.5;
  double agent_hue = 0.0;
  double background_hue = 0.0;
  double distractor_hue = 0.0;
  double distractor_x = 0.5;
  double distractor_y = 0.5;

  static constexpr std::size_t kCount = 9;
  static const std::array<std::string_view, kCount>& names();
  /// Index of a factor by name; throws ConfigError for unknown names.
  static std::size_t index_of(std::string_view name);

  std::array<double, kCount> to_array() const;
  static FactorVector from_array(std::span<const double> values);
  bool operator==(const FactorVector&) const = default;
};

enum class ColorScheme : std::uint8_t { A = 0, B = 1 };

inline constexpr double kHueJitter = 0.02;

/// Base hues of a scheme; the two schemes are disjoint even after jitter.
std::span<const double> hue_palette(ColorScheme scheme);
/// Palette entry plus uniform jitter in [−kHueJitter, kHueJitter], wrapped to [0,1).
double draw_hue(ColorScheme scheme, Rng& rng);

/// Rendered frame, row-major H × W × 3, values in [0,1].
struct Observation {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  std::size_t size() const noexcept { return pixels.size(); }
  /// [H, W, 3] in double precision.
  Tensor to_tensor() const;
  bool operator==(const Observation&) const = default;
};

enum class SpriteShape { disk, square };

struct Sprite {
  SpriteShape shape = SpriteShape::disk;
  double x = 0.5;  ///< factor-space position in [0,1]
  double y = 0.5;
  double radius = 0.12;  ///< fraction of the image width (half-size for squares)
  std::array<double, 3> rgb{1.0, 1.0, 1.0};
};

std::array<double, 3> hsv_to_rgb(double h, double s, double v);

/// Paints sprites back-to-front over a flat background. Edges are
/// anti-aliased by pixel coverage: exact overlap area for squares, a
/// one-pixel linear ramp across the boundary for disks.
Observation render_sprites(std::size_t height, std::size_t width, const std::array<double, 3>& background,
                           std::span<const Sprite> sprites);

/// Pixel-space center of a sprite at factor position (x, y).
std::array<double, 2> sprite_center_px(double x, double y, double radius, std::size_t height, std::size_t width);

}  // namespace diswm

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "diswm/pretrain/video_predictor.hpp"
#include "diswm/worldmodel/world_model.hpp"

namespace diswm {

struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  ///< row-major H × W × 3
};

/// round(clamp(v, 0, 1) · 255) per channel of an H·W·3 frame.
RgbImage quantize_frame(const Tensor& frame, std::size_t height, std::size_t width);

/// Tiles equally sized frames: cells[r][c] lands at row block r, column block c.
RgbImage tile_grid(const std::vector<std::vector<RgbImage>>& cells);

void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

/// Decoded frames for one latent coordinate swept over `values`.
using TraversalFn =
    std::function<std::vector<Tensor>(const Tensor& anchor, std::size_t dim, const std::vector<double>& values)>;

/// Encodes the world model's code mean, overwrites one coordinate, maps it
/// through the posterior with h = 0 and decodes the posterior mean.
std::vector<Tensor> world_model_traversal(const WorldModel& wm, const Tensor& obs, std::size_t dim,
                                          const std::vector<double>& values);

TraversalFn traversal_fn(const VideoPredictor& model);
TraversalFn traversal_fn(const WorldModel& wm);

/// Writes `<stem>_anchor_<i>.ppm` under out_dir, one per anchor: rows are
/// code dims, columns are traversal values. Returns the written paths.
std::vector<std::filesystem::path> export_traversals(const TraversalFn& fn, std::size_t code_dim,
                                                     std::size_t height, std::size_t width,
                                                     const std::vector<Tensor>& anchors,
                                                     const std::vector<double>& values,
                                                     const std::filesystem::path& out_dir,
                                                     const std::string& stem = "traversal");

}  // namespace diswm

#include "diswm/pipeline/images.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/ops.hpp"

namespace diswm {

RgbImage quantize_frame(const Tensor& frame, std::size_t height, std::size_t width) {
  if (frame.numel() != height * width * 3) {
    throw ShapeError("frame has " + std::to_string(frame.numel()) + " values, expected " +
                     std::to_string(height * width * 3));
  }
  RgbImage img{height, width, std::vector<std::uint8_t>(frame.numel())};
  const auto data = frame.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = std::isnan(data[i]) ? 0.0 : std::clamp(data[i], 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

RgbImage tile_grid(const std::vector<std::vector<RgbImage>>& cells) {
  if (cells.empty() || cells.front().empty()) throw ShapeError("empty image grid");
  const std::size_t ch = cells.front().front().height, cw = cells.front().front().width;
  const std::size_t cols = cells.front().size();
  RgbImage out{cells.size() * ch, cols * cw, {}};
  out.pixels.assign(out.height * out.width * 3, 0);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (cells[r].size() != cols) throw ShapeError("ragged image grid");
    for (std::size_t c = 0; c < cols; ++c) {
      const RgbImage& cell = cells[r][c];
      if (cell.height != ch || cell.width != cw) throw ShapeError("grid cells differ in size");
      for (std::size_t y = 0; y < ch; ++y) {
        const auto src = cell.pixels.begin() + static_cast<std::ptrdiff_t>(y * cw * 3);
        const std::size_t dst = ((r * ch + y) * out.width + c * cw) * 3;
        std::copy_n(src, cw * 3, out.pixels.begin() + static_cast<std::ptrdiff_t>(dst));
      }
    }
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image '" + path.string() + "'");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("failed writing image '" + path.string() + "'");
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P6" || maxval != 255) throw LoadError(path.string() + ": not an 8-bit P6 image");
  in.get();
  RgbImage img{h, w, std::vector<std::uint8_t>(h * w * 3)};
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw LoadError(path.string() + ": truncated pixel data");
  }
  return img;
}

std::vector<Tensor> world_model_traversal(const WorldModel& wm, const Tensor& obs, std::size_t dim,
                                          const std::vector<double>& values) {
  const auto& c = wm.config();
  if (dim >= c.code_dim) {
    throw ContractError("traversal dim " + std::to_string(dim) + " outside code of size " +
                        std::to_string(c.code_dim));
  }
  Tape tape(Tape::NoGrad{});
  const Tensor row = reshape(obs, {1, obs.numel()});
  const Tensor mean = stop_gradient(wm.encoder.forward(tape, row).mean);
  const Tensor h0 = Tensor::zeros({1, c.h_dim});
  std::vector<Tensor> out;
  for (double v : values) {
    std::vector<double> code(mean.data().begin(), mean.data().end());
    code[dim] = v;
    const std::size_t n = code.size();
    const GaussianParams post = wm.posterior.forward(tape, concat({h0, Tensor({1, n}, std::move(code))}, 1));
    out.push_back(stop_gradient(wm.decoder.forward(tape, concat({h0, post.mean}, 1))));
  }
  return out;
}

TraversalFn traversal_fn(const VideoPredictor& model) {
  return [&model](const Tensor& anchor, std::size_t dim, const std::vector<double>& values) {
    return traversal(model, anchor, dim, values);
  };
}

TraversalFn traversal_fn(const WorldModel& wm) {
  return [&wm](const Tensor& anchor, std::size_t dim, const std::vector<double>& values) {
    return world_model_traversal(wm, anchor, dim, values);
  };
}

std::vector<std::filesystem::path> export_traversals(const TraversalFn& fn, std::size_t code_dim,
                                                     std::size_t height, std::size_t width,
                                                     const std::vector<Tensor>& anchors,
                                                     const std::vector<double>& values,
                                                     const std::filesystem::path& out_dir,
                                                     const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    std::vector<std::vector<RgbImage>> grid;
    for (std::size_t d = 0; d < code_dim; ++d) {
      std::vector<RgbImage> row;
      for (const Tensor& frame : fn(anchors[a], d, values)) row.push_back(quantize_frame(frame, height, width));
      grid.push_back(std::move(row));
    }
    const auto path = out_dir / (stem + "_anchor_" + std::to_string(a) + ".ppm");
    write_ppm(path, tile_grid(grid));
    written.push_back(path);
  }
  return written;
}

}  // namespace diswm

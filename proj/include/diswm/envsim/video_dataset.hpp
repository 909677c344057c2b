#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "diswm/envsim/envs.hpp"

namespace diswm {

struct VideoEpisode {
  std::vector<Observation> frames;
  /// One factor vector per frame; ground truth for scoring only.
  std::vector<FactorVector> factors;
};

struct VideoDataset {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<VideoEpisode> episodes;

  std::size_t frame_count() const;
  std::size_t obs_dim() const { return height * width * 3; }
};

enum class SchemeMix { a, b, both };

struct VideoDatasetConfig {
  SourceEnvConfig source;
  std::size_t total_frames = 50000;
  /// `both` renders the first half of the episodes with scheme A, the rest with B.
  SchemeMix schemes = SchemeMix::both;
};

inline constexpr std::uint32_t kVideoFormatVersion = 1;

/// Renders exactly `total_frames` frames in clips of the source episode
/// length (the last clip may be shorter).
VideoDataset gen_video_dataset(const VideoDatasetConfig& config, Rng& rng);

/// Binary shard: "DWMV", u32 version, u32 height, u32 width, u32 episodes;
/// per episode u32 frames, u32 factor count + f64 factors (9 per frame),
/// then f32 frames [H·W·3]. Little-endian.
void save_video_dataset(const std::filesystem::path& path, const VideoDataset& dataset);

/// Loads a shard, or a UTF-8 manifest listing shard paths one per line
/// (relative paths resolve against the manifest's directory). Throws
/// IoError / LoadError.
VideoDataset load_video_dataset(const std::filesystem::path& path);

void save_manifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& shards);

}  // namespace diswm

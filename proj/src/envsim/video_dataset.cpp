#include "diswm/envsim/video_dataset.hpp"

#include <fstream>
#include <sstream>

#include "diswm/diffcore/binary_io.hpp"

namespace diswm {

namespace {

constexpr char kMagic[] = "DWMV";

void load_shard(ByteReader& in, VideoDataset& out, bool first) {
  if (in.get_string(4) != kMagic) in.fail("bad magic, not a video dataset");
  const auto version = in.get<std::uint32_t>();
  if (version != kVideoFormatVersion) in.fail("unsupported video format version " + std::to_string(version));
  const auto height = in.get<std::uint32_t>();
  const auto width = in.get<std::uint32_t>();
  if (height == 0 || width == 0) in.fail("zero frame size");
  if (first) {
    out.height = height;
    out.width = width;
  } else if (height != out.height || width != out.width) {
    in.fail("shard frame size differs from earlier shards");
  }
  const auto episodes = in.get<std::uint32_t>();
  const std::size_t frame_size = std::size_t{height} * width * 3;
  for (std::uint32_t e = 0; e < episodes; ++e) {
    const auto frames = in.get<std::uint32_t>();
    const auto factor_count = in.get<std::uint32_t>();
    if (factor_count != std::size_t{frames} * FactorVector::kCount) {
      in.fail("episode " + std::to_string(e) + " factor count does not match its frames");
    }
    const auto factors = in.get_array<double>(factor_count);
    if (frame_size * frames > in.remaining() / sizeof(float)) in.fail("frames exceed file size");
    VideoEpisode ep;
    ep.frames.reserve(frames);
    ep.factors.reserve(frames);
    for (std::uint32_t t = 0; t < frames; ++t) {
      ep.factors.push_back(FactorVector::from_array(
          std::span<const double>(factors).subspan(t * FactorVector::kCount, FactorVector::kCount)));
      ep.frames.push_back(Observation{height, width, in.get_array<float>(frame_size)});
    }
    out.episodes.push_back(std::move(ep));
  }
  if (in.remaining() != 0) in.fail("trailing bytes after last episode");
}

}  // namespace

std::size_t VideoDataset::frame_count() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.frames.size();
  return n;
}

VideoDataset gen_video_dataset(const VideoDatasetConfig& config, Rng& rng) {
  if (config.total_frames == 0) throw ConfigError("total_frames must be positive");
  VideoDataset ds;
  ds.height = config.source.height;
  ds.width = config.source.width;
  SourceEnv env(config.source);
  const std::size_t len = config.source.episode_length;
  const std::size_t n_episodes = (config.total_frames + len - 1) / len;
  std::size_t remaining = config.total_frames;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    ColorScheme scheme = ColorScheme::A;
    if (config.schemes == SchemeMix::b || (config.schemes == SchemeMix::both && 2 * e >= n_episodes)) {
      scheme = ColorScheme::B;
    }
    env.set_color_scheme(scheme);
    const std::size_t frames = std::min(len, remaining);
    Rng clip_rng = rng.split(e);
    if (frames >= 2) {
      SourceClip clip = env.rollout(clip_rng, frames);
      ds.episodes.push_back({std::move(clip.frames), std::move(clip.factors)});
    } else {
      SourceClip clip = env.rollout(clip_rng, 2);
      ds.episodes.push_back({{clip.frames[0]}, {clip.factors[0]}});
    }
    remaining -= frames;
  }
  return ds;
}

void save_video_dataset(const std::filesystem::path& path, const VideoDataset& ds) {
  ByteWriter out;
  out.put_bytes(kMagic);
  out.put<std::uint32_t>(kVideoFormatVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(ds.height));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(ds.width));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(ds.episodes.size()));
  for (const auto& ep : ds.episodes) {
    if (ep.factors.size() != ep.frames.size()) throw ContractError("episode factors and frames differ in length");
    out.put<std::uint32_t>(static_cast<std::uint32_t>(ep.frames.size()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(ep.frames.size() * FactorVector::kCount));
    for (const auto& f : ep.factors) {
      const auto arr = f.to_array();
      out.put_array<double>(arr);
    }
    for (const auto& frame : ep.frames) {
      if (frame.height != ds.height || frame.width != ds.width) throw ContractError("frame size mismatch");
      out.put_array<float>(frame.pixels);
    }
  }
  out.save(path);
}

VideoDataset load_video_dataset(const std::filesystem::path& path) {
  VideoDataset ds;
  char magic[4] = {};
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open '" + path.string() + "'");
    probe.read(magic, 4);
  }
  if (std::string_view(magic, 4) == kMagic) {
    ByteReader in = ByteReader::open(path);
    load_shard(in, ds, true);
    return ds;
  }
  std::ifstream manifest(path);
  if (!manifest) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  bool first = true;
  while (std::getline(manifest, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::filesystem::path shard = line;
    if (shard.is_relative()) shard = path.parent_path() / shard;
    ByteReader in = ByteReader::open(shard);
    load_shard(in, ds, first);
    first = false;
  }
  if (first) throw LoadError("'" + path.string() + "' is neither a video shard nor a non-empty manifest");
  return ds;
}

void save_manifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& shards) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& s : shards) out << s.string() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace diswm

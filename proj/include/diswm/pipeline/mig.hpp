#pragma once

#include <string>
#include <vector>

#include "diswm/envsim/video_dataset.hpp"
#include "diswm/pretrain/video_predictor.hpp"

namespace diswm {

struct MigReport {
  std::vector<std::string> factors;
  /// mutual_info[f][d] in nats.
  std::vector<std::vector<double>> mutual_info;
  std::vector<double> factor_entropy;
  /// (top1 − top2) / H(f) per factor.
  std::vector<double> gaps;
  double mig = 0.0;
};

/// Quantile bin index per sample. Equal values share a bin, so a constant
/// column lands in a single bin.
std::vector<std::size_t> quantile_bins(const std::vector<double>& values, std::size_t bins);

/// Plug-in mutual information of two discrete columns, nats.
double discrete_mutual_info(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);
double discrete_entropy(const std::vector<std::size_t>& a);

/// latents[d][n] and factors[f][n]. Factors with zero entropy after binning
/// are rejected with ConfigError.
MigReport mig_from_samples(const std::vector<std::vector<double>>& latents,
                           const std::vector<std::vector<double>>& factors,
                           const std::vector<std::string>& factor_names, std::size_t bins);

/// Encodes every frame (up to max_samples, evenly strided) to its code mean
/// and scores it against the named ground-truth factors.
MigReport mig_score(const FrozenEncoder& encoder, const VideoDataset& dataset,
                    const std::vector<std::string>& factor_names, std::size_t bins = 20,
                    std::size_t max_samples = 10000);

/// Factors whose values vary across the dataset.
std::vector<std::string> varying_factors(const VideoDataset& dataset);

}  // namespace diswm

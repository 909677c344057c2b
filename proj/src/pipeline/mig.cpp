#include "diswm/pipeline/mig.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

std::vector<std::size_t> quantile_bins(const std::vector<double>& values, std::size_t bins) {
  if (bins == 0) throw ConfigError("bins must be positive");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> edges;
  for (std::size_t k = 1; k < bins; ++k) {
    if (n > 0) edges.push_back(sorted[k * n / bins]);
  }
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
  }
  return out;
}

double discrete_entropy(const std::vector<std::size_t>& a) {
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t v : a) ++counts[v];
  const double n = static_cast<double>(a.size());
  double h = 0.0;
  for (const auto& [v, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

double discrete_mutual_info(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) throw ShapeError("mutual information needs equally long columns");
  if (a.empty()) return 0.0;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
  std::map<std::size_t, std::size_t> pa, pb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++pa[a[i]];
    ++pb[b[i]];
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pxy = static_cast<double>(c) / n;
    mi += pxy * std::log(pxy * n * n / (static_cast<double>(pa[key.first]) * static_cast<double>(pb[key.second])));
  }
  return std::max(mi, 0.0);
}

MigReport mig_from_samples(const std::vector<std::vector<double>>& latents,
                           const std::vector<std::vector<double>>& factors,
                           const std::vector<std::string>& factor_names, std::size_t bins) {
  if (factors.size() != factor_names.size()) throw ShapeError("one name per factor column required");
  if (latents.empty()) throw ShapeError("MIG needs at least one latent dimension");
  std::vector<std::vector<std::size_t>> lat_bins;
  for (const auto& col : latents) lat_bins.push_back(quantile_bins(col, bins));

  MigReport rep;
  rep.factors = factor_names;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const auto fb = quantile_bins(factors[f], bins);
    const double h = discrete_entropy(fb);
    if (h <= 0.0) throw ConfigError("factor '" + factor_names[f] + "' is constant over the samples");
    std::vector<double> mi;
    for (const auto& lb : lat_bins) mi.push_back(discrete_mutual_info(lb, fb));
    std::vector<double> sorted(mi);
    std::sort(sorted.rbegin(), sorted.rend());
    const double second = sorted.size() > 1 ? sorted[1] : 0.0;
    rep.gaps.push_back(std::clamp((sorted[0] - second) / h, 0.0, 1.0));
    rep.factor_entropy.push_back(h);
    rep.mutual_info.push_back(std::move(mi));
  }
  double s = 0.0;
  for (double g : rep.gaps) s += g;
  rep.mig = rep.gaps.empty() ? 0.0 : s / static_cast<double>(rep.gaps.size());
  return rep;
}

MigReport mig_score(const FrozenEncoder& encoder, const VideoDataset& dataset,
                    const std::vector<std::string>& factor_names, std::size_t bins, std::size_t max_samples) {
  const std::size_t total = dataset.frame_count();
  if (total == 0) throw ConfigError("MIG needs a non-empty dataset");
  const std::size_t n = std::min(total, max_samples);
  const std::size_t obs_dim = dataset.obs_dim();
  std::vector<std::size_t> factor_idx;
  for (const auto& name : factor_names) factor_idx.push_back(FactorVector::index_of(name));

  std::vector<const Observation*> frames;
  std::vector<const FactorVector*> truth;
  for (const auto& ep : dataset.episodes) {
    for (std::size_t t = 0; t < ep.frames.size(); ++t) {
      frames.push_back(&ep.frames[t]);
      truth.push_back(&ep.factors[t]);
    }
  }
  std::vector<std::vector<double>> factors(factor_idx.size(), std::vector<double>(n));
  std::vector<std::vector<double>> latents;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t m = std::min(kChunk, n - start);
    std::vector<double> obs(m * obs_dim);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = (start + i) * total / n;
      std::copy(frames[k]->pixels.begin(), frames[k]->pixels.end(), obs.begin() + static_cast<std::ptrdiff_t>(i * obs_dim));
      const auto fa = truth[k]->to_array();
      for (std::size_t f = 0; f < factor_idx.size(); ++f) factors[f][start + i] = fa[factor_idx[f]];
    }
    const GaussianParams code = encoder.forward(Tensor({m, obs_dim}, std::move(obs)));
    const std::size_t d = code.dim();
    if (latents.empty()) latents.assign(d, std::vector<double>(n));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < d; ++j) latents[j][start + i] = code.mean.at(i, j);
    }
  }
  return mig_from_samples(latents, factors, factor_names, bins);
}

std::vector<std::string> varying_factors(const VideoDataset& dataset) {
  std::vector<std::string> out;
  const auto& names = FactorVector::names();
  for (std::size_t f = 0; f < FactorVector::kCount; ++f) {
    bool first = true, varies = false;
    double v0 = 0.0;
    for (const auto& ep : dataset.episodes) {
      for (const auto& fv : ep.factors) {
        const double v = fv.to_array()[f];
        if (first) {
          v0 = v;
          first = false;
        } else if (v != v0) {
          varies = true;
        }
      }
    }
    if (varies) out.emplace_back(names[f]);
  }
  return out;
}

}  // namespace diswm

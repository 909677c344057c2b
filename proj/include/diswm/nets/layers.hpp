#pragma once

#include <string>
#include <vector>

#include "diswm/diffcore/gaussian.hpp"
#include "diswm/diffcore/rng.hpp"
#include "diswm/diffcore/tape.hpp"

namespace diswm {

enum class Activation { elu, tanh, none };

/// [in, hidden..., out]
std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out);

/// Glorot-uniform weights in [−s, s], s = sqrt(6 / (fan_in + fan_out)).
std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// y = act(x · W + b) with W [in, out], b [out].
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(Tape& tape, const Tensor& x, Activation act = Activation::none) const;
  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }

  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;

  Param weight;
  Param bias;
};

/// Stack of Linear layers with an activation between them (none after the
/// last layer).
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Rng& rng,
      Activation hidden = Activation::elu);

  Tensor forward(Tape& tape, const Tensor& x) const;
  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }
  const std::vector<Linear>& layers() const { return layers_; }

  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;

 private:
  std::vector<Linear> layers_;
  Activation hidden_ = Activation::elu;
};

Tensor activate(Activation act, const Tensor& x);

/// Gated recurrent cell over [input, hidden]. One matmul produces reset,
/// candidate and update pre-activations:
///   h' = u ⊙ tanh(r ⊙ c) + (1 − u) ⊙ h,  r = σ(·), u = σ(·).
class GruCell {
 public:
  GruCell() = default;
  GruCell(const std::string& name, std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  Tensor step(Tape& tape, const Tensor& h, const Tensor& x) const;
  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;

  Param weight;
  Param bias;

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
};

/// MLP whose output parameterizes a diagonal Gaussian (mean, softplus std + floor).
class GaussianHead {
 public:
  GaussianHead() = default;
  GaussianHead(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden, std::size_t dim,
               Rng& rng, double min_std = kDefaultMinStd);

  GaussianParams forward(Tape& tape, const Tensor& x) const;
  std::size_t dim() const { return mlp_.out_features() / 2; }
  double min_std() const { return min_std_; }

  void collect(ParamRefs& out) { mlp_.collect(out); }
  void collect(ConstParamRefs& out) const { mlp_.collect(out); }

 private:
  Mlp mlp_;
  double min_std_ = kDefaultMinStd;
};

template <typename Module>
ParamRefs params_of(Module& m) {
  ParamRefs out;
  m.collect(out);
  return out;
}

template <typename Module>
ConstParamRefs params_of(const Module& m) {
  ConstParamRefs out;
  m.collect(out);
  return out;
}

}  // namespace diswm

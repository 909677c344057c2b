#include "diswm/nets/layers.hpp"

#include <cmath>

#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/ops.hpp"

namespace diswm {

std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (double& v : w) v = rng.uniform(-s, s);
  return w;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + "/weight", {in, out}, glorot_uniform(in, out, rng)),
      bias(name + "/bias", {out}, std::vector<double>(out, 0.0)) {}

namespace {

std::optional<UnaryOp> unary_of(Activation act) {
  switch (act) {
    case Activation::elu: return UnaryOp::elu;
    case Activation::tanh: return UnaryOp::tanh;
    case Activation::none: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

Tensor Linear::forward(Tape& tape, const Tensor& x, Activation act) const {
  if (x.rank() != 2 || x.dim(1) != in_features()) {
    throw ShapeError(weight.name() + ": expected [batch, " + std::to_string(in_features()) + "], got " +
                     shape_str(x.shape()));
  }
  return dense(x, tape.bind(weight), tape.bind(bias), unary_of(act));
}

void Linear::collect(ParamRefs& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

void Linear::collect(ConstParamRefs& out) const {
  out.push_back(&weight);
  out.push_back(&bias);
}

Tensor activate(Activation act, const Tensor& x) {
  switch (act) {
    case Activation::elu: return elu(x);
    case Activation::tanh: return tanh(x);
    case Activation::none: return x;
  }
  return x;
}

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Rng& rng, Activation hidden)
    : hidden_(hidden) {
  if (sizes.size() < 2) throw ConfigError(name + ": an MLP needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers_.emplace_back(name + "/" + std::to_string(i), sizes[i], sizes[i + 1], rng);
  }
}

Tensor Mlp::forward(Tape& tape, const Tensor& x) const {
  Tensor y = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    y = layers_[i].forward(tape, y, i + 1 < layers_.size() ? hidden_ : Activation::none);
  }
  return y;
}

void Mlp::collect(ParamRefs& out) {
  for (auto& l : layers_) l.collect(out);
}

void Mlp::collect(ConstParamRefs& out) const {
  for (const auto& l : layers_) l.collect(out);
}

GruCell::GruCell(const std::string& name, std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
    : weight(name + "/weight", {input_dim + hidden_dim, 3 * hidden_dim},
             glorot_uniform(input_dim + hidden_dim, 3 * hidden_dim, rng)),
      bias(name + "/bias", {3 * hidden_dim}, std::vector<double>(3 * hidden_dim, 0.0)),
      input_dim_(input_dim),
      hidden_dim_(hidden_dim) {}

Tensor GruCell::step(Tape& tape, const Tensor& h, const Tensor& x) const {
  if (h.rank() != 2 || x.rank() != 2 || h.dim(1) != hidden_dim_ || x.dim(1) != input_dim_ || h.dim(0) != x.dim(0)) {
    throw ShapeError(weight.name() + ": bad step shapes h=" + shape_str(h.shape()) + " x=" + shape_str(x.shape()));
  }
  const Tensor parts = dense(concat({x, h}, 1), tape.bind(weight), tape.bind(bias));
  const std::size_t d = hidden_dim_;
  const Tensor reset = sigmoid(slice(parts, 1, 0, d));
  const Tensor cand = tanh(reset * slice(parts, 1, d, d));
  const Tensor update = sigmoid(slice(parts, 1, 2 * d, d));
  return update * cand + (1.0 - update) * h;
}

void GruCell::collect(ParamRefs& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

void GruCell::collect(ConstParamRefs& out) const {
  out.push_back(&weight);
  out.push_back(&bias);
}

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

GaussianHead::GaussianHead(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden,
                           std::size_t dim, Rng& rng, double min_std)
    : mlp_(name, layer_sizes(in, hidden, 2 * dim), rng), min_std_(min_std) {}

GaussianParams GaussianHead::forward(Tape& tape, const Tensor& x) const {
  return gaussian_from_raw(mlp_.forward(tape, x), min_std_);
}

}  // namespace diswm

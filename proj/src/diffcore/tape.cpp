#include "diswm/diffcore/tape.hpp"

#include <cmath>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

std::span<const double> Gradients::of(const Param& p) const {
  auto it = by_param_.find(&p);
  if (it == by_param_.end()) return {};
  return it->second;
}

std::vector<double> Gradients::get(const Param& p) const {
  auto it = by_param_.find(&p);
  if (it == by_param_.end()) return std::vector<double>(p.numel(), 0.0);
  return it->second;
}

std::span<const double> Gradients::of(const Tensor& leaf) const {
  auto it = by_leaf_.find(leaf.node());
  if (!leaf.on_tape() || it == by_leaf_.end()) return {};
  return it->second;
}

ConstParamRefs Gradients::params() const { return order_; }

double Gradients::global_norm() const {
  double sq = 0.0;
  for (const auto* p : order_) {
    for (double g : by_param_.at(p)) sq += g * g;
  }
  return std::sqrt(sq);
}

void Gradients::scale(double factor) {
  for (auto& [p, g] : by_param_) {
    for (double& v : g) v *= factor;
  }
}

void Tape::track_only(std::span<Param* const> params) {
  restricted_ = true;
  for (const Param* p : params) tracked_.insert(p);
}

void Tape::track_only(std::span<const Param* const> params) {
  restricted_ = true;
  for (const Param* p : params) tracked_.insert(p);
}

bool Tape::tracks(const Param& p) const {
  if (p.frozen()) return false;
  return !restricted_ || tracked_.contains(&p);
}

Tensor Tape::bind(const Param& p) {
  if (frozen_) throw ContractError("tape is frozen after backward");
  if (!tracks(p)) return p.as_constant();
  auto it = bound_.find(&p);
  if (it != bound_.end()) {
    return Tensor(p.shape(), p.as_constant().storage(), this, it->second);
  }
  Node node;
  node.numel = p.numel();
  node.param = &p;
  node.leaf = true;
  nodes_.push_back(std::move(node));
  bound_.emplace(&p, nodes_.size() - 1);
  return Tensor(p.shape(), p.as_constant().storage(), this, nodes_.size() - 1);
}

Tensor Tape::leaf(const Tensor& value) {
  if (frozen_) throw ContractError("tape is frozen after backward");
  Node node;
  node.numel = value.numel();
  node.leaf = true;
  nodes_.push_back(std::move(node));
  return Tensor(value.shape(), value.storage(), this, nodes_.size() - 1);
}

Tensor Tape::record(Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs, Vjp vjp) {
  return record(std::move(shape), std::move(value), std::span<const Tensor>(inputs.begin(), inputs.size()),
                std::move(vjp));
}

Tensor Tape::record(Shape shape, std::vector<double> value, std::span<const Tensor> inputs, Vjp vjp) {
  return record(std::move(shape), std::make_shared<const std::vector<double>>(std::move(value)), inputs,
                std::move(vjp));
}

Tensor Tape::record(Shape shape, std::shared_ptr<const std::vector<double>> value, std::span<const Tensor> inputs,
                    Vjp vjp) {
  if (frozen_) throw ContractError("tape is frozen after backward");
  Node node;
  node.numel = value->size();
  node.vjp = std::move(vjp);
  node.inputs.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    node.inputs.push_back(in.tape() == this ? in.node() : SIZE_MAX);
  }
  nodes_.push_back(std::move(node));
  return Tensor(std::move(shape), std::move(value), this, nodes_.size() - 1);
}

Gradients Tape::backward(const Tensor& loss) {
  if (frozen_) throw ContractError("backward called twice on the same tape");
  if (loss.numel() != 1) throw ContractError("backward needs a scalar loss, got " + shape_str(loss.shape()));
  frozen_ = true;
  visits_ = 0;
  Gradients out;
  if (loss.tape() != this) return out;

  std::vector<std::vector<double>> grads(nodes_.size());
  grads[loss.node()].assign(1, 1.0);
  std::vector<std::vector<double>*> input_grads;
  for (std::size_t i = loss.node() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (grads[i].empty()) continue;
    ++visits_;
    if (node.leaf) {
      if (node.param) {
        out.order_.push_back(node.param);
        out.by_param_.emplace(node.param, std::move(grads[i]));
      } else {
        out.by_leaf_.emplace(i, std::move(grads[i]));
      }
      continue;
    }
    input_grads.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::size_t j = node.inputs[k];
      if (j == SIZE_MAX) continue;
      if (grads[j].empty()) grads[j].assign(nodes_[j].numel, 0.0);
      input_grads[k] = &grads[j];
    }
    node.vjp(grads[i], input_grads);
    grads[i].clear();
    grads[i].shrink_to_fit();
    node.vjp = nullptr;
  }
  return out;
}

std::size_t Tape::count_param_leaves(std::span<const Param* const> params) const {
  std::size_t n = 0;
  for (const Param* p : params) n += bound_.contains(p) ? 1 : 0;
  return n;
}

Tape* common_tape(std::span<const Tensor> inputs) {
  Tape* tape = nullptr;
  for (const Tensor& t : inputs) {
    if (!t.tape()) continue;
    if (tape && tape != t.tape()) throw ContractError("operation mixes tensors from different tapes");
    tape = t.tape();
  }
  return tape;
}

}  // namespace diswm

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "diswm/diffcore/tensor.hpp"

namespace diswm {

/// Vector-Jacobian product of one node. `input_grads[i]` is null for
/// inputs that are constants; otherwise it points to an accumulator of the
/// input's size that the function must add into.
using Vjp = std::function<void(std::span<const double> out_grad, std::span<std::vector<double>* const> input_grads)>;

/// Gradients produced by Tape::backward, keyed by parameter and by leaf.
class Gradients {
 public:
  bool contains(const Param& p) const { return by_param_.contains(&p); }
  /// Empty span when the parameter received no gradient.
  std::span<const double> of(const Param& p) const;
  /// Gradient of `p`, zeros when it is unreachable from the loss.
  std::vector<double> get(const Param& p) const;
  std::span<const double> of(const Tensor& leaf) const;
  ConstParamRefs params() const;
  std::size_t size() const noexcept { return by_param_.size(); }
  double global_norm() const;

  void scale(double factor);

 private:
  friend class Tape;
  std::unordered_map<const Param*, std::vector<double>> by_param_;
  std::unordered_map<std::size_t, std::vector<double>> by_leaf_;
  std::vector<const Param*> order_;
};

/// Append-only record of differentiable operations for one loss evaluation.
///
/// Parameters enter through bind(): a parameter that the tape tracks
/// becomes a leaf node, anything else (frozen or untracked) becomes a
/// constant. After backward() the tape is frozen and refuses new nodes.
class Tape {
 public:
  /// Tag for a tape that tracks no parameters (pure inference).
  struct NoGrad {};

  Tape() = default;
  explicit Tape(NoGrad) : restricted_(true) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Restrict tracking to the given parameters. Without a call, every
  /// unfrozen parameter bound to the tape is tracked.
  void track_only(std::span<Param* const> params);
  void track_only(std::span<const Param* const> params);
  void track_only(const ParamRefs& params) { track_only(std::span<Param* const>(params)); }
  void track_only(const ConstParamRefs& params) { track_only(std::span<const Param* const>(params)); }

  Tensor bind(const Param& p);
  /// Marks a value as a differentiable input (gradient reported by leaf).
  Tensor leaf(const Tensor& value);

  /// Appends a node; inputs not on this tape are treated as constants.
  Tensor record(Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs, Vjp vjp);
  Tensor record(Shape shape, std::vector<double> value, std::span<const Tensor> inputs, Vjp vjp);
  Tensor record(Shape shape, std::shared_ptr<const std::vector<double>> value, std::span<const Tensor> inputs,
                Vjp vjp);

  Gradients backward(const Tensor& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool frozen() const noexcept { return frozen_; }
  /// Nodes processed by the last backward pass.
  std::size_t visits() const noexcept { return visits_; }
  std::size_t count_param_leaves(std::span<const Param* const> params) const;

 private:
  struct Node {
    std::vector<std::size_t> inputs;
    Vjp vjp;
    std::size_t numel = 0;
    const Param* param = nullptr;
    bool leaf = false;
  };

  bool tracks(const Param& p) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Param*, std::size_t> bound_;
  std::unordered_set<const Param*> tracked_;
  bool restricted_ = false;
  bool frozen_ = false;
  std::size_t visits_ = 0;
};

/// Finds the tape shared by the inputs, or null when all are constants.
/// Throws ContractError when inputs live on different tapes.
Tape* common_tape(std::span<const Tensor> inputs);

}  // namespace diswm

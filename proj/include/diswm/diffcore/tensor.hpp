#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace diswm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

/// Dense row-major array of doubles. A tensor is either a constant or the
/// output of a node on a gradient tape. Values are immutable once created;
/// tensors share storage on copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const noexcept { return data_ != nullptr; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return data_ ? data_->size() : 0; }

  std::span<const double> data() const noexcept;
  const std::shared_ptr<const std::vector<double>>& storage() const noexcept { return data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t row, std::size_t col) const;
  /// Value of a single-element tensor.
  double item() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t node() const noexcept { return node_; }
  bool on_tape() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  friend class Param;
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data, Tape* tape, std::size_t node);

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

/// Named trainable array owned by a network module. Copies are deep.
/// Storage is copy-on-write with respect to tensors that alias it, so a
/// tensor produced from a parameter never changes after creation.
class Param {
 public:
  Param() = default;
  Param(std::string name, Shape shape, std::vector<double> value);
  Param(const Param& other);
  Param& operator=(const Param& other);
  Param(Param&&) noexcept = default;
  Param& operator=(Param&&) noexcept = default;

  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return value_ ? value_->size() : 0; }

  std::span<const double> value() const noexcept;
  /// Throws ContractError when the parameter is frozen.
  std::span<double> mutable_value();
  void assign(std::span<const double> values);

  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  /// Constant tensor sharing the parameter's current storage.
  Tensor as_constant() const;

 private:
  std::string name_;
  Shape shape_;
  std::shared_ptr<std::vector<double>> value_;
  bool frozen_ = false;
};

using ParamRefs = std::vector<Param*>;
using ConstParamRefs = std::vector<const Param*>;

}  // namespace diswm

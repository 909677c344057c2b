#include "diswm/diffcore/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void validate(const Shape& shape, std::size_t size) {
  if (std::any_of(shape.begin(), shape.end(), [](std::size_t d) { return d == 0; })) {
    throw ShapeError("tensor dimensions must be >= 1, got " + shape_str(shape));
  }
  if (shape_numel(shape) != size) {
    throw ShapeError("shape " + shape_str(shape) + " does not match " + std::to_string(size) + " values");
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  validate(shape_, data.size());
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor::Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data, Tape* tape, std::size_t node)
    : shape_(std::move(shape)), data_(std::move(data)), tape_(tape), node_(node) {}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
  }
  return shape_[axis];
}

std::span<const double> Tensor::data() const noexcept {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("at(row, col) needs a rank-2 tensor, got " + shape_str(shape_));
  return (*data_)[row * shape_[1] + col];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single element, got " + shape_str(shape_));
  return (*data_)[0];
}

Param::Param(std::string name, Shape shape, std::vector<double> value)
    : name_(std::move(name)), shape_(std::move(shape)) {
  validate(shape_, value.size());
  value_ = std::make_shared<std::vector<double>>(std::move(value));
}

Param::Param(const Param& other)
    : name_(other.name_),
      shape_(other.shape_),
      value_(other.value_ ? std::make_shared<std::vector<double>>(*other.value_) : nullptr),
      frozen_(other.frozen_) {}

Param& Param::operator=(const Param& other) {
  if (this != &other) {
    Param copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::span<const double> Param::value() const noexcept {
  if (!value_) return {};
  return {value_->data(), value_->size()};
}

std::span<double> Param::mutable_value() {
  if (frozen_) throw ContractError("parameter '" + name_ + "' is frozen");
  if (value_.use_count() > 1) value_ = std::make_shared<std::vector<double>>(*value_);
  return {value_->data(), value_->size()};
}

void Param::assign(std::span<const double> values) {
  if (values.size() != numel()) {
    throw ShapeError("assign to '" + name_ + "': expected " + std::to_string(numel()) + " values, got " +
                     std::to_string(values.size()));
  }
  auto dst = mutable_value();
  std::copy(values.begin(), values.end(), dst.begin());
}

Tensor Param::as_constant() const {
  return Tensor(shape_, std::shared_ptr<const std::vector<double>>(value_), nullptr, 0);
}

}  // namespace diswm

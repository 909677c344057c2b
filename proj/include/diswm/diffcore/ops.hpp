#pragma once

#include <optional>
#include <span>
#include <vector>

#include "diswm/diffcore/tape.hpp"
#include "diswm/diffcore/tensor.hpp"

namespace diswm {

enum class BinaryOp { add, sub, mul, div };
enum class UnaryOp { exp, log, tanh, sigmoid, softplus, elu, square, neg };

// Elementwise. Binary ops broadcast by trailing-dimension rules.
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(UnaryOp op, const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor elu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor neg(const Tensor& a);

Tensor scale(const Tensor& a, double factor);
Tensor shift(const Tensor& a, double offset);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return shift(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return shift(a, -s); }
inline Tensor operator+(double s, const Tensor& a) { return shift(a, s); }
inline Tensor operator-(double s, const Tensor& a) { return shift(neg(a), s); }

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// act(x·w + b) for x [m,k], w [k,n], b [n] as one tape node. Values and
/// gradients match the unfused matmul, add and activation ops exactly.
/// act is one of none, elu, tanh.
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b, std::optional<UnaryOp> act = std::nullopt);

enum class ReduceOp { sum, mean };
Tensor reduce(ReduceOp op, const Tensor& a, std::span<const std::size_t> axes, bool keepdims = false);
Tensor sum(const Tensor& a, std::initializer_list<std::size_t> axes, bool keepdims = false);
Tensor mean(const Tensor& a, std::initializer_list<std::size_t> axes, bool keepdims = false);
/// Reductions over all elements, returning shape [1].
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

/// Forward identity, backward annihilator.
Tensor stop_gradient(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);

}  // namespace diswm

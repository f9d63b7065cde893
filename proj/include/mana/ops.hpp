#pragma once

#include <cstddef>

#include "mana/tensor.hpp"

namespace mana {

// Elementwise arithmetic. Tensor-tensor forms require identical shapes; the
// only broadcast supported is tensor-scalar.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);

/// (m x k) . (k x n)
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);

/// Same values viewed under another shape of equal element count.
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// Slice index i of the leading axis.
template <typename T> Tensor<T> select(const Tensor<T>& a, std::size_t i);

/// Swap the first two axes of a rank-4 tensor: (A, B, H, W) -> (B, A, H, W).
template <typename T> Tensor<T> swap_leading_axes(const Tensor<T>& a);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

/// mean(|a - b|); subgradient sign(a - b), zero at equality.
template <typename T> Tensor<T> mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

} // namespace mana

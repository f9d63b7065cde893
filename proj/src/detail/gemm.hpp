#pragma once

#include <cstddef>
#include <vector>

namespace mana::detail {

// Row-major GEMM kernels with a fixed reduction order. c is accumulated into.

/// c[m x n] += a[m x k] * b[k x n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c)
{
    for (std::size_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        const T* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ai[p];
            if (av == T(0)) continue;
            const T* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

template <typename T>
void transpose_into(std::size_t rows, std::size_t cols, const T* src, T* dst)
{
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

/// c[m x n] += a[m x k] * b^T where b is [n x k]
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c)
{
    std::vector<T> bt(k * n);
    transpose_into(n, k, b, bt.data());
    gemm_nn(m, n, k, a, bt.data(), c);
}

/// c[m x n] += a^T * b where a is [k x m], b is [k x n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c)
{
    std::vector<T> at(m * k);
    transpose_into(k, m, a, at.data());
    gemm_nn(m, n, k, at.data(), b, c);
}

} // namespace mana::detail

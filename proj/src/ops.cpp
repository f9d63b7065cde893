#include "mana/ops.hpp"

#include <cmath>

#include "detail/gemm.hpp"
#include "mana/probe.hpp"

namespace mana {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op)
{
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op)
{
    if (a.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(a.shape()));
    }
}

} // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "add");
    Tensor<T> out(a.shape());
    auto o = out.mutable_data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
    detail::check_finite(out, "add");
    detail::record<T>(out, {&a, &b}, [](std::span<const T> g, detail::GradSink<T>& sink) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (T* d = sink(k))
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
    });
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "sub");
    Tensor<T> out(a.shape());
    auto o = out.mutable_data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
    detail::check_finite(out, "sub");
    detail::record<T>(out, {&a, &b}, [](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* da = sink(0))
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
        if (T* db = sink(1))
            for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
    });
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "mul");
    Tensor<T> out(a.shape());
    auto o = out.mutable_data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
    detail::check_finite(out, "mul");
    detail::record<T>(out, {&a, &b}, [a = a.detach(), b = b.detach()](std::span<const T> g, detail::GradSink<T>& sink) {
        auto x = a.data();
        auto y = b.data();
        if (T* da = sink(0))
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
        if (T* db = sink(1))
            for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
    });
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s)
{
    Tensor<T> out(a.shape());
    auto o = out.mutable_data();
    auto x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * s;
    detail::check_finite(out, "scale");
    detail::record<T>(out, {&a}, [s](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0))
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * s;
    });
    return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s)
{
    Tensor<T> out(a.shape());
    auto o = out.mutable_data();
    auto x = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + s;
    detail::check_finite(out, "add_scalar");
    detail::record<T>(out, {&a}, [](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0))
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
    return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b)
{
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
    }
    Tensor<T> out({m, n});
    detail::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.mutable_data().data());
    detail::check_finite(out, "matmul");
    detail::record<T>(out, {&a, &b},
                      [a = a.detach(), b = b.detach(), m, n, k](std::span<const T> g, detail::GradSink<T>& sink) {
                          if (T* da = sink(0)) detail::gemm_nt(m, k, n, g.data(), b.data().data(), da);
                          if (T* db = sink(1)) detail::gemm_tn(k, n, m, a.data().data(), g.data(), db);
                      });
    return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a)
{
    require_rank(a, 2, "transpose");
    const std::size_t r = a.dim(0), c = a.dim(1);
    Tensor<T> out({c, r});
    detail::transpose_into(r, c, a.data().data(), out.mutable_data().data());
    detail::record<T>(out, {&a}, [r, c](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0))
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g[j * r + i];
    });
    return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape)
{
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
    }
    auto values = a.data();
    Tensor<T> out(std::move(shape), std::vector<T>(values.begin(), values.end()));
    detail::record<T>(out, {&a}, [](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0))
            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
    return out;
}

template <typename T>
Tensor<T> select(const Tensor<T>& a, std::size_t i)
{
    if (a.rank() < 1 || i >= a.dim(0)) {
        throw ShapeError("select: index " + std::to_string(i) + " out of range for " + shape_string(a.shape()));
    }
    Shape shape(a.shape().begin() + 1, a.shape().end());
    const std::size_t stride = shape_numel(shape);
    auto src = a.data().subspan(i * stride, stride);
    Tensor<T> out(std::move(shape), std::vector<T>(src.begin(), src.end()));
    detail::record<T>(out, {&a}, [i, stride](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0))
            for (std::size_t j = 0; j < stride; ++j) d[i * stride + j] += g[j];
    });
    return out;
}

template <typename T>
Tensor<T> swap_leading_axes(const Tensor<T>& a)
{
    require_rank(a, 4, "swap_leading_axes");
    const std::size_t n0 = a.dim(0), n1 = a.dim(1), plane = a.dim(2) * a.dim(3);
    Tensor<T> out({n1, n0, a.dim(2), a.dim(3)});
    auto o = out.mutable_data();
    auto x = a.data();
    for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t j = 0; j < n1; ++j)
            std::copy_n(x.begin() + (i * n1 + j) * plane, plane, o.begin() + (j * n0 + i) * plane);
    detail::record<T>(out, {&a}, [n0, n1, plane](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0))
            for (std::size_t i = 0; i < n0; ++i)
                for (std::size_t j = 0; j < n1; ++j)
                    for (std::size_t p = 0; p < plane; ++p) d[(i * n1 + j) * plane + p] += g[(j * n0 + i) * plane + p];
    });
    return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a)
{
    T total = 0;
    for (T v : a.data()) total += v;
    Tensor<T> out = Tensor<T>::scalar(total);
    detail::check_finite(out, "sum");
    detail::record<T>(out, {&a}, [n = a.numel()](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0))
            for (std::size_t i = 0; i < n; ++i) d[i] += g[0];
    });
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a)
{
    if (a.numel() == 0) throw ShapeError("mean of an empty tensor");
    return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "mean_abs_diff");
    if (a.numel() == 0) throw ShapeError("mean_abs_diff of empty tensors");
    auto x = a.data();
    auto y = b.data();
    double total = 0;
    for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
    if (auto* probe = StructureProbe::active())
        for (std::size_t i = 0; i < x.size(); ++i) probe->mix(x[i] > y[i] ? 1 : (x[i] < y[i] ? 2 : 3));
    const T inv_n = T(1) / static_cast<T>(x.size());
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(x.size())));
    detail::check_finite(out, "mean_abs_diff");
    detail::record<T>(out, {&a, &b},
                      [a = a.detach(), b = b.detach(), inv_n](std::span<const T> g, detail::GradSink<T>& sink) {
                          auto x = a.data();
                          auto y = b.data();
                          T* da = sink(0);
                          T* db = sink(1);
                          for (std::size_t i = 0; i < x.size(); ++i) {
                              const T diff = x[i] - y[i];
                              const T s = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
                              if (da) da[i] += g[0] * inv_n * s;
                              if (db) db[i] -= g[0] * inv_n * s;
                          }
                      });
    return out;
}

#define MANA_INSTANTIATE_OPS(T)                                                   \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                             \
    template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                        \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);             \
    template Tensor<T> transpose<T>(const Tensor<T>&);                            \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                       \
    template Tensor<T> select<T>(const Tensor<T>&, std::size_t);                  \
    template Tensor<T> swap_leading_axes<T>(const Tensor<T>&);                    \
    template Tensor<T> sum<T>(const Tensor<T>&);                                  \
    template Tensor<T> mean<T>(const Tensor<T>&);                                 \
    template Tensor<T> mean_abs_diff<T>(const Tensor<T>&, const Tensor<T>&);

MANA_INSTANTIATE_OPS(float)
MANA_INSTANTIATE_OPS(double)

} // namespace mana

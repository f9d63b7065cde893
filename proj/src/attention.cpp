#include "mana/attention.hpp"

#include <cmath>
#include <limits>

#include "mana/ops.hpp"
#include "mana/probe.hpp"

namespace mana {

std::string to_string(TemporalReduce r)
{
    switch (r) {
    case TemporalReduce::sum: return "sum";
    case TemporalReduce::mean: return "mean";
    case TemporalReduce::global_max: return "global_max";
    }
    return "sum";
}

TemporalReduce parse_temporal_reduce(const std::string& s)
{
    if (s == "sum") return TemporalReduce::sum;
    if (s == "mean") return TemporalReduce::mean;
    if (s == "global_max") return TemporalReduce::global_max;
    throw ConfigError("unknown temporal reduction '" + s + "' (expected sum, mean or global_max)");
}

template <typename T>
QkvTensors<T> embed_qkv(const Tensor<T>& frames_norm, const QkvEmbeddings<T>& e)
{
    if (frames_norm.rank() != 4) {
        throw ShapeError("embed_qkv: expected T x C x H x W, got " + shape_string(frames_norm.shape()));
    }
    const std::size_t frames = frames_norm.dim(0);
    if (frames % 2 == 0) throw ShapeError("embed_qkv: frame count must be odd, got " + std::to_string(frames));
    QkvTensors<T> out;
    out.query = conv2d(select(frames_norm, (frames - 1) / 2), e.query);
    out.key = swap_leading_axes(conv2d(frames_norm, e.key));
    out.value = swap_leading_axes(conv2d(frames_norm, e.value));
    return out;
}

template <typename T>
OneHotAttnResult<T> cross_frame_one_hot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                                  std::size_t window, TemporalReduce reduce)
{
    if (q.rank() != 3) throw ShapeError("one-hot attention: query must be C' x H x W, got " + shape_string(q.shape()));
    if (k.rank() != 4 || v.rank() != 4) throw ShapeError("one-hot attention: key and value must be C' x T x H x W");
    if (k.shape() != v.shape()) {
        throw ShapeError("one-hot attention: key " + shape_string(k.shape()) + " and value " + shape_string(v.shape()) +
                         " differ");
    }
    const std::size_t ch = q.dim(0), h = q.dim(1), w = q.dim(2);
    if (k.dim(0) != ch || k.dim(2) != h || k.dim(3) != w) {
        throw ShapeError("one-hot attention: key " + shape_string(k.shape()) + " incompatible with query " +
                         shape_string(q.shape()));
    }
    const std::size_t frames = k.dim(1);
    const std::size_t hw = h * w;
    const WindowMask mask = window_mask(h, w, window);
    const std::size_t taps = mask.taps;
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(window / 2);

    const T* qd = q.data().data();
    const T* kd = k.data().data();
    const T* vd = v.data().data();

    // Correlation of every query pixel against its window, for all frames at
    // once: HW * k*k * T scalars.
    const std::size_t corr_size = hw * taps * frames;
    CorrelationLease lease(corr_size);
    std::vector<T> corr(corr_size, -std::numeric_limits<T>::infinity());

    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t p = y * w + x;
                T* row = corr.data() + (t * hw + p) * taps;
                for (std::size_t j = 0; j < taps; ++j) {
                    if (!mask.at(j, y, x)) continue;
                    const std::size_t sy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) +
                                                                    static_cast<std::ptrdiff_t>(j / window) - r);
                    const std::size_t sx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) +
                                                                    static_cast<std::ptrdiff_t>(j % window) - r);
                    const std::size_t src = sy * w + sx;
                    T acc = 0;
                    for (std::size_t c = 0; c < ch; ++c) acc += qd[c * hw + p] * kd[(c * frames + t) * hw + src];
                    row[j] = acc;
                }
            }
        }
    }

    OneHotAttnResult<T> result;
    result.frames = frames;
    result.scores = Tensor<T>({h, w, frames});
    result.indices.assign(hw * frames, 0);
    std::vector<std::size_t> source(hw * frames, 0);  // spatial index of the winning tap
    T* scores = result.scores.mutable_data().data();

    for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t y = p / w, x = p % w;
        for (std::size_t t = 0; t < frames; ++t) {
            const T* row = corr.data() + (t * hw + p) * taps;
            std::size_t best = taps;
            for (std::size_t j = 0; j < taps; ++j) {
                if (!mask.at(j, y, x)) continue;
                if (best == taps || row[j] > row[best]) best = j;
            }
            scores[p * frames + t] = row[best];
            result.indices[p * frames + t] = static_cast<std::int32_t>(best);
            const std::size_t sy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) +
                                                            static_cast<std::ptrdiff_t>(best / window) - r);
            const std::size_t sx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) +
                                                            static_cast<std::ptrdiff_t>(best % window) - r);
            source[p * frames + t] = sy * w + sx;
        }
    }
    if (auto* probe = StructureProbe::active()) {
        for (std::int32_t d : result.indices) probe->mix(static_cast<std::uint64_t>(d));
    }

    // Contribution weight of each (pixel, frame) selection.
    std::vector<T> weight(hw * frames, T(0));
    for (std::size_t p = 0; p < hw; ++p) {
        if (reduce == TemporalReduce::global_max) {
            std::size_t best_t = 0;
            for (std::size_t t = 1; t < frames; ++t)
                if (scores[p * frames + t] > scores[p * frames + best_t]) best_t = t;
            weight[p * frames + best_t] = T(1);
            if (auto* probe = StructureProbe::active()) probe->mix(best_t);
        } else {
            const T wt = reduce == TemporalReduce::mean ? T(1) / static_cast<T>(frames) : T(1);
            for (std::size_t t = 0; t < frames; ++t) weight[p * frames + t] = wt;
        }
    }

    Tensor<T> out({ch, h, w});
    T* o = out.mutable_data().data();
    for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t t = 0; t < frames; ++t) {
            const T wt = weight[p * frames + t];
            if (wt == T(0)) continue;
            const T s = scores[p * frames + t] * wt;
            const std::size_t src = source[p * frames + t];
            for (std::size_t c = 0; c < ch; ++c) o[c * hw + p] += s * vd[(c * frames + t) * hw + src];
        }
    }
    detail::check_finite(out, "cross_frame_one_hot_attention");

    detail::record<T>(out, {&q, &k, &v},
                      [q = q.detach(), k = k.detach(), v = v.detach(), scores = result.scores.detach(),
                       source = std::move(source), weight = std::move(weight), ch, hw,
                       frames](std::span<const T> g, detail::GradSink<T>& sink) {
                          T* dq = sink(0);
                          T* dk = sink(1);
                          T* dv = sink(2);
                          const T* qd = q.data().data();
                          const T* kd = k.data().data();
                          const T* vd = v.data().data();
                          for (std::size_t p = 0; p < hw; ++p) {
                              for (std::size_t t = 0; t < frames; ++t) {
                                  const T wt = weight[p * frames + t];
                                  if (wt == T(0)) continue;
                                  const std::size_t src = source[p * frames + t];
                                  const T s = scores[p * frames + t];
                                  T ds = 0;
                                  for (std::size_t c = 0; c < ch; ++c) {
                                      const std::size_t kv = (c * frames + t) * hw + src;
                                      ds += g[c * hw + p] * vd[kv];
                                      if (dv) dv[kv] += wt * s * g[c * hw + p];
                                  }
                                  ds *= wt;
                                  for (std::size_t c = 0; c < ch; ++c) {
                                      const std::size_t kv = (c * frames + t) * hw + src;
                                      if (dq) dq[c * hw + p] += ds * kd[kv];
                                      if (dk) dk[kv] += ds * qd[c * hw + p];
                                  }
                              }
                          }
                      });
    result.output = std::move(out);
    return result;
}

template <typename T>
Tensor<T> memory_attention_weights(const Tensor<T>& q, const MemoryBank<T>& bank)
{
    if (q.rank() != 3) throw ShapeError("memory attention: query must be C' x H x W, got " + shape_string(q.shape()));
    if (bank.m.rank() != 2 || bank.m.dim(0) != q.dim(0)) {
        throw ShapeError("memory attention: bank " + shape_string(bank.m.shape()) + " does not match query channels " +
                         std::to_string(q.dim(0)));
    }
    const std::size_t hw = q.dim(1) * q.dim(2);
    const Tensor<T> pixels = transpose(reshape(q, {q.dim(0), hw}));  // HW x C'
    return softmax(matmul(pixels, bank.m), 1);
}

template <typename T>
Tensor<T> memory_attention(const Tensor<T>& q, const MemoryBank<T>& bank)
{
    const Tensor<T> attn = memory_attention_weights(q, bank);   // HW x N
    const Tensor<T> mixed = matmul(attn, transpose(bank.m));    // HW x C'
    return reshape(transpose(mixed), q.shape());
}

template <typename T>
Tensor<T> fuse_residual(const Tensor<T>& f, const Tensor<T>& x, const Tensor<T>& y, const Conv2dParams<T>& fx,
                        const Conv2dParams<T>& fy)
{
    Tensor<T> out = add(f, conv2d(x, fx));
    if (!y.empty()) out = add(out, conv2d(y, fy));
    return out;
}

template <typename T>
Tensor<T> full_non_local_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v)
{
    if (q.rank() != 3 || k.rank() != 4 || k.shape() != v.shape() || k.dim(0) != q.dim(0) || k.dim(2) != q.dim(1) ||
        k.dim(3) != q.dim(2)) {
        throw ShapeError("full non-local attention: incompatible shapes " + shape_string(q.shape()) + ", " +
                         shape_string(k.shape()));
    }
    const std::size_t ch = q.dim(0), hw = q.dim(1) * q.dim(2), frames = k.dim(1);
    const std::size_t cols = hw * frames;
    CorrelationLease lease(hw * cols);
    std::vector<T> corr(hw * cols);
    const T* qd = q.data().data();
    const T* kd = k.data().data();
    const T* vd = v.data().data();
    // Column index t * HW + s addresses key pixel s of frame t.
    for (std::size_t p = 0; p < hw; ++p) {
        T* row = corr.data() + p * cols;
        for (std::size_t c = 0; c < ch; ++c) {
            const T qv = qd[c * hw + p];
            const T* kc = kd + c * cols;
            for (std::size_t j = 0; j < cols; ++j) row[j] += qv * kc[j];
        }
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, row[j]);
        T total = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            total += row[j];
        }
        for (std::size_t j = 0; j < cols; ++j) row[j] /= total;
    }
    Tensor<T> out(q.shape());
    T* o = out.mutable_data().data();
    for (std::size_t c = 0; c < ch; ++c) {
        const T* vc = vd + c * cols;
        for (std::size_t p = 0; p < hw; ++p) {
            const T* row = corr.data() + p * cols;
            T acc = 0;
            for (std::size_t j = 0; j < cols; ++j) acc += row[j] * vc[j];
            o[c * hw + p] = acc;
        }
    }
    return out;
}

#define MANA_INSTANTIATE_ATTENTION(T)                                                                          \
    template QkvTensors<T> embed_qkv<T>(const Tensor<T>&, const QkvEmbeddings<T>&);                            \
    template OneHotAttnResult<T> cross_frame_one_hot_attention<T>(const Tensor<T>&, const Tensor<T>&,          \
                                                                  const Tensor<T>&, std::size_t, TemporalReduce); \
    template Tensor<T> memory_attention_weights<T>(const Tensor<T>&, const MemoryBank<T>&);                    \
    template Tensor<T> memory_attention<T>(const Tensor<T>&, const MemoryBank<T>&);                            \
    template Tensor<T> fuse_residual<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                  \
                                        const Conv2dParams<T>&, const Conv2dParams<T>&);                       \
    template Tensor<T> full_non_local_attention<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

MANA_INSTANTIATE_ATTENTION(float)
MANA_INSTANTIATE_ATTENTION(double)

} // namespace mana

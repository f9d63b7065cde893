#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mana/nn.hpp"
#include "mana/tensor.hpp"

namespace mana {

/// How the per-frame one-hot results are combined into one output.
enum class TemporalReduce {
    sum,         // add the T per-frame contributions
    mean,        // average them
    global_max,  // keep only the best candidate over all T * k * k taps
};

std::string to_string(TemporalReduce r);
TemporalReduce parse_temporal_reduce(const std::string& s);

/// 1x1 embeddings C -> C/2 for query, key and value.
template <typename T>
struct QkvEmbeddings {
    Conv2dParams<T> query;
    Conv2dParams<T> key;
    Conv2dParams<T> value;
};

template <typename T>
struct QkvTensors {
    Tensor<T> query;  // C' x H x W, from the center frame
    Tensor<T> key;    // C' x T x H x W
    Tensor<T> value;  // C' x T x H x W
};

/// frames_norm is T x C x H x W (already group-normalized), T odd.
template <typename T>
QkvTensors<T> embed_qkv(const Tensor<T>& frames_norm, const QkvEmbeddings<T>& e);

template <typename T>
struct OneHotAttnResult {
    Tensor<T> output;                    // C' x H x W
    Tensor<T> scores;                    // H x W x T, best correlation per frame
    std::vector<std::int32_t> indices;   // H x W x T, winning window tap per frame
    std::size_t frames = 0;

    std::int32_t index(std::size_t pixel, std::size_t t) const { return indices[pixel * frames + t]; }
    T score(std::size_t pixel, std::size_t t) const { return scores[pixel * frames + t]; }
};

/// Windowed one-hot cross-frame attention. For every query pixel and frame,
/// correlates the query against the k x k key neighborhood, keeps the largest
/// correlation s and its tap d (lowest tap wins ties, out-of-frame taps never
/// win), and emits s * V(d). Gradients flow through s and the gathered value
/// with d held fixed.
template <typename T>
OneHotAttnResult<T> cross_frame_one_hot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                                  std::size_t window = 9,
                                                  TemporalReduce reduce = TemporalReduce::sum);

/// Learned C' x N bank of feature prototypes.
template <typename T>
struct MemoryBank {
    Tensor<T> m;

    std::size_t entries() const { return m.dim(1); }
};

/// softmax(Q^ M) over the N entries, HW x N; rows are pixels in raster order.
template <typename T>
Tensor<T> memory_attention_weights(const Tensor<T>& q, const MemoryBank<T>& bank);

/// softmax(Q^ M) M^T reshaped to C' x H x W.
template <typename T>
Tensor<T> memory_attention(const Tensor<T>& q, const MemoryBank<T>& bank);

/// f + fx(x) + fy(y). An empty y skips the memory branch.
template <typename T>
Tensor<T> fuse_residual(const Tensor<T>& f, const Tensor<T>& x, const Tensor<T>& y, const Conv2dParams<T>& fx,
                        const Conv2dParams<T>& fy);

/// Conventional softmax non-local attention over every pixel of every frame.
/// Materializes the full HW x HWT correlation; forward only. Used as the
/// memory-footprint baseline.
template <typename T>
Tensor<T> full_non_local_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v);

} // namespace mana

#include "mana/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "detail/gemm.hpp"
#include "mana/probe.hpp"

namespace mana {

namespace {

struct Geometry {
    std::size_t batch;
    std::size_t channels;
    std::size_t height;
    std::size_t width;
};

template <typename T>
Geometry feature_geometry(const Tensor<T>& x, const char* op)
{
    if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2)};
    if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
    throw ShapeError(std::string(op) + ": expected C x H x W or N x C x H x W, got " + shape_string(x.shape()));
}

/// Planes over the two trailing axes.
template <typename T>
Geometry plane_geometry(const Tensor<T>& x, const char* op)
{
    if (x.rank() < 2) throw ShapeError(std::string(op) + ": need at least two axes, got " + shape_string(x.shape()));
    const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
    return {x.numel() / (h * w), 1, h, w};
}

template <typename T>
void im2col(const T* x, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw, T* cols)
{
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
    const std::size_t hw = h * w;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const T* plane = x + ch * hw;
        for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
                T* row = cols + ((ch * kh + i) * kw + j) * hw;
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(i) - ph;
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j) - pw;
                for (std::size_t y = 0; y < h; ++y) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
                    T* dst = row + y * w;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill_n(dst, w, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(sy) * w;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + dx;
                        dst[xx] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) ? T(0) : src[sx];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw, T* x)
{
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
    const std::size_t hw = h * w;
    for (std::size_t ch = 0; ch < c; ++ch) {
        T* plane = x + ch * hw;
        for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
                const T* row = cols + ((ch * kh + i) * kw + j) * hw;
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(i) - ph;
                const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j) - pw;
                for (std::size_t y = 0; y < h; ++y) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                    T* dst = plane + static_cast<std::size_t>(sy) * w;
                    const T* src = row + y * w;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + dx;
                        if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) dst[sx] += src[xx];
                    }
                }
            }
        }
    }
}

struct LinearTaps {
    std::vector<std::size_t> lo, hi;
    std::vector<double> wlo, whi;
};

LinearTaps linear_taps(std::size_t in, std::size_t factor)
{
    const std::size_t out = in * factor;
    LinearTaps taps;
    taps.lo.resize(out);
    taps.hi.resize(out);
    taps.wlo.resize(out);
    taps.whi.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
        src = std::max(src, 0.0);
        std::size_t i0 = std::min(static_cast<std::size_t>(std::floor(src)), in - 1);
        std::size_t i1 = std::min(i0 + 1, in - 1);
        const double frac = src - static_cast<double>(i0);
        taps.lo[o] = i0;
        taps.hi[o] = i1;
        taps.wlo[o] = 1.0 - frac;
        taps.whi[o] = frac;
    }
    return taps;
}

} // namespace

std::size_t default_group_count(std::size_t channels)
{
    return channels >= 8 ? 8 : 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2dParams<T>& p)
{
    const Geometry g = feature_geometry(x, "conv2d");
    if (p.weight.rank() != 4) throw ShapeError("conv2d: weight must be rank 4, got " + shape_string(p.weight.shape()));
    const std::size_t oc = p.weight.dim(0), ic = p.weight.dim(1), kh = p.weight.dim(2), kw = p.weight.dim(3);
    if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd");
    if (ic != g.channels) {
        throw ShapeError("conv2d: input has " + std::to_string(g.channels) + " channels, weight expects " +
                         std::to_string(ic));
    }
    if (p.bias.shape() != Shape{oc}) throw ShapeError("conv2d: bias shape " + shape_string(p.bias.shape()));

    const std::size_t hw = g.height * g.width;
    const std::size_t ckk = ic * kh * kw;
    const bool pointwise = kh == 1 && kw == 1;

    Shape out_shape = x.rank() == 3 ? Shape{oc, g.height, g.width} : Shape{g.batch, oc, g.height, g.width};
    Tensor<T> out(out_shape);
    T* o = out.mutable_data().data();
    const T* xin = x.data().data();
    const T* wt = p.weight.data().data();
    const T* b = p.bias.data().data();

    std::vector<T> cols(pointwise ? 0 : ckk * hw);
    for (std::size_t n = 0; n < g.batch; ++n) {
        const T* xs = xin + n * ic * hw;
        T* os = o + n * oc * hw;
        for (std::size_t c = 0; c < oc; ++c) std::fill_n(os + c * hw, hw, b[c]);
        const T* src = xs;
        if (!pointwise) {
            im2col(xs, ic, g.height, g.width, kh, kw, cols.data());
            src = cols.data();
        }
        detail::gemm_nn(oc, hw, ckk, wt, src, os);
    }
    detail::check_finite(out, "conv2d");

    detail::record<T>(out, {&x, &p.weight, &p.bias},
                      [x = x.detach(), w = p.weight.detach(), g, oc, ic, kh, kw, hw, ckk, pointwise](
                          std::span<const T> grad, detail::GradSink<T>& sink) {
                          T* dx = sink(0);
                          T* dw = sink(1);
                          T* db = sink(2);
                          std::vector<T> cols(pointwise ? 0 : ckk * hw);
                          std::vector<T> dcols(pointwise ? 0 : ckk * hw);
                          for (std::size_t n = 0; n < g.batch; ++n) {
                              const T* gs = grad.data() + n * oc * hw;
                              const T* xs = x.data().data() + n * ic * hw;
                              if (db) {
                                  for (std::size_t c = 0; c < oc; ++c) {
                                      T acc = 0;
                                      for (std::size_t i = 0; i < hw; ++i) acc += gs[c * hw + i];
                                      db[c] += acc;
                                  }
                              }
                              if (dw) {
                                  const T* src = xs;
                                  if (!pointwise) {
                                      im2col(xs, ic, g.height, g.width, kh, kw, cols.data());
                                      src = cols.data();
                                  }
                                  detail::gemm_nt(oc, ckk, hw, gs, src, dw);
                              }
                              if (dx) {
                                  T* dxs = dx + n * ic * hw;
                                  if (pointwise) {
                                      detail::gemm_tn(ic, hw, oc, w.data().data(), gs, dxs);
                                  } else {
                                      std::fill(dcols.begin(), dcols.end(), T(0));
                                      detail::gemm_tn(ckk, hw, oc, w.data().data(), gs, dcols.data());
                                      col2im(dcols.data(), ic, g.height, g.width, kh, kw, dxs);
                                  }
                              }
                          }
                      });
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x)
{
    Tensor<T> out(x.shape());
    auto o = out.mutable_data();
    auto in = x.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > T(0) ? in[i] : T(0);
    if (auto* probe = StructureProbe::active()) {
        std::uint64_t word = 0;
        for (std::size_t i = 0; i < in.size(); ++i) {
            word = (word << 1) | (in[i] > T(0) ? 1u : 0u);
            if (i % 64 == 63) {
                probe->mix(word);
                word = 0;
            }
        }
        probe->mix(word);
    }
    detail::record<T>(out, {&x}, [x = x.detach()](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0)) {
            auto in = x.data();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (in[i] > T(0)) d[i] += g[i];
        }
    });
    return out;
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, const GroupNormParams<T>& p)
{
    const Geometry g = feature_geometry(x, "group_norm");
    if (p.groups == 0 || g.channels % p.groups != 0) {
        throw ShapeError("group_norm: " + std::to_string(g.channels) + " channels not divisible into " +
                         std::to_string(p.groups) + " groups");
    }
    if (p.gamma.shape() != Shape{g.channels} || p.beta.shape() != Shape{g.channels}) {
        throw ShapeError("group_norm: affine parameters must have one entry per channel");
    }
    if (!(p.eps > 0.0)) throw ShapeError("group_norm: eps must be positive");

    const std::size_t hw = g.height * g.width;
    const std::size_t per_group = g.channels / p.groups;
    const std::size_t group_size = per_group * hw;
    const std::size_t stats = g.batch * p.groups;

    Tensor<T> out(x.shape());
    std::vector<T> normalized(x.numel());
    std::vector<T> inv_std(stats);
    const T* in = x.data().data();
    const T* gamma = p.gamma.data().data();
    const T* beta = p.beta.data().data();
    T* o = out.mutable_data().data();

    for (std::size_t s = 0; s < stats; ++s) {
        const std::size_t base = s * group_size;
        T mean = 0;
        for (std::size_t i = 0; i < group_size; ++i) mean += in[base + i];
        mean /= static_cast<T>(group_size);
        T var = 0;
        for (std::size_t i = 0; i < group_size; ++i) {
            const T d = in[base + i] - mean;
            var += d * d;
        }
        var /= static_cast<T>(group_size);
        const T inv = T(1) / std::sqrt(var + static_cast<T>(p.eps));
        inv_std[s] = inv;
        const std::size_t c0 = (s % p.groups) * per_group;
        for (std::size_t cc = 0; cc < per_group; ++cc) {
            const std::size_t c = c0 + cc;
            for (std::size_t i = 0; i < hw; ++i) {
                const std::size_t idx = base + cc * hw + i;
                normalized[idx] = (in[idx] - mean) * inv;
                o[idx] = gamma[c] * normalized[idx] + beta[c];
            }
        }
    }
    detail::check_finite(out, "group_norm");

    detail::record<T>(out, {&x, &p.gamma, &p.beta},
                      [normalized = std::move(normalized), inv_std = std::move(inv_std), gamma_t = p.gamma.detach(),
                       groups = p.groups, per_group, hw, group_size, stats](std::span<const T> grad,
                                                                            detail::GradSink<T>& sink) {
                          T* dx = sink(0);
                          T* dgamma = sink(1);
                          T* dbeta = sink(2);
                          const T* gamma = gamma_t.data().data();
                          std::vector<T> dxhat(group_size);
                          for (std::size_t s = 0; s < stats; ++s) {
                              const std::size_t base = s * group_size;
                              const std::size_t c0 = (s % groups) * per_group;
                              T sum_d = 0, sum_dx = 0;
                              for (std::size_t cc = 0; cc < per_group; ++cc) {
                                  const std::size_t c = c0 + cc;
                                  T acc_g = 0, acc_gx = 0;
                                  for (std::size_t i = 0; i < hw; ++i) {
                                      const std::size_t local = cc * hw + i;
                                      const T gv = grad[base + local];
                                      acc_g += gv;
                                      acc_gx += gv * normalized[base + local];
                                      const T d = gv * gamma[c];
                                      dxhat[local] = d;
                                      sum_d += d;
                                      sum_dx += d * normalized[base + local];
                                  }
                                  if (dbeta) dbeta[c] += acc_g;
                                  if (dgamma) dgamma[c] += acc_gx;
                              }
                              if (dx) {
                                  const T m = static_cast<T>(group_size);
                                  const T k = inv_std[s] / m;
                                  for (std::size_t i = 0; i < group_size; ++i) {
                                      dx[base + i] += k * (m * dxhat[i] - sum_d - normalized[base + i] * sum_dx);
                                  }
                              }
                          }
                      });
    return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis)
{
    if (axis >= x.rank()) throw ShapeError("softmax: axis out of range for " + shape_string(x.shape()));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    const std::size_t len = x.dim(axis);

    Tensor<T> out(x.shape());
    const T* in = x.data().data();
    T* o = out.mutable_data().data();
    for (std::size_t a = 0; a < outer; ++a) {
        for (std::size_t b = 0; b < inner; ++b) {
            const std::size_t base = a * len * inner + b;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, in[base + j * inner]);
            T total = 0;
            for (std::size_t j = 0; j < len; ++j) {
                const T e = std::exp(in[base + j * inner] - mx);
                o[base + j * inner] = e;
                total += e;
            }
            for (std::size_t j = 0; j < len; ++j) o[base + j * inner] /= total;
        }
    }
    detail::check_finite(out, "softmax");
    detail::record<T>(out, {&x}, [y = out.detach(), outer, inner, len](std::span<const T> g, detail::GradSink<T>& sink) {
        T* d = sink(0);
        if (!d) return;
        const T* yv = y.data().data();
        for (std::size_t a = 0; a < outer; ++a) {
            for (std::size_t b = 0; b < inner; ++b) {
                const std::size_t base = a * len * inner + b;
                T dot = 0;
                for (std::size_t j = 0; j < len; ++j) dot += g[base + j * inner] * yv[base + j * inner];
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t idx = base + j * inner;
                    d[idx] += yv[idx] * (g[idx] - dot);
                }
            }
        }
    });
    return out;
}

std::size_t WindowMask::count_valid_at(std::size_t y, std::size_t x) const
{
    std::size_t n = 0;
    for (std::size_t j = 0; j < taps; ++j) n += at(j, y, x) ? 1 : 0;
    return n;
}

WindowMask window_mask(std::size_t height, std::size_t width, std::size_t k)
{
    if (k % 2 == 0) throw ShapeError("window size must be odd, got " + std::to_string(k));
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k / 2);
    WindowMask mask{k * k, height, width, std::vector<std::uint8_t>(k * k * height * width, 0)};
    for (std::size_t j = 0; j < k * k; ++j) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(j / k) - r;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j % k) - r;
        for (std::size_t y = 0; y < height; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
            for (std::size_t x = 0; x < width; ++x) {
                const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) + dx;
                if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(width)) mask.valid[(j * height + y) * width + x] = 1;
            }
        }
    }
    return mask;
}

template <typename T>
UnfoldResult<T> unfold_patches(const Tensor<T>& x, std::size_t k)
{
    if (x.rank() != 3) throw ShapeError("unfold_patches: expected C x H x W, got " + shape_string(x.shape()));
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), hw = h * w, taps = k * k;
    WindowMask mask = window_mask(h, w, k);
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k / 2);

    // Source offset of each (tap, pixel), or -1 when out of frame.
    std::vector<std::ptrdiff_t> source(taps * hw, -1);
    for (std::size_t j = 0; j < taps; ++j) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(j / k) - r;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j % k) - r;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t xx = 0; xx < w; ++xx)
                if (mask.at(j, y, xx))
                    source[j * hw + y * w + xx] = (static_cast<std::ptrdiff_t>(y) + dy) * static_cast<std::ptrdiff_t>(w) +
                                                  static_cast<std::ptrdiff_t>(xx) + dx;
    }

    Tensor<T> patches({c, taps, h, w});
    T* o = patches.mutable_data().data();
    const T* in = x.data().data();
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < taps * hw; ++i)
            if (source[i] >= 0) o[ch * taps * hw + i] = in[ch * hw + static_cast<std::size_t>(source[i])];

    detail::record<T>(patches, {&x}, [source = std::move(source), c, taps, hw](std::span<const T> g, detail::GradSink<T>& sink) {
        T* d = sink(0);
        if (!d) return;
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < taps * hw; ++i)
                if (source[i] >= 0) d[ch * hw + static_cast<std::size_t>(source[i])] += g[ch * taps * hw + i];
    });
    return {std::move(patches), std::move(mask)};
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t r)
{
    if (x.rank() != 3) throw ShapeError("pixel_shuffle: expected C x H x W, got " + shape_string(x.shape()));
    if (r == 0 || x.dim(0) % (r * r) != 0) {
        throw ShapeError("pixel_shuffle: " + std::to_string(x.dim(0)) + " channels not divisible by r^2 = " +
                         std::to_string(r * r));
    }
    const std::size_t c = x.dim(0) / (r * r), h = x.dim(1), w = x.dim(2);
    const std::size_t ow = w * r;
    Tensor<T> out({c, h * r, ow});
    T* o = out.mutable_data().data();
    const T* in = x.data().data();
    // Flat source index for every output element; reused by backward.
    std::vector<std::size_t> src(out.numel());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t dy = 0; dy < r; ++dy)
            for (std::size_t dx = 0; dx < r; ++dx) {
                const std::size_t ic = ch * r * r + dy * r + dx;
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::size_t oi = (ch * h * r + y * r + dy) * ow + xx * r + dx;
                        src[oi] = (ic * h + y) * w + xx;
                        o[oi] = in[src[oi]];
                    }
            }
    detail::record<T>(out, {&x}, [src = std::move(src)](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0))
            for (std::size_t i = 0; i < g.size(); ++i) d[src[i]] += g[i];
    });
    return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t r)
{
    if (x.rank() != 3) throw ShapeError("pixel_unshuffle: expected C x H x W, got " + shape_string(x.shape()));
    if (r == 0 || x.dim(1) % r != 0 || x.dim(2) % r != 0) {
        throw ShapeError("pixel_unshuffle: spatial size " + shape_string(x.shape()) + " not divisible by " +
                         std::to_string(r));
    }
    const std::size_t c = x.dim(0), h = x.dim(1) / r, w = x.dim(2) / r;
    Tensor<T> out({c * r * r, h, w});
    T* o = out.mutable_data().data();
    const T* in = x.data().data();
    std::vector<std::size_t> src(out.numel());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t dy = 0; dy < r; ++dy)
            for (std::size_t dx = 0; dx < r; ++dx) {
                const std::size_t oc = ch * r * r + dy * r + dx;
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::size_t oi = (oc * h + y) * w + xx;
                        src[oi] = (ch * h * r + y * r + dy) * (w * r) + xx * r + dx;
                        o[oi] = in[src[oi]];
                    }
            }
    detail::record<T>(out, {&x}, [src = std::move(src)](std::span<const T> g, detail::GradSink<T>& sink) {
        if (T* d = sink(0))
            for (std::size_t i = 0; i < g.size(); ++i) d[src[i]] += g[i];
    });
    return out;
}

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::size_t factor)
{
    if (factor == 0) throw ShapeError("bilinear_upsample: factor must be >= 1");
    const Geometry g = plane_geometry(x, "bilinear_upsample");
    const std::size_t oh = g.height * factor, ow = g.width * factor;
    Shape shape = x.shape();
    shape[shape.size() - 2] = oh;
    shape[shape.size() - 1] = ow;
    Tensor<T> out(shape);

    LinearTaps ty = linear_taps(g.height, factor);
    LinearTaps tx = linear_taps(g.width, factor);
    const T* in = x.data().data();
    T* o = out.mutable_data().data();
    for (std::size_t p = 0; p < g.batch; ++p) {
        const T* plane = in + p * g.height * g.width;
        T* dst = o + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            const T* r0 = plane + ty.lo[y] * g.width;
            const T* r1 = plane + ty.hi[y] * g.width;
            const T wy0 = static_cast<T>(ty.wlo[y]), wy1 = static_cast<T>(ty.whi[y]);
            for (std::size_t xx = 0; xx < ow; ++xx) {
                const T wx0 = static_cast<T>(tx.wlo[xx]), wx1 = static_cast<T>(tx.whi[xx]);
                dst[y * ow + xx] = wy0 * (wx0 * r0[tx.lo[xx]] + wx1 * r0[tx.hi[xx]]) +
                                   wy1 * (wx0 * r1[tx.lo[xx]] + wx1 * r1[tx.hi[xx]]);
            }
        }
    }
    detail::check_finite(out, "bilinear_upsample");
    detail::record<T>(out, {&x}, [ty = std::move(ty), tx = std::move(tx), g, oh, ow](std::span<const T> grad,
                                                                                     detail::GradSink<T>& sink) {
        T* d = sink(0);
        if (!d) return;
        for (std::size_t p = 0; p < g.batch; ++p) {
            T* plane = d + p * g.height * g.width;
            const T* src = grad.data() + p * oh * ow;
            for (std::size_t y = 0; y < oh; ++y) {
                T* r0 = plane + ty.lo[y] * g.width;
                T* r1 = plane + ty.hi[y] * g.width;
                const T wy0 = static_cast<T>(ty.wlo[y]), wy1 = static_cast<T>(ty.whi[y]);
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    const T gv = src[y * ow + xx];
                    const T wx0 = static_cast<T>(tx.wlo[xx]), wx1 = static_cast<T>(tx.whi[xx]);
                    r0[tx.lo[xx]] += gv * wy0 * wx0;
                    r0[tx.hi[xx]] += gv * wy0 * wx1;
                    r1[tx.lo[xx]] += gv * wy1 * wx0;
                    r1[tx.hi[xx]] += gv * wy1 * wx1;
                }
            }
        }
    });
    return out;
}

double cubic_kernel(double d, double a)
{
    const double x = std::abs(d);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

std::array<double, 4> cubic_tap_weights(double t, double a)
{
    return {cubic_kernel(t + 1.0, a), cubic_kernel(t, a), cubic_kernel(1.0 - t, a), cubic_kernel(2.0 - t, a)};
}

namespace {

struct CubicTaps {
    std::vector<std::array<std::size_t, 4>> index;
    std::vector<std::array<double, 4>> weight;
};

CubicTaps cubic_taps(std::size_t in, std::size_t factor)
{
    const std::size_t out = in / factor;
    CubicTaps taps;
    taps.index.resize(out);
    taps.weight.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double src = (static_cast<double>(o) + 0.5) * static_cast<double>(factor) - 0.5;
        const double base = std::floor(src);
        taps.weight[o] = cubic_tap_weights(src - base);
        for (int k = 0; k < 4; ++k) {
            const long long i = static_cast<long long>(base) - 1 + k;
            taps.index[o][k] = static_cast<std::size_t>(std::clamp<long long>(i, 0, static_cast<long long>(in) - 1));
        }
    }
    return taps;
}

} // namespace

template <typename T>
Tensor<T> bicubic_downsample(const Tensor<T>& x, std::size_t factor)
{
    if (factor == 0) throw ShapeError("bicubic_downsample: factor must be >= 1");
    const Geometry g = plane_geometry(x, "bicubic_downsample");
    if (g.height % factor != 0 || g.width % factor != 0) {
        throw ShapeError("bicubic_downsample: " + std::to_string(g.height) + "x" + std::to_string(g.width) +
                         " is not divisible by " + std::to_string(factor));
    }
    const std::size_t oh = g.height / factor, ow = g.width / factor;
    const CubicTaps ty = cubic_taps(g.height, factor);
    const CubicTaps tx = cubic_taps(g.width, factor);
    Shape shape = x.shape();
    shape[shape.size() - 2] = oh;
    shape[shape.size() - 1] = ow;
    Tensor<T> out(shape);
    const T* in = x.data().data();
    T* o = out.mutable_data().data();
    std::vector<double> rows(oh * g.width);
    for (std::size_t p = 0; p < g.batch; ++p) {
        const T* plane = in + p * g.height * g.width;
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < g.width; ++xx) {
                double acc = 0;
                for (int k = 0; k < 4; ++k) acc += ty.weight[y][k] * static_cast<double>(plane[ty.index[y][k] * g.width + xx]);
                rows[y * g.width + xx] = acc;
            }
        T* dst = o + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx) {
                double acc = 0;
                for (int k = 0; k < 4; ++k) acc += tx.weight[xx][k] * rows[y * g.width + tx.index[xx][k]];
                dst[y * ow + xx] = static_cast<T>(acc);
            }
    }
    detail::check_finite(out, "bicubic_downsample");
    return out;
}

#define MANA_INSTANTIATE_NN(T)                                                       \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Conv2dParams<T>&);          \
    template Tensor<T> relu<T>(const Tensor<T>&);                                    \
    template Tensor<T> group_norm<T>(const Tensor<T>&, const GroupNormParams<T>&);   \
    template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                    \
    template UnfoldResult<T> unfold_patches<T>(const Tensor<T>&, std::size_t);       \
    template Tensor<T> pixel_shuffle<T>(const Tensor<T>&, std::size_t);              \
    template Tensor<T> pixel_unshuffle<T>(const Tensor<T>&, std::size_t);            \
    template Tensor<T> bilinear_upsample<T>(const Tensor<T>&, std::size_t);          \
    template Tensor<T> bicubic_downsample<T>(const Tensor<T>&, std::size_t);

MANA_INSTANTIATE_NN(float)
MANA_INSTANTIATE_NN(double)

} // namespace mana

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mana/tensor.hpp"

namespace mana {

/// Stride-1, same-padded 2-D convolution weights.
template <typename T>
struct Conv2dParams {
    Tensor<T> weight;  // out_ch x in_ch x kh x kw, kh and kw odd
    Tensor<T> bias;    // out_ch

    std::size_t out_channels() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t kernel() const { return weight.dim(2); }
};

template <typename T>
struct GroupNormParams {
    std::size_t groups = 1;
    Tensor<T> gamma;  // per channel
    Tensor<T> beta;   // per channel
    double eps = 1e-5;
};

/// Number of groups used for a feature width: 8 when channels >= 8, else 1.
std::size_t default_group_count(std::size_t channels);

/// x is C x H x W or N x C x H x W (applied per sample).
template <typename T> Tensor<T> conv2d(const Tensor<T>& x, const Conv2dParams<T>& p);

template <typename T> Tensor<T> relu(const Tensor<T>& x);

/// Per-sample group normalization; x is C x H x W or N x C x H x W.
template <typename T> Tensor<T> group_norm(const Tensor<T>& x, const GroupNormParams<T>& p);

/// Max-subtracted softmax along one axis.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Validity of each window tap: taps x H x W, true where the tap lies in frame.
struct WindowMask {
    std::size_t taps = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> valid;

    bool at(std::size_t tap, std::size_t y, std::size_t x) const
    {
        return valid[(tap * height + y) * width + x] != 0;
    }
    std::size_t count_valid_at(std::size_t y, std::size_t x) const;
};

/// Geometric mask for a k x k window centered on each pixel of an H x W frame.
WindowMask window_mask(std::size_t height, std::size_t width, std::size_t k);

template <typename T>
struct UnfoldResult {
    Tensor<T> patches;  // C x k*k x H x W, zero where out of frame
    WindowMask mask;
};

/// k x k neighborhoods of every pixel; tap j is row-major over the window,
/// so the center tap is (k*k - 1) / 2.
template <typename T> UnfoldResult<T> unfold_patches(const Tensor<T>& x, std::size_t k);

/// (C*r*r) x H x W -> C x rH x rW, out(c, r*y+dy, r*x+dx) = in(c*r*r + dy*r + dx, y, x).
template <typename T> Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t r);
template <typename T> Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t r);

/// Half-pixel-centered bilinear upsampling with edge clamping over the two
/// trailing axes.
template <typename T> Tensor<T> bilinear_upsample(const Tensor<T>& x, std::size_t factor);

/// Cubic convolution kernel value at distance d.
double cubic_kernel(double d, double a = -0.5);

/// Weights of the four taps floor(s)-1 .. floor(s)+2 for fractional phase t.
std::array<double, 4> cubic_tap_weights(double t, double a = -0.5);

/// Bicubic (a = -0.5) decimation over the two trailing axes; no anti-alias
/// prefilter. Not differentiable: the result is never tracked.
template <typename T> Tensor<T> bicubic_downsample(const Tensor<T>& x, std::size_t factor);

} // namespace mana

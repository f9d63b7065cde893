#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mana/attention.hpp"
#include "mana/nn.hpp"
#include "mana/tensor.hpp"

namespace mana {

/// Which embedded tensor queries the memory bank.
enum class MemoryQuery {
    shared,    // the cross-frame query Q
    separate,  // a dedicated 1x1 embedding of the normalized center feature
};

std::string to_string(MemoryQuery q);
MemoryQuery parse_memory_query(const std::string& s);

struct ModelConfig {
    std::size_t channels = 16;     // C
    std::size_t frames = 7;        // T
    std::size_t memory_size = 32;  // N
    std::size_t enc_blocks = 2;
    std::size_t dec_blocks = 4;
    std::size_t scale = 4;
    std::size_t window = 9;
    TemporalReduce temporal_reduce = TemporalReduce::sum;
    bool memory_enabled = true;
    MemoryQuery memory_query = MemoryQuery::shared;

    std::size_t embed_channels() const { return channels / 2; }
    std::size_t center() const { return (frames - 1) / 2; }

    /// Throws ConfigError naming the first offending field.
    void validate() const;

    /// CPU-sized network used by tests and the default training preset.
    static ModelConfig desk();
    /// Full-width network (C=128, 5/40 blocks, N=256).
    static ModelConfig paper();

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);

    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct ResBlock {
    Conv2dParams<T> conv1;
    Conv2dParams<T> conv2;
};

template <typename T>
struct NamedParam {
    std::string name;
    Tensor<T>* tensor;
};

template <typename T>
struct ConstNamedParam {
    std::string name;
    const Tensor<T>* tensor;
};

template <typename T>
struct ManaModel {
    ModelConfig config;
    Conv2dParams<T> encoder_head;           // 3 -> C, 3x3
    std::vector<ResBlock<T>> encoder;
    GroupNormParams<T> norm;
    QkvEmbeddings<T> qkv;                   // C -> C', 1x1
    Conv2dParams<T> memory_query;           // C -> C', separate-query mode only
    MemoryBank<T> memory;
    Conv2dParams<T> fuse_x;                 // C' -> C, 1x1, zero at init
    Conv2dParams<T> fuse_y;                 // C' -> C, 1x1, zero at init
    std::vector<ResBlock<T>> decoder;
    std::array<Conv2dParams<T>, 2> upsample;  // C -> 4C, 3x3, each followed by shuffle x2
    Conv2dParams<T> tail;                   // C -> 3, 3x3

    /// Every parameter with a stable dotted name, in a fixed order.
    std::vector<NamedParam<T>> parameters();
    std::vector<ConstNamedParam<T>> parameters() const;
};

/// Correctly shaped model with all parameters zero (gamma = 1).
template <typename T>
ManaModel<T> make_model_skeleton(const ModelConfig& cfg);

/// Kaiming-uniform fan-in convolutions (bound 1/sqrt(fan_in)) with zero bias, N(0, 1/sqrt(C'))
/// memory bank, unit/zero norm affine, and zero fusion convolutions.
template <typename T>
ManaModel<T> init_model(const ModelConfig& cfg, std::uint64_t seed);

template <typename To, typename From>
ManaModel<To> cast_model(const ManaModel<From>& model);

std::size_t parameter_count(const ModelConfig& cfg);

template <typename T>
std::size_t parameter_count(const ManaModel<T>& model);

/// Names of the memory-augmented attention parameters.
std::vector<std::string> memory_module_parameters(const ModelConfig& cfg);
/// Names of the memory fusion convolution fy.
std::vector<std::string> memory_fusion_parameters();

/// 64-bit FNV-1a over names, shapes and raw bytes of the selected parameters
/// (all when names is empty).
template <typename T>
std::uint64_t parameter_digest(const ManaModel<T>& model, const std::vector<std::string>& names = {});

/// Shared per-frame encoder; frames is 3 x H x W or N x 3 x H x W.
template <typename T>
Tensor<T> encode_frames(const ManaModel<T>& model, const Tensor<T>& frames);

template <typename T>
Tensor<T> residual_block(const Tensor<T>& x, const ResBlock<T>& block);

struct ForwardOptions {
    /// false drops both attention branches: the center feature goes straight
    /// to the decoder.
    bool attention = true;
};

template <typename T>
struct ForwardOutput {
    Tensor<T> output;       // 3 x 4H x 4W, unclamped
    Tensor<T> query;        // C' x H x W (empty without attention)
    Tensor<T> memory_read;  // C' x H x W (empty when memory is off)
};

/// frames: T x 3 x H x W in [0, 1].
template <typename T>
ForwardOutput<T> mana_forward(const ManaModel<T>& model, const Tensor<T>& frames, ForwardOptions options = {});

template <typename T>
struct MemoryPath {
    Tensor<T> query;
    Tensor<T> memory_read;
};

/// Only the part of the forward pass that feeds the memory bank: encoder on
/// the center frame, normalization, query embedding and memory read.
template <typename T>
MemoryPath<T> memory_path(const ManaModel<T>& model, const Tensor<T>& frames);

/// Copy with every value clamped into [0, 1].
template <typename T>
Tensor<T> clamp_unit(const Tensor<T>& x);

} // namespace mana

// Catalog of finite-difference gradient checks, one entry per
// differentiable op plus end-to-end model variants.
#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mana/attention.hpp"
#include "mana/model.hpp"
#include "mana/nn.hpp"
#include "mana/ops.hpp"
#include "mana/train.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace gradcheck {

struct Case {
    std::string name;
    std::function<Report(std::uint64_t seed)> run;
};

namespace detail {

using mana::Shape;
using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

inline Tensor<double> rnd(Shape s, std::mt19937_64& rng) { return oracle::uniform<double>(std::move(s), rng); }

/// Checks f(inputs) reduced by a fixed random weighting of its output.
inline Report unary_like(std::uint64_t seed, std::vector<Shape> shapes, Shape out_shape,
                         std::function<Tensor<double>(const std::vector<Tensor<double>>&)> op)
{
    std::mt19937_64 rng(seed);
    std::vector<Tensor<double>> inputs;
    for (auto& s : shapes) inputs.push_back(rnd(s, rng));
    const Tensor<double> weights = rnd(out_shape, rng);
    return check(inputs, [&](const std::vector<Tensor<double>>& xs) { return weighted_sum(op(xs), weights); }, rng);
}

inline mana::Conv2dParams<double> conv_of(const Tensor<double>& w, const Tensor<double>& b) { return {w, b}; }

inline mana::ModelConfig tiny_config()
{
    mana::ModelConfig cfg;
    cfg.channels = 8;
    cfg.frames = 3;
    cfg.memory_size = 6;
    cfg.enc_blocks = 1;
    cfg.dec_blocks = 1;
    return cfg;
}

/// Tiny network with every parameter randomized so both attention branches
/// carry gradient; loss = L1 against a random target plus the memory loss.
inline Report end_to_end(std::uint64_t seed, mana::ModelConfig cfg)
{
    std::mt19937_64 rng(seed);
    mana::ManaModel<double> base = mana::init_model<double>(cfg, seed);
    std::vector<Tensor<double>> inputs;
    inputs.push_back(oracle::uniform<double>({cfg.frames, 3, 8, 8}, rng, 0.0, 1.0));
    for (auto& p : base.parameters()) {
        Tensor<double>& t = *p.tensor;
        if (p.name.find("bias") != std::string::npos || p.name.rfind("fuse.", 0) == 0 || p.name.rfind("norm.", 0) == 0) {
            for (double& v : t.mutable_data()) v += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
        }
        inputs.push_back(t);
    }
    const Tensor<double> target = oracle::uniform<double>({3, 32, 32}, rng, 0.0, 1.0);
    auto f = [&](const std::vector<Tensor<double>>& xs) {
        mana::ManaModel<double> m = base;
        auto params = m.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = xs[i + 1];
        const auto out = mana::mana_forward(m, xs[0]);
        Tensor<double> loss = mana::l1_loss(out.output, target);
        if (!out.memory_read.empty()) loss = mana::add(loss, mana::memory_loss(out.memory_read, out.query));
        return loss;
    };
    return check(inputs, f, rng, 12);
}

inline Report one_hot(std::uint64_t seed, mana::TemporalReduce reduce)
{
    return unary_like(seed, {{3, 5, 6}, {3, 3, 5, 6}, {3, 3, 5, 6}}, {3, 5, 6}, [reduce](const auto& xs) {
        return mana::cross_frame_one_hot_attention(xs[0], xs[1], xs[2], 9, reduce).output;
    });
}

} // namespace detail

inline std::vector<Case> catalog()
{
    using namespace detail;
    using mana::TemporalReduce;
    std::vector<Case> cases{
        {"add", [](auto s) { return unary_like(s, {{3, 4}, {3, 4}}, {3, 4}, [](const auto& x) { return mana::add(x[0], x[1]); }); }},
        {"sub", [](auto s) { return unary_like(s, {{3, 4}, {3, 4}}, {3, 4}, [](const auto& x) { return mana::sub(x[0], x[1]); }); }},
        {"mul", [](auto s) { return unary_like(s, {{3, 4}, {3, 4}}, {3, 4}, [](const auto& x) { return mana::mul(x[0], x[1]); }); }},
        {"scale", [](auto s) { return unary_like(s, {{2, 5}}, {2, 5}, [](const auto& x) { return mana::scale(x[0], -1.7); }); }},
        {"add_scalar", [](auto s) { return unary_like(s, {{2, 5}}, {2, 5}, [](const auto& x) { return mana::add_scalar(x[0], 0.3); }); }},
        {"matmul", [](auto s) { return unary_like(s, {{3, 4}, {4, 5}}, {3, 5}, [](const auto& x) { return mana::matmul(x[0], x[1]); }); }},
        {"transpose", [](auto s) { return unary_like(s, {{3, 4}}, {4, 3}, [](const auto& x) { return mana::transpose(x[0]); }); }},
        {"reshape", [](auto s) { return unary_like(s, {{2, 6}}, {3, 4}, [](const auto& x) { return mana::reshape(x[0], {3, 4}); }); }},
        {"select", [](auto s) { return unary_like(s, {{3, 2, 4}}, {2, 4}, [](const auto& x) { return mana::select(x[0], 1); }); }},
        {"swap_leading_axes", [](auto s) { return unary_like(s, {{2, 3, 2, 2}}, {3, 2, 2, 2}, [](const auto& x) { return mana::swap_leading_axes(x[0]); }); }},
        {"sum", [](auto s) {
             std::mt19937_64 rng(s);
             return check({rnd({4, 3}, rng)}, [](const auto& x) { return mana::sum(mana::mul(x[0], x[0])); }, rng);
         }},
        {"mean", [](auto s) {
             std::mt19937_64 rng(s);
             return check({rnd({4, 3}, rng)}, [](const auto& x) { return mana::mean(mana::mul(x[0], x[0])); }, rng);
         }},
        {"l1_loss", [](auto s) {
             std::mt19937_64 rng(s);
             return check({rnd({3, 4, 4}, rng), rnd({3, 4, 4}, rng)}, [](const auto& x) { return mana::l1_loss(x[0], x[1]); }, rng);
         }},
        {"memory_loss", [](auto s) {
             std::mt19937_64 rng(s);
             return check({rnd({2, 3, 3}, rng), rnd({2, 3, 3}, rng)}, [](const auto& x) { return mana::memory_loss(x[0], x[1]); }, rng);
         }},
        {"conv2d_3x3", [](auto s) {
             return unary_like(s, {{2, 5, 4}, {3, 2, 3, 3}, {3}}, {3, 5, 4}, [](const auto& x) { return mana::conv2d(x[0], conv_of(x[1], x[2])); });
         }},
        {"conv2d_1x1", [](auto s) {
             return unary_like(s, {{4, 3, 3}, {2, 4, 1, 1}, {2}}, {2, 3, 3}, [](const auto& x) { return mana::conv2d(x[0], conv_of(x[1], x[2])); });
         }},
        {"conv2d_batched", [](auto s) {
             return unary_like(s, {{2, 2, 4, 4}, {2, 2, 3, 3}, {2}}, {2, 2, 4, 4}, [](const auto& x) { return mana::conv2d(x[0], conv_of(x[1], x[2])); });
         }},
        {"relu", [](auto s) { return unary_like(s, {{4, 5}}, {4, 5}, [](const auto& x) { return mana::relu(x[0]); }); }},
        {"group_norm", [](auto s) {
             return unary_like(s, {{8, 3, 3}, {8}, {8}}, {8, 3, 3}, [](const auto& x) {
                 return mana::group_norm(x[0], mana::GroupNormParams<double>{4, x[1], x[2], 1e-5});
             });
         }},
        {"softmax_axis0", [](auto s) { return unary_like(s, {{4, 3}}, {4, 3}, [](const auto& x) { return mana::softmax(x[0], 0); }); }},
        {"softmax_axis1", [](auto s) { return unary_like(s, {{3, 5}}, {3, 5}, [](const auto& x) { return mana::softmax(x[0], 1); }); }},
        {"unfold_patches", [](auto s) {
             return unary_like(s, {{2, 4, 4}}, {2, 9, 4, 4}, [](const auto& x) { return mana::unfold_patches(x[0], 3).patches; });
         }},
        {"pixel_shuffle", [](auto s) { return unary_like(s, {{8, 2, 3}}, {2, 4, 6}, [](const auto& x) { return mana::pixel_shuffle(x[0], 2); }); }},
        {"pixel_unshuffle", [](auto s) { return unary_like(s, {{2, 4, 6}}, {8, 2, 3}, [](const auto& x) { return mana::pixel_unshuffle(x[0], 2); }); }},
        {"bilinear_upsample", [](auto s) { return unary_like(s, {{2, 3, 3}}, {2, 12, 12}, [](const auto& x) { return mana::bilinear_upsample(x[0], 4); }); }},
        {"embed_qkv", [](auto s) {
             std::mt19937_64 rng(s);
             std::vector<Tensor<double>> in{rnd({3, 4, 3, 3}, rng), rnd({2, 4, 1, 1}, rng), rnd({2}, rng), rnd({2, 4, 1, 1}, rng),
                                            rnd({2}, rng), rnd({2, 4, 1, 1}, rng), rnd({2}, rng)};
             const Tensor<double> wq = rnd({2, 3, 3}, rng), wk = rnd({2, 3, 3, 3}, rng), wv = rnd({2, 3, 3, 3}, rng);
             return check(in, [&](const auto& x) {
                 const auto qkv = mana::embed_qkv(x[0], mana::QkvEmbeddings<double>{conv_of(x[1], x[2]), conv_of(x[3], x[4]), conv_of(x[5], x[6])});
                 return mana::add(weighted_sum(qkv.query, wq), mana::add(weighted_sum(qkv.key, wk), weighted_sum(qkv.value, wv)));
             }, rng);
         }},
        {"one_hot_sum", [](auto s) { return one_hot(s, TemporalReduce::sum); }},
        {"one_hot_mean", [](auto s) { return one_hot(s, TemporalReduce::mean); }},
        {"one_hot_global_max", [](auto s) { return one_hot(s, TemporalReduce::global_max); }},
        {"memory_attention", [](auto s) {
             return unary_like(s, {{3, 2, 3}, {3, 5}}, {3, 2, 3}, [](const auto& x) { return mana::memory_attention(x[0], mana::MemoryBank<double>{x[1]}); });
         }},
        {"fuse_residual", [](auto s) {
             return unary_like(s, {{4, 3, 3}, {2, 3, 3}, {2, 3, 3}, {4, 2, 1, 1}, {4}, {4, 2, 1, 1}, {4}}, {4, 3, 3}, [](const auto& x) {
                 return mana::fuse_residual(x[0], x[1], x[2], conv_of(x[3], x[4]), conv_of(x[5], x[6]));
             });
         }},
        {"residual_block", [](auto s) {
             return unary_like(s, {{3, 4, 4}, {3, 3, 3, 3}, {3}, {3, 3, 3, 3}, {3}}, {3, 4, 4}, [](const auto& x) {
                 return mana::residual_block(x[0], mana::ResBlock<double>{conv_of(x[1], x[2]), conv_of(x[3], x[4])});
             });
         }},
        {"model_shared_query", [](auto s) { return end_to_end(s, tiny_config()); }},
        {"model_separate_query", [](auto s) {
             auto cfg = tiny_config();
             cfg.memory_query = mana::MemoryQuery::separate;
             return end_to_end(s, cfg);
         }},
        {"model_global_max", [](auto s) {
             auto cfg = tiny_config();
             cfg.temporal_reduce = TemporalReduce::global_max;
             return end_to_end(s, cfg);
         }},
    };
    return cases;
}

} // namespace gradcheck

#include "mana/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "mana/ops.hpp"

namespace mana {

std::string to_string(MemoryQuery q)
{
    return q == MemoryQuery::shared ? "shared" : "separate";
}

MemoryQuery parse_memory_query(const std::string& s)
{
    if (s == "shared") return MemoryQuery::shared;
    if (s == "separate") return MemoryQuery::separate;
    throw ConfigError("unknown memory query mode '" + s + "' (expected shared or separate)");
}

void ModelConfig::validate() const
{
    if (channels == 0 || channels % 2 != 0) throw ConfigError("model.C must be a positive even number");
    if (frames == 0 || frames % 2 == 0) throw ConfigError("model.T must be a positive odd number");
    if (memory_size == 0) throw ConfigError("model.N must be at least 1");
    if (enc_blocks == 0) throw ConfigError("model.enc_blocks must be at least 1");
    if (dec_blocks == 0) throw ConfigError("model.dec_blocks must be at least 1");
    if (scale != 4) throw ConfigError("model.scale must be 4 (the only supported factor)");
    if (window == 0 || window % 2 == 0) throw ConfigError("model.window must be a positive odd number");
}

ModelConfig ModelConfig::desk()
{
    return ModelConfig{};
}

ModelConfig ModelConfig::paper()
{
    ModelConfig cfg;
    cfg.channels = 128;
    cfg.frames = 7;
    cfg.memory_size = 256;
    cfg.enc_blocks = 5;
    cfg.dec_blocks = 40;
    return cfg;
}

std::string ModelConfig::to_json() const
{
    nlohmann::json j = {
        {"C", channels},
        {"T", frames},
        {"N", memory_size},
        {"enc_blocks", enc_blocks},
        {"dec_blocks", dec_blocks},
        {"scale", scale},
        {"window", window},
        {"temporal_reduce", to_string(temporal_reduce)},
        {"memory_enabled", memory_enabled},
        {"memory_query", to_string(memory_query)},
    };
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text)
{
    ModelConfig cfg;
    try {
        const auto j = nlohmann::json::parse(text);
        cfg.channels = j.at("C").get<std::size_t>();
        cfg.frames = j.at("T").get<std::size_t>();
        cfg.memory_size = j.at("N").get<std::size_t>();
        cfg.enc_blocks = j.at("enc_blocks").get<std::size_t>();
        cfg.dec_blocks = j.at("dec_blocks").get<std::size_t>();
        cfg.scale = j.at("scale").get<std::size_t>();
        cfg.window = j.at("window").get<std::size_t>();
        cfg.temporal_reduce = parse_temporal_reduce(j.at("temporal_reduce").get<std::string>());
        cfg.memory_enabled = j.at("memory_enabled").get<bool>();
        cfg.memory_query = parse_memory_query(j.at("memory_query").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

namespace {

template <typename T>
Conv2dParams<T> zero_conv(std::size_t out, std::size_t in, std::size_t k)
{
    return {Tensor<T>({out, in, k, k}), Tensor<T>({out})};
}

template <typename Model, typename Sink>
void visit_parameters(Model& m, Sink&& sink)
{
    sink("encoder.head.weight", m.encoder_head.weight);
    sink("encoder.head.bias", m.encoder_head.bias);
    for (std::size_t i = 0; i < m.encoder.size(); ++i) {
        const std::string p = "encoder.block" + std::to_string(i);
        sink(p + ".conv1.weight", m.encoder[i].conv1.weight);
        sink(p + ".conv1.bias", m.encoder[i].conv1.bias);
        sink(p + ".conv2.weight", m.encoder[i].conv2.weight);
        sink(p + ".conv2.bias", m.encoder[i].conv2.bias);
    }
    sink("norm.gamma", m.norm.gamma);
    sink("norm.beta", m.norm.beta);
    sink("attention.query.weight", m.qkv.query.weight);
    sink("attention.query.bias", m.qkv.query.bias);
    sink("attention.key.weight", m.qkv.key.weight);
    sink("attention.key.bias", m.qkv.key.bias);
    sink("attention.value.weight", m.qkv.value.weight);
    sink("attention.value.bias", m.qkv.value.bias);
    if (m.config.memory_query == MemoryQuery::separate) {
        sink("memory.query.weight", m.memory_query.weight);
        sink("memory.query.bias", m.memory_query.bias);
    }
    sink("memory.bank", m.memory.m);
    sink("fuse.x.weight", m.fuse_x.weight);
    sink("fuse.x.bias", m.fuse_x.bias);
    sink("fuse.y.weight", m.fuse_y.weight);
    sink("fuse.y.bias", m.fuse_y.bias);
    for (std::size_t i = 0; i < m.decoder.size(); ++i) {
        const std::string p = "decoder.block" + std::to_string(i);
        sink(p + ".conv1.weight", m.decoder[i].conv1.weight);
        sink(p + ".conv1.bias", m.decoder[i].conv1.bias);
        sink(p + ".conv2.weight", m.decoder[i].conv2.weight);
        sink(p + ".conv2.bias", m.decoder[i].conv2.bias);
    }
    for (std::size_t i = 0; i < m.upsample.size(); ++i) {
        sink("upsample." + std::to_string(i) + ".weight", m.upsample[i].weight);
        sink("upsample." + std::to_string(i) + ".bias", m.upsample[i].bias);
    }
    sink("tail.weight", m.tail.weight);
    sink("tail.bias", m.tail.bias);
}

/// Uniform in [0, 1) from the top 53 bits; independent of the standard
/// library's distribution implementations.
double unit_uniform(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng)
{
    const double u1 = 1.0 - unit_uniform(rng);  // (0, 1]
    const double u2 = unit_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool is_fusion_weight(const std::string& name)
{
    return name.rfind("fuse.", 0) == 0;
}

} // namespace

template <typename T>
std::vector<NamedParam<T>> ManaModel<T>::parameters()
{
    std::vector<NamedParam<T>> out;
    visit_parameters(*this, [&](const std::string& name, Tensor<T>& t) { out.push_back({name, &t}); });
    return out;
}

template <typename T>
std::vector<ConstNamedParam<T>> ManaModel<T>::parameters() const
{
    std::vector<ConstNamedParam<T>> out;
    visit_parameters(*this, [&](const std::string& name, const Tensor<T>& t) { out.push_back({name, &t}); });
    return out;
}

template <typename T>
ManaModel<T> make_model_skeleton(const ModelConfig& cfg)
{
    cfg.validate();
    const std::size_t c = cfg.channels, ce = cfg.embed_channels();
    ManaModel<T> m;
    m.config = cfg;
    m.encoder_head = zero_conv<T>(c, 3, 3);
    for (std::size_t i = 0; i < cfg.enc_blocks; ++i) m.encoder.push_back({zero_conv<T>(c, c, 3), zero_conv<T>(c, c, 3)});
    m.norm.groups = default_group_count(c);
    m.norm.gamma = Tensor<T>::full({c}, T(1));
    m.norm.beta = Tensor<T>({c});
    m.norm.eps = 1e-5;
    m.qkv = {zero_conv<T>(ce, c, 1), zero_conv<T>(ce, c, 1), zero_conv<T>(ce, c, 1)};
    if (cfg.memory_query == MemoryQuery::separate) m.memory_query = zero_conv<T>(ce, c, 1);
    m.memory.m = Tensor<T>({ce, cfg.memory_size});
    m.fuse_x = zero_conv<T>(c, ce, 1);
    m.fuse_y = zero_conv<T>(c, ce, 1);
    for (std::size_t i = 0; i < cfg.dec_blocks; ++i) m.decoder.push_back({zero_conv<T>(c, c, 3), zero_conv<T>(c, c, 3)});
    m.upsample = {zero_conv<T>(4 * c, c, 3), zero_conv<T>(4 * c, c, 3)};
    m.tail = zero_conv<T>(3, c, 3);
    return m;
}

template <typename T>
ManaModel<T> init_model(const ModelConfig& cfg, std::uint64_t seed)
{
    ManaModel<T> m = make_model_skeleton<T>(cfg);
    std::mt19937_64 rng(seed);
    const double bank_std = 1.0 / std::sqrt(static_cast<double>(cfg.embed_channels()));
    for (auto& p : m.parameters()) {
        Tensor<T>& t = *p.tensor;
        auto values = t.mutable_data();
        if (p.name == "memory.bank") {
            for (T& v : values) v = static_cast<T>(bank_std * standard_normal(rng));
        } else if (t.rank() == 4 && !is_fusion_weight(p.name)) {
            const double fan_in = static_cast<double>(t.dim(1) * t.dim(2) * t.dim(3));
            const double bound = 1.0 / std::sqrt(fan_in);  // kaiming uniform, negative slope sqrt(5)
            for (T& v : values) v = static_cast<T>((2.0 * unit_uniform(rng) - 1.0) * bound);
        }
        // Biases, norm affine and the fusion convolutions keep skeleton values.
    }
    return m;
}

template <typename To, typename From>
ManaModel<To> cast_model(const ManaModel<From>& model)
{
    ManaModel<To> out = make_model_skeleton<To>(model.config);
    auto dst = out.parameters();
    auto src = model.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<To>();
    out.norm.eps = model.norm.eps;
    return out;
}

std::size_t parameter_count(const ModelConfig& cfg)
{
    return parameter_count(make_model_skeleton<float>(cfg));
}

template <typename T>
std::size_t parameter_count(const ManaModel<T>& model)
{
    std::size_t n = 0;
    for (const auto& p : model.parameters()) n += p.tensor->numel();
    return n;
}

std::vector<std::string> memory_module_parameters(const ModelConfig& cfg)
{
    std::vector<std::string> names{"memory.bank"};
    if (cfg.memory_query == MemoryQuery::separate) {
        names.push_back("memory.query.weight");
        names.push_back("memory.query.bias");
    }
    return names;
}

std::vector<std::string> memory_fusion_parameters()
{
    return {"fuse.y.weight", "fuse.y.bias"};
}

template <typename T>
std::uint64_t parameter_digest(const ManaModel<T>& model, const std::vector<std::string>& names)
{
    const std::set<std::string> wanted(names.begin(), names.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& p : model.parameters()) {
        if (!wanted.empty() && !wanted.count(p.name)) continue;
        feed(p.name.data(), p.name.size());
        for (std::size_t d : p.tensor->shape()) feed(&d, sizeof d);
        auto values = p.tensor->data();
        feed(values.data(), values.size_bytes());
    }
    return h;
}

template <typename T>
Tensor<T> residual_block(const Tensor<T>& x, const ResBlock<T>& block)
{
    return add(x, conv2d(relu(conv2d(x, block.conv1)), block.conv2));
}

template <typename T>
Tensor<T> encode_frames(const ManaModel<T>& model, const Tensor<T>& frames)
{
    const std::size_t channel_axis = frames.rank() == 4 ? 1 : 0;
    if ((frames.rank() != 3 && frames.rank() != 4) || frames.dim(channel_axis) != 3) {
        throw ShapeError("encoder expects RGB frames (3 x H x W or N x 3 x H x W), got " + shape_string(frames.shape()));
    }
    Tensor<T> h = conv2d(frames, model.encoder_head);
    for (const auto& block : model.encoder) h = residual_block(h, block);
    return h;
}

namespace {

template <typename T>
void check_frames(const ManaModel<T>& model, const Tensor<T>& frames)
{
    if (frames.rank() != 4 || frames.dim(1) != 3) {
        throw ShapeError("expected T x 3 x H x W frames, got " + shape_string(frames.shape()));
    }
    if (frames.dim(0) != model.config.frames) {
        throw ShapeError("model expects " + std::to_string(model.config.frames) + " frames, got " +
                         std::to_string(frames.dim(0)));
    }
}

template <typename T>
Tensor<T> memory_query_from(const ManaModel<T>& model, const Tensor<T>& center_norm, const Tensor<T>& shared_query)
{
    if (model.config.memory_query == MemoryQuery::shared) return shared_query;
    return conv2d(center_norm, model.memory_query);
}

} // namespace

template <typename T>
ForwardOutput<T> mana_forward(const ManaModel<T>& model, const Tensor<T>& frames, ForwardOptions options)
{
    check_frames(model, frames);
    const ModelConfig& cfg = model.config;
    const std::size_t center = cfg.center();

    const Tensor<T> features = encode_frames(model, frames);
    Tensor<T> fused = select(features, center);

    ForwardOutput<T> out;
    if (options.attention) {
        const Tensor<T> normed = group_norm(features, model.norm);
        QkvTensors<T> qkv = embed_qkv(normed, model.qkv);
        const auto attn = cross_frame_one_hot_attention(qkv.query, qkv.key, qkv.value, cfg.window, cfg.temporal_reduce);
        if (cfg.memory_enabled) {
            const Tensor<T> query = memory_query_from(model, select(normed, center), qkv.query);
            out.memory_read = memory_attention(query, model.memory);
        }
        fused = fuse_residual(fused, attn.output, out.memory_read, model.fuse_x, model.fuse_y);
        out.query = std::move(qkv.query);
    }

    Tensor<T> h = fused;
    for (const auto& block : model.decoder) h = residual_block(h, block);
    for (const auto& up : model.upsample) h = relu(pixel_shuffle(conv2d(h, up), 2));
    const Tensor<T> detail_residual = conv2d(h, model.tail);
    const Tensor<T> base = bilinear_upsample(select(frames, center), cfg.scale);
    out.output = add(base, detail_residual);
    return out;
}

template <typename T>
MemoryPath<T> memory_path(const ManaModel<T>& model, const Tensor<T>& frames)
{
    check_frames(model, frames);
    const Tensor<T> center = select(frames, model.config.center());
    const Tensor<T> normed = group_norm(encode_frames(model, center), model.norm);
    MemoryPath<T> out;
    const Tensor<T> shared = conv2d(normed, model.qkv.query);
    out.query = memory_query_from(model, normed, shared);
    out.memory_read = memory_attention(out.query, model.memory);
    return out;
}

template <typename T>
Tensor<T> clamp_unit(const Tensor<T>& x)
{
    Tensor<T> out = x.detach();
    for (T& v : out.mutable_data()) v = std::clamp(v, T(0), T(1));
    return out;
}

#define MANA_INSTANTIATE_MODEL(T)                                                                       \
    template struct ManaModel<T>;                                                                        \
    template ManaModel<T> make_model_skeleton<T>(const ModelConfig&);                                    \
    template ManaModel<T> init_model<T>(const ModelConfig&, std::uint64_t);                              \
    template std::size_t parameter_count<T>(const ManaModel<T>&);                                        \
    template std::uint64_t parameter_digest<T>(const ManaModel<T>&, const std::vector<std::string>&);     \
    template Tensor<T> residual_block<T>(const Tensor<T>&, const ResBlock<T>&);                          \
    template Tensor<T> encode_frames<T>(const ManaModel<T>&, const Tensor<T>&);                          \
    template ForwardOutput<T> mana_forward<T>(const ManaModel<T>&, const Tensor<T>&, ForwardOptions);    \
    template MemoryPath<T> memory_path<T>(const ManaModel<T>&, const Tensor<T>&);                        \
    template Tensor<T> clamp_unit<T>(const Tensor<T>&);

MANA_INSTANTIATE_MODEL(float)
MANA_INSTANTIATE_MODEL(double)

template ManaModel<double> cast_model<double, float>(const ManaModel<float>&);
template ManaModel<float> cast_model<float, double>(const ManaModel<double>&);
template ManaModel<float> cast_model<float, float>(const ManaModel<float>&);
template ManaModel<double> cast_model<double, double>(const ManaModel<double>&);

} // namespace mana

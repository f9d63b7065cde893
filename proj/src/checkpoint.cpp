#include "mana/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <map>

namespace mana {

namespace {

constexpr char kMagic[4] = {'M', 'A', 'N', 'A'};

class Writer {
public:
    void bytes(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    template <typename U>
    void le(U value)
    {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    template <typename U>
    U le(const char* what)
    {
        need(sizeof(U), what);
        U value = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
        pos_ += sizeof(U);
        return value;
    }

    std::string string(std::size_t n, const char* what)
    {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n, const char* what) const
    {
        if (in_.size() - pos_ < n) {
            throw CheckpointError(CheckpointError::Kind::corrupt,
                                  std::string("corrupt checkpoint: truncated while reading ") + what);
        }
    }

    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const ManaModel<float>& model)
{
    Writer w;
    w.bytes(kMagic, 4);
    w.le<std::uint32_t>(kCheckpointVersion);
    const auto params = model.parameters();
    w.le<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        w.le<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.le<std::uint8_t>(0);
        w.le<std::uint8_t>(static_cast<std::uint8_t>(p.tensor->rank()));
        for (std::size_t d : p.tensor->shape()) w.le<std::uint64_t>(d);
        for (float v : p.tensor->data()) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
    }
    const std::string config = model.config.to_json();
    w.le<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
    w.bytes(config.data(), config.size());
    return w.take();
}

ManaModel<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes)
{
    using Kind = CheckpointError::Kind;
    Reader r(bytes);
    if (r.string(4, "magic") != std::string(kMagic, 4)) throw CheckpointError(Kind::bad_magic, "not a MANA checkpoint (bad magic)");
    const auto version = r.le<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError(Kind::bad_version, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = r.le<std::uint32_t>("tensor count");

    struct Entry {
        Shape shape;
        std::vector<float> values;
    };
    std::map<std::string, Entry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.le<std::uint16_t>("tensor name length");
        std::string name = r.string(name_len, "tensor name");
        const auto dtype = r.le<std::uint8_t>("dtype");
        if (dtype != 0) throw CheckpointError(Kind::corrupt, "corrupt checkpoint: unknown dtype for " + name);
        const auto rank = r.le<std::uint8_t>("rank");
        Entry e;
        std::size_t n = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            const auto extent = r.le<std::uint64_t>("dims");
            if (extent == 0 || extent > (std::uint64_t{1} << 32)) {
                throw CheckpointError(Kind::corrupt, "corrupt checkpoint: bad extent for " + name);
            }
            e.shape.push_back(static_cast<std::size_t>(extent));
            n *= static_cast<std::size_t>(extent);
            if (n > bytes.size()) throw CheckpointError(Kind::corrupt, "corrupt checkpoint: tensor " + name + " larger than file");
        }
        e.values.resize(n);
        for (float& v : e.values) v = std::bit_cast<float>(r.le<std::uint32_t>("tensor data"));
        if (!entries.emplace(std::move(name), std::move(e)).second) {
            throw CheckpointError(Kind::corrupt, "corrupt checkpoint: duplicate tensor name");
        }
    }
    const auto config_len = r.le<std::uint32_t>("config length");
    const std::string config_text = r.string(config_len, "config");
    if (!r.done()) throw CheckpointError(Kind::corrupt, "corrupt checkpoint: trailing bytes after config");

    ModelConfig cfg;
    try {
        cfg = ModelConfig::from_json(config_text);
    } catch (const ConfigError& e) {
        throw CheckpointError(Kind::corrupt, std::string("corrupt checkpoint: ") + e.what());
    }

    ManaModel<float> model = make_model_skeleton<float>(cfg);
    auto params = model.parameters();
    if (params.size() != entries.size()) {
        throw CheckpointError(Kind::mismatch, "checkpoint holds " + std::to_string(entries.size()) +
                                                  " tensors but its config implies " + std::to_string(params.size()));
    }
    for (auto& p : params) {
        auto it = entries.find(p.name);
        if (it == entries.end()) throw CheckpointError(Kind::mismatch, "checkpoint is missing tensor " + p.name);
        if (it->second.shape != p.tensor->shape()) {
            throw CheckpointError(Kind::mismatch, "tensor " + p.name + " has shape " + shape_string(it->second.shape) +
                                                      ", config expects " + shape_string(p.tensor->shape()));
        }
        *p.tensor = Tensor<float>(it->second.shape, std::move(it->second.values));
    }
    return model;
}

void save_checkpoint(const ManaModel<float>& model, const std::filesystem::path& path)
{
    const auto bytes = encode_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "failed writing " + path.string());
}

ManaModel<float> load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

} // namespace mana

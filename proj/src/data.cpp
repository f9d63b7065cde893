#include "mana/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <png.h>

#include "mana/nn.hpp"

namespace mana {

Tensor<float> Clip::center_frame() const
{
    const std::size_t plane = lr_frames.numel() / lr_frames.dim(0);
    auto all = lr_frames.data().subspan((frames() - 1) / 2 * plane, plane);
    return Tensor<float>({3, lr_frames.dim(2), lr_frames.dim(3)}, std::vector<float>(all.begin(), all.end()));
}

void validate_clip(const Clip& clip, std::size_t frames)
{
    using Kind = DataError::Kind;
    const auto& lr = clip.lr_frames;
    if (lr.rank() != 4 || lr.dim(1) != 3) {
        throw DataError(Kind::not_rgb, "clip " + clip.id + ": frames must be T x 3 x H x W, got " + shape_string(lr.shape()));
    }
    if (lr.dim(0) != frames) {
        throw DataError(Kind::insufficient_frames, "clip " + clip.id + ": expected " + std::to_string(frames) +
                                                       " frames, got " + std::to_string(lr.dim(0)));
    }
    auto in_range = [](const Tensor<float>& t) {
        return std::all_of(t.data().begin(), t.data().end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
    };
    if (!in_range(lr)) throw DataError(Kind::invalid_spec, "clip " + clip.id + ": frame values outside [0, 1]");
    if (clip.hr_center) {
        const Shape want{3, lr.dim(2) * 4, lr.dim(3) * 4};
        if (clip.hr_center->shape() != want) {
            throw DataError(Kind::inconsistent_dims, "clip " + clip.id + ": ground truth " +
                                                         shape_string(clip.hr_center->shape()) + ", expected " +
                                                         shape_string(want));
        }
        if (!in_range(*clip.hr_center)) throw DataError(Kind::invalid_spec, "clip " + clip.id + ": ground truth outside [0, 1]");
    }
}

std::string to_string(Pattern p)
{
    switch (p) {
    case Pattern::checker: return "checker";
    case Pattern::stripes: return "stripes";
    case Pattern::text_noise: return "text_noise";
    case Pattern::gradient_dots: return "gradient_dots";
    }
    return "stripes";
}

Pattern parse_pattern(const std::string& s)
{
    if (s == "checker") return Pattern::checker;
    if (s == "stripes") return Pattern::stripes;
    if (s == "text_noise") return Pattern::text_noise;
    if (s == "gradient_dots") return Pattern::gradient_dots;
    throw ConfigError("unknown pattern '" + s + "' (expected checker, stripes, text_noise or gradient_dots)");
}

namespace {

double unit_uniform(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double wrap(double v, double period)
{
    const double r = std::fmod(v, period);
    return r < 0 ? r + period : r;
}

/// Periodic scalar field on the HR canvas; colors are applied afterwards.
class PatternField {
public:
    PatternField(const SynthSpec& spec) : spec_(spec), w_(static_cast<double>(spec.hr_width)), h_(static_cast<double>(spec.hr_height))
    {
        std::mt19937_64 rng(spec.seed);
        for (int c = 0; c < 3; ++c) {
            dark_[c] = 0.05 + 0.35 * unit_uniform(rng);
            light_[c] = 0.6 + 0.35 * unit_uniform(rng);
        }
        cycles_x_ = 3 + static_cast<int>(rng() % 4);
        cycles_y_ = static_cast<int>(rng() % 3);
        checker_cells_ = 4 + static_cast<int>(rng() % 3) * 2;
        glyph_cell_ = 8;
        const std::size_t gx = std::max<std::size_t>(1, spec.hr_width / glyph_cell_);
        const std::size_t gy = std::max<std::size_t>(1, spec.hr_height / glyph_cell_);
        glyph_cols_ = gx;
        glyph_rows_ = gy;
        glyph_bits_.resize(gx * gy);
        for (auto& bits : glyph_bits_) {
            bits = 0;
            for (int b = 0; b < 16; ++b)
                if (unit_uniform(rng) < 0.4) bits |= (1u << b);
        }
        const int dots = 6 + static_cast<int>(rng() % 6);
        for (int i = 0; i < dots; ++i) {
            dots_.push_back({unit_uniform(rng) * w_, unit_uniform(rng) * h_, 1.5 + 2.5 * unit_uniform(rng)});
        }
    }

    double at(double u, double v) const
    {
        u = wrap(u, w_);
        v = wrap(v, h_);
        switch (spec_.pattern) {
        case Pattern::stripes: {
            const double phase = 2.0 * std::numbers::pi * (cycles_x_ * u / w_ + cycles_y_ * v / h_);
            return 0.5 + 0.5 * std::tanh(3.0 * std::sin(phase));
        }
        case Pattern::checker: {
            const double cw = w_ / checker_cells_, ch = h_ / checker_cells_;
            const long cell = static_cast<long>(std::floor(u / cw)) + static_cast<long>(std::floor(v / ch));
            return (cell % 2 == 0) ? 1.0 : 0.0;
        }
        case Pattern::text_noise: {
            const std::size_t cx = static_cast<std::size_t>(u) / glyph_cell_ % glyph_cols_;
            const std::size_t cy = static_cast<std::size_t>(v) / glyph_cell_ % glyph_rows_;
            const std::size_t bx = static_cast<std::size_t>(u) % glyph_cell_ / (glyph_cell_ / 4);
            const std::size_t by = static_cast<std::size_t>(v) % glyph_cell_ / (glyph_cell_ / 4);
            return (glyph_bits_[cy * glyph_cols_ + cx] >> (by * 4 + bx)) & 1u ? 1.0 : 0.0;
        }
        case Pattern::gradient_dots: {
            double value = 0.8 * (1.0 - std::abs(2.0 * u / w_ - 1.0));
            for (const auto& d : dots_) {
                double dx = std::abs(u - d.x), dy = std::abs(v - d.y);
                dx = std::min(dx, w_ - dx);
                dy = std::min(dy, h_ - dy);
                if (dx * dx + dy * dy <= d.r * d.r) value = 1.0;
            }
            return value;
        }
        }
        return 0.0;
    }

    double color(int c, double t) const { return dark_[c] + (light_[c] - dark_[c]) * t; }

private:
    struct Dot {
        double x, y, r;
    };
    const SynthSpec& spec_;
    double w_, h_;
    double dark_[3]{}, light_[3]{};
    int cycles_x_ = 4, cycles_y_ = 0, checker_cells_ = 4;
    std::size_t glyph_cell_ = 8, glyph_cols_ = 1, glyph_rows_ = 1;
    std::vector<std::uint32_t> glyph_bits_;
    std::vector<Dot> dots_;
};

void check_spec(const SynthSpec& spec)
{
    using Kind = DataError::Kind;
    if (spec.frames == 0 || spec.frames % 2 == 0) throw DataError(Kind::invalid_spec, "synthetic clip needs an odd frame count");
    if (spec.hr_height == 0 || spec.hr_width == 0 || spec.hr_height % 4 != 0 || spec.hr_width % 4 != 0) {
        throw DataError(Kind::invalid_spec, "synthetic HR size must be a positive multiple of 4");
    }
    if (!std::isfinite(spec.motion_x) || !std::isfinite(spec.motion_y)) {
        throw DataError(Kind::invalid_spec, "synthetic motion must be finite");
    }
}

} // namespace

Tensor<float> synth_hr_frames(const SynthSpec& spec)
{
    check_spec(spec);
    const PatternField field(spec);
    const std::size_t h = spec.hr_height, w = spec.hr_width;
    Tensor<float> frames({spec.frames, 3, h, w});
    auto out = frames.mutable_data();
    const double center = static_cast<double>((spec.frames - 1) / 2);
    for (std::size_t i = 0; i < spec.frames; ++i) {
        const double shift_x = spec.motion_x * (static_cast<double>(i) - center);
        const double shift_y = spec.motion_y * (static_cast<double>(i) - center);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double t = field.at(static_cast<double>(x) + 0.5 - shift_x, static_cast<double>(y) + 0.5 - shift_y);
                for (int c = 0; c < 3; ++c)
                    out[((i * 3 + static_cast<std::size_t>(c)) * h + y) * w + x] = static_cast<float>(field.color(c, t));
            }
    }
    return frames;
}

Tensor<float> degrade(const Tensor<float>& hr_frames)
{
    if (hr_frames.rank() != 4 || hr_frames.dim(1) != 3) {
        throw ShapeError("degrade: expected T x 3 x H x W, got " + shape_string(hr_frames.shape()));
    }
    Tensor<float> lr = bicubic_downsample(hr_frames.detach(), 4);
    for (float& v : lr.mutable_data()) v = std::clamp(v, 0.0f, 1.0f);
    return lr;
}

Clip synth_clip(const SynthSpec& spec)
{
    const Tensor<float> hr = synth_hr_frames(spec);
    Clip clip;
    clip.id = "synth-" + to_string(spec.pattern) + "-" + std::to_string(spec.seed);
    clip.lr_frames = degrade(hr);
    const std::size_t plane = 3 * spec.hr_height * spec.hr_width;
    auto center = hr.data().subspan((spec.frames - 1) / 2 * plane, plane);
    clip.hr_center = Tensor<float>({3, spec.hr_height, spec.hr_width}, std::vector<float>(center.begin(), center.end()));
    return clip;
}

Tensor<float> read_png(const std::filesystem::path& path)
{
    using Kind = DataError::Kind;
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw DataError(Kind::unreadable, "cannot read PNG " + path.string() + ": " + image.message);
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    const bool wide = (image.format & PNG_FORMAT_FLAG_LINEAR) != 0;
    if (!color || alpha || wide) {
        png_image_free(&image);
        throw DataError(Kind::not_rgb, "PNG " + path.string() + " is not 8-bit RGB");
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        throw DataError(Kind::unreadable, "cannot decode PNG " + path.string() + ": " + image.message);
    }
    const std::size_t h = image.height, w = image.width;
    Tensor<float> out({3, h, w});
    auto o = out.mutable_data();
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) o[(c * h + y) * w + x] = static_cast<float>(buffer[(y * w + x) * 3 + c]) / 255.0f;
    return out;
}

void write_png(const std::filesystem::path& path, const Tensor<float>& image)
{
    if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_png: expected 3 x H x W, got " + shape_string(image.shape()));
    const std::size_t h = image.dim(1), w = image.dim(2);
    std::vector<png_byte> buffer(h * w * 3);
    auto in = image.data();
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const float v = std::clamp(in[(c * h + y) * w + x], 0.0f, 1.0f);
                buffer[(y * w + x) * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0f));
            }
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(w);
    png.height = static_cast<png_uint_32>(h);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
        throw DataError(DataError::Kind::unreadable, "cannot write PNG " + path.string() + ": " + png.message);
    }
}

std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
        throw DataError(DataError::Kind::unreadable, "not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

namespace {

Tensor<float> stack_frames(const std::vector<Tensor<float>>& frames)
{
    const Shape& first = frames.front().shape();
    std::vector<float> values;
    values.reserve(frames.size() * frames.front().numel());
    for (const auto& f : frames) values.insert(values.end(), f.data().begin(), f.data().end());
    return Tensor<float>({frames.size(), first[0], first[1], first[2]}, std::move(values));
}

std::vector<Tensor<float>> read_consistent(const std::vector<std::filesystem::path>& files)
{
    std::vector<Tensor<float>> frames;
    for (const auto& f : files) {
        frames.push_back(read_png(f));
        if (frames.back().shape() != frames.front().shape()) {
            throw DataError(DataError::Kind::inconsistent_dims, "frame " + f.string() + " has size " +
                                                                    shape_string(frames.back().shape()) + ", expected " +
                                                                    shape_string(frames.front().shape()));
        }
    }
    return frames;
}

} // namespace

Tensor<float> load_png_frames(const std::filesystem::path& dir)
{
    const auto files = list_png_files(dir);
    if (files.empty()) throw DataError(DataError::Kind::insufficient_frames, "no PNG frames in " + dir.string());
    return stack_frames(read_consistent(files));
}

Clip load_png_sequence(const std::filesystem::path& lr_dir, std::size_t frames,
                       const std::optional<std::filesystem::path>& hr_dir)
{
    using Kind = DataError::Kind;
    const auto files = list_png_files(lr_dir);
    if (files.size() < frames) {
        throw DataError(Kind::insufficient_frames, "insufficient frames in " + lr_dir.string() + ": need " +
                                                       std::to_string(frames) + ", found " + std::to_string(files.size()));
    }
    const std::size_t start = (files.size() - frames) / 2;
    const std::vector<std::filesystem::path> window(files.begin() + static_cast<std::ptrdiff_t>(start),
                                                    files.begin() + static_cast<std::ptrdiff_t>(start + frames));
    Clip clip;
    const auto& center_file = window[(frames - 1) / 2];
    clip.id = lr_dir.filename().string() + "/" + center_file.stem().string();
    clip.lr_frames = stack_frames(read_consistent(window));
    if (hr_dir) {
        const auto hr_files = list_png_files(*hr_dir);
        if (hr_files.size() != files.size()) {
            throw DataError(Kind::unpaired, "HR directory " + hr_dir->string() + " has " + std::to_string(hr_files.size()) +
                                                " frames, LR has " + std::to_string(files.size()));
        }
        clip.hr_center = read_png(hr_files[start + (frames - 1) / 2]);
    }
    validate_clip(clip, frames);
    return clip;
}

} // namespace mana

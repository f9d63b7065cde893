#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <random>

#include "mana/data.hpp"
#include "mana/nn.hpp"
#include "mana/ops.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using mana::DataError;
using mana::Pattern;
using mana::SynthSpec;
using mana::Tensor;

namespace {

std::vector<double> gray(const Tensor<float>& frames, std::size_t i)
{
    const std::size_t h = frames.dim(2), w = frames.dim(3);
    std::vector<double> out(h * w, 0.0);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < h * w; ++p) out[p] += frames[((i * 3 + c) * h * w) + p] / 3.0;
    return out;
}

DataError::Kind error_kind(const std::function<void()>& f)
{
    try {
        f();
    } catch (const DataError& e) {
        return e.kind();
    }
    FAIL("expected a DataError");
    return DataError::Kind::unreadable;
}

} // namespace

TEST_CASE("static scene gives identical frames")
{
    for (auto pattern : {Pattern::checker, Pattern::stripes, Pattern::text_noise, Pattern::gradient_dots}) {
        SynthSpec spec;
        spec.pattern = pattern;
        spec.motion_x = 0;
        spec.motion_y = 0;
        const auto clip = mana::synth_clip(spec);
        for (std::size_t i = 1; i < 7; ++i) CHECK(mana::select(clip.lr_frames, i).same_values(mana::select(clip.lr_frames, 0)));
    }
}

TEST_CASE("40 px per frame at HR is a 10 px LR shift")
{
    SynthSpec spec;
    spec.pattern = Pattern::text_noise;
    spec.motion_x = 40;
    spec.seed = 3;
    const auto clip = mana::synth_clip(spec);
    for (std::size_t i = 0; i + 1 < 7; ++i) {
        CHECK(oracle::phase_correlation_shift(gray(clip.lr_frames, i), gray(clip.lr_frames, i + 1), 16, 16) == 10);
    }
}

TEST_CASE("synthesis is deterministic and satisfies clip invariants")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 12; ++trial) {
        SynthSpec spec;
        spec.pattern = static_cast<Pattern>(trial % 4);
        spec.frames = 1 + 2 * (rng() % 4);
        spec.hr_height = 4 * (4 + rng() % 12);
        spec.hr_width = 4 * (4 + rng() % 12);
        spec.motion_x = std::uniform_real_distribution<double>(-12, 12)(rng);
        spec.motion_y = std::uniform_real_distribution<double>(-12, 12)(rng);
        spec.seed = rng();
        const auto a = mana::synth_clip(spec);
        const auto b = mana::synth_clip(spec);
        CHECK(a.lr_frames.same_values(b.lr_frames));
        CHECK(a.hr_center->same_values(*b.hr_center));
        CHECK_NOTHROW(mana::validate_clip(a, spec.frames));
        CHECK(a.lr_frames.shape() == mana::Shape{spec.frames, 3, spec.hr_height / 4, spec.hr_width / 4});
    }
    SynthSpec bad;
    bad.hr_height = 62;
    CHECK(error_kind([&] { mana::synth_clip(bad); }) == DataError::Kind::invalid_spec);
    bad = SynthSpec{};
    bad.motion_x = std::numeric_limits<double>::infinity();
    CHECK(error_kind([&] { mana::synth_clip(bad); }) == DataError::Kind::invalid_spec);
}

TEST_CASE("degradation")
{
    const auto white = mana::degrade(Tensor<float>({2, 3, 16, 16}, 1.0f));
    for (float v : white.data()) CHECK(v == doctest::Approx(1.0f).epsilon(1e-6));

    Tensor<float> harsh({1, 3, 16, 16});
    auto d = harsh.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = ((i / 2 + i / 32) % 2) ? 1.0f : 0.0f;
    const auto ringing = mana::degrade(harsh);
    for (float v : ringing.data()) CHECK((v >= 0.0f && v <= 1.0f));

    std::mt19937_64 rng(2);
    const auto hr = oracle::uniform<float>({2, 3, 8, 8}, rng, 0.2, 0.8);
    const auto lr = mana::degrade(hr);
    const auto x = oracle::values(hr);
    for (std::size_t plane = 0; plane < 6; ++plane) {
        const std::vector<double> p(x.begin() + plane * 64, x.begin() + (plane + 1) * 64);
        for (std::size_t y = 0; y < 2; ++y)
            for (std::size_t xx = 0; xx < 2; ++xx) {
                const double ref = std::clamp(oracle::bicubic_at(p, 8, 8, 4, y, xx), 0.0, 1.0);
                CHECK(std::abs(lr[plane * 4 + y * 2 + xx] - ref) < 1e-6);
            }
    }
    CHECK_THROWS_AS(mana::degrade(Tensor<float>({1, 3, 10, 8})), mana::ShapeError);
}

TEST_CASE("png round trip and sequence loading")
{
    const TempDir dir;
    std::mt19937_64 rng(4);
    Tensor<float> img({3, 5, 7});
    for (float& v : img.mutable_data()) v = static_cast<float>(rng() % 256) / 255.0f;
    mana::write_png(dir / "a.png", img);
    const auto back = mana::read_png(dir / "a.png");
    CHECK(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.numel(); ++i)
        CHECK(std::lround(back[i] * 255.0f) == std::lround(img[i] * 255.0f));

    const auto seq = dir / "seq";
    std::filesystem::create_directories(seq);
    for (int i = 0; i < 7; ++i) mana::write_png(seq / ("f" + std::to_string(i) + ".png"), img);
    const auto clip = mana::load_png_sequence(seq, 7);
    CHECK(clip.frames() == 7);
    for (std::size_t i = 1; i < 7; ++i) CHECK(mana::select(clip.lr_frames, i).same_values(mana::select(clip.lr_frames, 0)));

    std::filesystem::remove(seq / "f6.png");
    CHECK(error_kind([&] { mana::load_png_sequence(seq, 7); }) == DataError::Kind::insufficient_frames);
    try {
        mana::load_png_sequence(seq, 7);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("insufficient frames") != std::string::npos);
    }

    mana::write_png(seq / "f6.png", Tensor<float>({3, 6, 7}, 0.5f));
    CHECK(error_kind([&] { mana::load_png_sequence(seq, 7); }) == DataError::Kind::inconsistent_dims);

    { std::ofstream(dir / "junk.png") << "not a png"; }
    CHECK(error_kind([&] { mana::read_png(dir / "junk.png"); }) == DataError::Kind::unreadable);
}

TEST_CASE("centered window and ground truth pairing")
{
    const TempDir dir;
    const auto lr = dir / "lr", hr = dir / "hr";
    std::filesystem::create_directories(lr);
    std::filesystem::create_directories(hr);
    for (int i = 0; i < 9; ++i) {
        const float v = static_cast<float>(i) / 8.0f;
        const std::string name = "frame" + std::to_string(i) + ".png";
        mana::write_png(lr / name, Tensor<float>({3, 4, 4}, v));
        mana::write_png(hr / name, Tensor<float>({3, 16, 16}, v));
    }
    const auto clip = mana::load_png_sequence(lr, 7, hr);
    CHECK(clip.lr_frames[0] == doctest::Approx(1.0f / 8).epsilon(0.01));
    REQUIRE(clip.hr_center.has_value());
    CHECK((*clip.hr_center)[0] == doctest::Approx(4.0f / 8).epsilon(0.01));

    std::filesystem::remove(hr / "frame0.png");
    CHECK(error_kind([&] { mana::load_png_sequence(lr, 7, hr); }) == DataError::Kind::unpaired);
}

TEST_CASE("pattern names")
{
    for (auto p : {Pattern::checker, Pattern::stripes, Pattern::text_noise, Pattern::gradient_dots})
        CHECK(mana::parse_pattern(mana::to_string(p)) == p);
    CHECK_THROWS_AS(mana::parse_pattern("plaid"), mana::ConfigError);
}

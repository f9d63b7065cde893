#include <doctest.h>

#include <cmath>
#include <random>

#include "mana/metrics.hpp"
#include "support/oracles.hpp"

using mana::Tensor;

namespace {

double psnr_oracle(const Tensor<float>& a, const Tensor<float>& b)
{
    double se = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) se += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
    return 10 * std::log10(1.0 / (se / double(a.numel())));
}

Tensor<float> noisy(const Tensor<float>& a, std::mt19937_64& rng, double sigma)
{
    Tensor<float> out = a;
    std::normal_distribution<double> n(0, sigma);
    for (float& v : out.mutable_data()) v = static_cast<float>(std::clamp(v + n(rng), 0.0, 1.0));
    return out;
}

} // namespace

TEST_CASE("psnr examples")
{
    const Tensor<float> a({3, 8, 8}, 0.4f);
    CHECK(mana::psnr(a, a) == mana::kPsnrCap);
    const Tensor<float> b({3, 8, 8}, 0.5f);
    CHECK(mana::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
    CHECK_THROWS_AS(mana::psnr(a, Tensor<float>({3, 8, 9}, 0.0f)), mana::ShapeError);
}

TEST_CASE("psnr matches the oracle, is symmetric and falls with noise")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = oracle::uniform<float>({3, 12, 12}, rng, 0, 1);
        const auto b = noisy(a, rng, 0.05);
        CHECK(std::abs(mana::psnr(a, b) - psnr_oracle(a, b)) < 1e-9);
        CHECK(mana::psnr(a, b) == mana::psnr(b, a));
        const auto c = noisy(a, rng, 0.2);
        CHECK(mana::psnr(a, c) < mana::psnr(a, b));
    }
}

TEST_CASE("ssim examples")
{
    std::mt19937_64 rng(6);
    const auto a = oracle::uniform<float>({3, 16, 16}, rng, 0, 1);
    CHECK(mana::ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    const Tensor<float> flat({3, 16, 16}, 0.3f);
    CHECK(mana::ssim(flat, flat) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(mana::ssim(Tensor<float>({3, 10, 16}, 0.f), Tensor<float>({3, 10, 16}, 0.f)), mana::ShapeError);
}

TEST_CASE("ssim matches the 2-D window oracle")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t h = 11 + rng() % 10, w = 11 + rng() % 10;
        const auto a = oracle::uniform<float>({3, h, w}, rng, 0, 1);
        const auto b = noisy(a, rng, 0.1 * (1 + trial % 3));
        const double s = mana::ssim(a, b);
        CHECK(std::abs(s - oracle::ssim(a, b)) < 1e-6);
        CHECK(std::abs(s - mana::ssim(b, a)) < 1e-12);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("aggregate rows are per-method means")
{
    const std::vector<mana::MetricRow> rows{
        {"a", "mana", 30, 0.9}, {"a", "bilinear", 20, 0.7}, {"b", "mana", 32, 0.8}, {"b", "bilinear", 24, 0.5}};
    const auto agg = mana::aggregate_rows(rows);
    REQUIRE(agg.size() == 2);
    CHECK(agg[0].clip == "mean");
    CHECK(agg[0].method == "mana");
    CHECK(agg[0].psnr_db == doctest::Approx(31));
    CHECK(agg[0].ssim == doctest::Approx(0.85));
    CHECK(agg[1].method == "bilinear");
    CHECK(agg[1].psnr_db == doctest::Approx(22));
    const auto csv = mana::metrics_csv(rows);
    CHECK(csv.rfind("clip,method,psnr_db,ssim\n", 0) == 0);
    CHECK(csv.find("\na,mana,30,") != std::string::npos);
}

#include <doctest.h>

#include "mana/ops.hpp"
#include "support/oracles.hpp"

using mana::Tensor;

TEST_CASE("elementwise add, mul, zero and identity")
{
    const Tensor<double> a({2}, std::vector<double>{1, 2});
    const Tensor<double> b({2}, std::vector<double>{3, 4});
    const auto c = mana::add(a, b);
    std::vector<double> expected(2);
    for (std::size_t i = 0; i < 2; ++i) expected[i] = a[i] + b[i];
    CHECK(oracle::max_abs_diff(c, expected) == 0.0);

    std::mt19937_64 rng(2);
    const auto x = oracle::uniform<double>({3, 4}, rng);
    const auto zero = mana::mul(x, Tensor<double>::zeros_like(x));
    for (double v : zero.data()) CHECK(v == 0.0);
    CHECK(mana::scale(x, 0.0).shape() == x.shape());
    CHECK(mana::add(x, Tensor<double>::zeros_like(x)).same_values(x));
    CHECK_THROWS_AS(mana::add(x, oracle::uniform<double>({4, 3}, rng)), mana::ShapeError);
}

TEST_CASE("matmul against the triple-loop oracle")
{
    const Tensor<double> a({2, 2}, std::vector<double>{1, 2, 3, 4});
    const Tensor<double> b({2, 1}, std::vector<double>{5, 6});
    const auto c = mana::matmul(a, b);
    CHECK(c.shape() == mana::Shape{2, 1});
    CHECK(oracle::max_abs_diff(c, oracle::matmul(oracle::values(a), oracle::values(b), 2, 2, 1)) == 0.0);

    const Tensor<double> eye({2, 2}, std::vector<double>{1, 0, 0, 1});
    CHECK(mana::matmul(eye, a).same_values(a));
    const auto zero = mana::matmul(a, Tensor<double>::zeros({2, 3}));
    for (double v : zero.data()) CHECK(v == 0.0);

    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng() % 6, k = 1 + rng() % 6, n = 1 + rng() % 6;
        const auto x = oracle::uniform<double>({m, k}, rng), y = oracle::uniform<double>({k, n}, rng);
        CHECK(oracle::max_abs_diff(mana::matmul(x, y), oracle::matmul(oracle::values(x), oracle::values(y), m, k, n)) < 1e-12);
    }
    CHECK_THROWS_AS(mana::matmul(a, Tensor<double>::zeros({3, 1})), mana::ShapeError);
}

TEST_CASE("layout ops")
{
    std::mt19937_64 rng(4);
    const auto x = oracle::uniform<double>({2, 3, 4, 5}, rng);
    const auto s = mana::swap_leading_axes(x);
    CHECK(s.shape() == mana::Shape{3, 2, 4, 5});
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t i = 0; i < 20; ++i) CHECK(s[(b * 2 + a) * 20 + i] == x[(a * 3 + b) * 20 + i]);
    CHECK(mana::swap_leading_axes(s).same_values(x));

    const auto sel = mana::select(x, 1);
    CHECK(sel.shape() == mana::Shape{3, 4, 5});
    CHECK(sel[0] == x[60]);

    const auto m = oracle::uniform<double>({3, 4}, rng);
    const auto t = mana::transpose(m);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(t[j * 3 + i] == m[i * 4 + j]);
    CHECK_THROWS_AS(mana::reshape(m, {5, 2}), mana::ShapeError);
}

TEST_CASE("reductions")
{
    const Tensor<double> a({4}, std::vector<double>{1, -2, 3, 0.5});
    CHECK(mana::sum(a).item() == doctest::Approx(2.5));
    CHECK(mana::mean(a).item() == doctest::Approx(0.625));
    const Tensor<double> b({4}, std::vector<double>{0, 0, 0, 0});
    CHECK(mana::mean_abs_diff(a, b).item() == doctest::Approx(6.5 / 4));
    CHECK(mana::mean_abs_diff(a, a).item() == 0.0);
}

#include <doctest.h>

#include "support/grad_cases.hpp"

TEST_CASE("every gradient case agrees with central differences")
{
    for (const auto& c : gradcheck::catalog()) {
        for (std::uint64_t seed : {11u, 12u}) {
            const auto r = c.run(seed);
            INFO(c.name << " seed " << seed << " worst " << r.worst << " at " << r.where << " (skipped " << r.skipped << ")");
            CHECK(r.ok());
        }
    }
}

TEST_CASE("x * x has gradient 2x")
{
    std::mt19937_64 rng(3);
    mana::Tensor<double> x = oracle::uniform<double>({5}, rng);
    mana::Tape<double> tape;
    tape.watch(x);
    const auto g = tape.backward(mana::sum(mana::mul(x, x))).of(x);
    for (std::size_t i = 0; i < 5; ++i) CHECK(g[i] == doctest::Approx(2 * x[i]).epsilon(1e-12));

    const auto r = gradcheck::check({x.detach()}, [](const auto& xs) { return mana::sum(mana::mul(xs[0], xs[0])); }, rng);
    CHECK(r.ok());
}

TEST_CASE("relu gradient at 3 and -3")
{
    std::mt19937_64 rng(1);
    const mana::Tensor<double> x({2}, std::vector<double>{3.0, -3.0});
    mana::Tensor<double> w = x;
    mana::Tape<double> tape;
    tape.watch(w);
    const auto g = tape.backward(mana::sum(mana::relu(w))).of(w);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 0.0);
    const auto r = gradcheck::check({x}, [](const auto& xs) { return mana::sum(mana::relu(xs[0])); }, rng);
    CHECK(r.checked == 2);
    CHECK(r.ok());
}

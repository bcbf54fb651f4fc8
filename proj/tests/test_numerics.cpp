#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "elab/numerics.hpp"
#include "elab/rng.hpp"
#include "test_oracles.hpp"

using Catch::Approx;
using elab::Vec;

TEST_CASE("log_sum_exp basics") {
    REQUIRE(elab::log_sum_exp({0.0, 0.0}) == Approx(std::log(2.0)).margin(1e-12));
    REQUIRE(elab::log_sum_exp({1000.0, 1000.0}) == Approx(1000.0 + std::log(2.0)).margin(1e-9));
    REQUIRE(std::isfinite(elab::log_sum_exp({700.0, 700.0, 700.0})));
    REQUIRE(std::isfinite(elab::log_sum_exp({-700.0, -700.0})));

    const Vec z{3.0, 1.0, -1.0};
    const double expected = oracle::lse_extended(z);
    REQUIRE(elab::log_sum_exp(z) == Approx(expected).epsilon(1e-12));
    REQUIRE(expected == Approx(3.142928).margin(1e-6));
}

TEST_CASE("log_sum_exp rejects empty input") {
    REQUIRE_THROWS_WITH(elab::log_sum_exp(std::span<const double>{}), "empty reduction");
    const Vec z{1.0};
    REQUIRE_THROWS_AS(elab::log_sum_exp_excluding(z, 0), std::invalid_argument);
}

TEST_CASE("log_sum_exp matches extended-precision oracle on random draws") {
    elab::Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + rng.bounded(9);
        Vec z(k);
        for (double& v : z) v = rng.uniform_range(-50.0, 50.0);
        const double expected = oracle::lse_extended(z);
        REQUIRE(elab::log_sum_exp(z) ==
                Approx(expected).epsilon(1e-12).margin(1e-12));
    }
}

TEST_CASE("log_sum_exp shift property") {
    elab::Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        Vec z(4);
        for (double& v : z) v = rng.uniform_range(-20.0, 20.0);
        const double c = rng.uniform_range(-100.0, 100.0);
        Vec shifted = z;
        for (double& v : shifted) v += c;
        REQUIRE(elab::log_sum_exp(shifted) ==
                Approx(elab::log_sum_exp(z) + c).margin(1e-12 * std::max(1.0, std::abs(c)) * 10));
    }
}

TEST_CASE("softmax basics") {
    const Vec half = elab::softmax(Vec{0.0, 0.0});
    REQUIRE(half[0] == Approx(0.5).margin(1e-15));
    REQUIRE(half[1] == Approx(0.5).margin(1e-15));

    const Vec p = elab::softmax(Vec{1.0, 0.0});
    REQUIRE(p[0] == Approx(0.731059).margin(1e-6));
    REQUIRE(p[1] == Approx(0.268941).margin(1e-6));

    const Vec thirds = elab::softmax(Vec{7.3, 7.3, 7.3});
    for (double v : thirds) REQUIRE(v == Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("softmax is a probability vector and shift-invariant") {
    elab::Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + rng.bounded(7);
        Vec z(k);
        for (double& v : z) v = rng.uniform_range(-30.0, 30.0);
        const Vec p = elab::softmax(z);
        long double sum = 0.0L;
        for (double v : p) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
            sum += v;
        }
        REQUIRE(static_cast<double>(sum) == Approx(1.0).margin(1e-9));

        const double c = rng.uniform_range(-100.0, 100.0);
        Vec shifted = z;
        for (double& v : shifted) v += c;
        const Vec ps = elab::softmax(shifted);
        for (std::size_t i = 0; i < k; ++i) REQUIRE(ps[i] == Approx(p[i]).margin(1e-12));
    }
}

TEST_CASE("sigmoid") {
    REQUIRE(elab::sigmoid(0.0) == 0.5);
    REQUIRE(elab::sigmoid(40.0) == Approx(1.0).margin(1e-15));
    REQUIRE(elab::sigmoid(std::log(3.0)) == Approx(0.75).margin(1e-15));
    REQUIRE(elab::sigmoid(-745.0) >= 0.0);
    REQUIRE(elab::sigmoid(745.0) <= 1.0);
    REQUIRE(elab::sigmoid(-40.0) == Approx(0.0).margin(1e-15));
}

TEST_CASE("argmax breaks ties toward the lowest index") {
    REQUIRE(elab::argmax(Vec{1.0, 3.0, 3.0}) == 1);
    REQUIRE(elab::argmax(Vec{5.0, 5.0}) == 0);
}

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "graphlq/series.hpp"
#include "testutil.hpp"

using namespace graphlq;
using namespace testutil;

namespace {

// Plain truncated convolution with no masking anywhere; the reference the
// law-aware product is checked against.
std::vector<Eigen::MatrixXd> reference_convolution(const MatrixSeries& g1,
                                                   const MatrixSeries& g2) {
    const int T = std::min(g1.horizon(), g2.horizon());
    std::vector<Eigen::MatrixXd> out;
    for (int t = 0; t <= T; ++t) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(g1.rows(), g2.cols());
        for (int s = 0; s <= t; ++s) acc += g1.coeff(s) * g2.coeff(t - s);
        out.push_back(acc);
    }
    return out;
}

}  // namespace

TEST_SUITE("series") {

TEST_CASE("constructor with a law rejects entries on forbidden blocks") {
    const AdjacencyMatrix chain = chain_graph(3);
    std::vector<Eigen::MatrixXd> coeffs = {Eigen::MatrixXd::Zero(3, 3),
                                           Eigen::MatrixXd::Zero(3, 3)};
    coeffs[1](2, 0) = 1.0;  // block (3, 1) is forbidden at every lag
    CHECK_THROWS_AS(MatrixSeries(coeffs, {1, 1, 1}, {1, 1, 1}, chain), std::invalid_argument);
    CHECK_NOTHROW(MatrixSeries::masked(coeffs, {1, 1, 1}, {1, 1, 1}, chain));
}

TEST_CASE("masked zeroes exactly the forbidden blocks") {
    const AdjacencyMatrix chain = chain_graph(3);
    std::vector<Eigen::MatrixXd> coeffs;
    for (int t = 0; t <= 2; ++t) coeffs.push_back(Eigen::MatrixXd::Ones(3, 3));
    const MatrixSeries g = MatrixSeries::masked(coeffs, {1, 1, 1}, {1, 1, 1}, chain);
    CHECK(g.coeff(0)(0, 1) == 0.0);
    CHECK(g.coeff(1)(0, 1) == 1.0);
    CHECK(g.coeff(1)(0, 2) == 0.0);
    CHECK(g.coeff(2)(0, 2) == 1.0);
    CHECK(g.coeff(2)(1, 0) == 0.0);
    CHECK(membership(g, chain, 0.0));
}

TEST_CASE("constructor validates partition sums and coefficient shapes") {
    std::vector<Eigen::MatrixXd> coeffs = {Eigen::MatrixXd::Zero(3, 2)};
    CHECK_THROWS_AS(MatrixSeries(coeffs, {1, 1}, {1, 1}, std::nullopt), std::invalid_argument);
    CHECK_THROWS_AS(MatrixSeries(std::vector<Eigen::MatrixXd>{}, {1}, {1}, std::nullopt),
                    std::invalid_argument);
}

TEST_CASE("zero builds a zero series with the right shape") {
    const MatrixSeries z = MatrixSeries::zero(3, {2, 1}, {1, 2}, chain_graph(2));
    CHECK(z.horizon() == 3);
    CHECK(z.rows() == 3);
    CHECK(z.cols() == 3);
    for (int t = 0; t <= 3; ++t) CHECK(max_abs(z.coeff(t)) == 0.0);
}

TEST_CASE("block accessor addresses the partition") {
    Rng rng(7);
    const MatrixSeries g = random_masked_series(rng, {2, 1}, {1, 2}, chain_graph(2), 2);
    CHECK(g.block(1, 0, 1).rows() == 2);
    CHECK(g.block(1, 0, 1).cols() == 2);
    CHECK(g.block(1, 0, 1)(0, 0) == g.coeff(1)(0, 1));
    CHECK(g.block(2, 1, 0).rows() == 1);
    CHECK(g.block(2, 1, 0)(0, 0) == g.coeff(2)(2, 0));
}

TEST_CASE("multiply matches the reference convolution on admissible blocks") {
    Rng rng(101);
    const AdjacencyMatrix chain = chain_graph(3);
    const MatrixSeries g1 = random_masked_series(rng, {2, 1, 2}, {1, 2, 1}, chain, 5);
    const MatrixSeries g2 = random_masked_series(rng, {1, 2, 1}, {2, 2, 2}, chain, 5);
    const MatrixSeries g3 = multiply(g1, g2);
    const auto ref = reference_convolution(g1, g2);
    REQUIRE(g3.horizon() == 5);
    for (int t = 0; t <= 5; ++t) {
        // The raw convolution of law-respecting factors already lands in the law,
        // so masking changes nothing.
        CHECK(max_abs(g3.coeff(t) - ref[static_cast<std::size_t>(t)]) == 0.0);
    }
    CHECK(membership(g3, chain, 0.0));
}

TEST_CASE("product of law-respecting series stays in the law with exact zeros") {
    // The raw product is computed with the law stripped from both factors, so
    // the zeros on forbidden blocks are produced by cancellation-free sums of
    // zero terms, not by re-masking.
    Rng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const int N = 2 + static_cast<int>(rng.next_u64() % 4);
        AdjacencyMatrix a = AdjacencyMatrix::Identity(N, N);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                if (i != j && rng.next_unit() < 0.4) a(i, j) = 1;
        const int T = 1 + static_cast<int>(rng.next_u64() % 10);
        std::vector<int> dims;
        for (int i = 0; i < N; ++i) dims.push_back(1 + static_cast<int>(rng.next_u64() % 2));
        const MatrixSeries g1 = random_masked_series(rng, dims, dims, a, T);
        const MatrixSeries g2 = random_masked_series(rng, dims, dims, a, T);
        const MatrixSeries raw = multiply(lawless(g1), lawless(g2));
        CHECK(membership(raw, a, 0.0));
    }
}

TEST_CASE("multiply truncates to the shorter factor") {
    Rng rng(11);
    const AdjacencyMatrix a = identity_graph(2);
    const MatrixSeries g1 = random_masked_series(rng, {1, 1}, {1, 1}, a, 7);
    const MatrixSeries g2 = random_masked_series(rng, {1, 1}, {1, 1}, a, 3);
    CHECK(multiply(g1, g2).horizon() == 3);
    CHECK(multiply(g2, g1).horizon() == 3);
}

TEST_CASE("multiply rejects partition mismatches") {
    Rng rng(12);
    const AdjacencyMatrix a = identity_graph(2);
    const MatrixSeries g1 = random_masked_series(rng, {1, 1}, {2, 1}, a, 2);
    const MatrixSeries g2 = random_masked_series(rng, {1, 2}, {1, 1}, a, 2);
    CHECK_THROWS_AS(multiply(g1, g2), std::invalid_argument);
}

TEST_CASE("multiply rejects different laws and accepts a lawless factor") {
    Rng rng(13);
    const MatrixSeries g1 = random_masked_series(rng, {1, 1, 1}, {1, 1, 1}, chain_graph(3), 3);
    const MatrixSeries g2 = random_masked_series(rng, {1, 1, 1}, {1, 1, 1}, cycle_graph(3), 3);
    CHECK_THROWS_AS(multiply(g1, g2), std::invalid_argument);
    const MatrixSeries mixed = multiply(g1, lawless(g2));
    REQUIRE(mixed.law().has_value());
    CHECK((*mixed.law() == chain_graph(3)));
    CHECK(membership(mixed, chain_graph(3), 0.0));
}

TEST_CASE("scalar chain blocks: forbidden block fills in exactly at lag 2") {
    const AdjacencyMatrix chain = chain_graph(3);
    std::vector<Eigen::MatrixXd> ones = {Eigen::MatrixXd::Ones(3, 3),
                                         Eigen::MatrixXd::Ones(3, 3),
                                         Eigen::MatrixXd::Ones(3, 3)};
    const MatrixSeries g1 = MatrixSeries::masked(ones, {1, 1, 1}, {1, 1, 1}, chain);
    const MatrixSeries g3 = multiply(g1, g1);
    CHECK(g3.coeff(1)(0, 2) == 0.0);
    CHECK(g3.coeff(2)(0, 2) != 0.0);
}

TEST_CASE("feedback_inverse satisfies G = H2 + G H1 and matches the Neumann sum") {
    Rng rng(77);
    const AdjacencyMatrix chain = chain_graph(3);
    const std::vector<int> dims = {2, 1, 1};
    const MatrixSeries h1 = random_masked_series(rng, dims, dims, chain, 6, true);
    const MatrixSeries h2 = random_masked_series(rng, {1, 2, 1}, dims, chain, 6);
    const MatrixSeries g = feedback_inverse(h2, h1);
    REQUIRE(g.horizon() == 6);

    // Defining recursion.
    for (int t = 0; t <= 6; ++t) {
        Eigen::MatrixXd want = h2.coeff(t);
        for (int s = 1; s <= t; ++s) want += g.coeff(t - s) * h1.coeff(s);
        CHECK(max_abs(g.coeff(t) - want) < 1e-12);
    }

    // Neumann evaluation H2 (I + H1 + H1^2 + ...).
    MatrixSeries acc = h2;
    MatrixSeries term = h2;
    for (int k = 0; k < 6; ++k) {
        term = multiply(term, h1);
        std::vector<Eigen::MatrixXd> sum;
        for (int t = 0; t <= 6; ++t) sum.push_back(acc.coeff(t) + term.coeff(t));
        acc = MatrixSeries::masked(sum, acc.row_dims(), acc.col_dims(), chain);
    }
    for (int t = 0; t <= 6; ++t) CHECK(max_abs(g.coeff(t) - acc.coeff(t)) < 1e-10);

    CHECK(membership(g, chain, 0.0));
}

TEST_CASE("feedback_inverse of law-respecting input has exact structural zeros") {
    Rng rng(400);
    for (int trial = 0; trial < 25; ++trial) {
        const int N = 2 + static_cast<int>(rng.next_u64() % 4);
        AdjacencyMatrix a = AdjacencyMatrix::Identity(N, N);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                if (i != j && rng.next_unit() < 0.4) a(i, j) = 1;
        const int T = 1 + static_cast<int>(rng.next_u64() % 10);
        std::vector<int> dims(static_cast<std::size_t>(N), 1);
        const MatrixSeries h1 = random_masked_series(rng, dims, dims, a, T, true);
        const MatrixSeries h2 = random_masked_series(rng, dims, dims, a, T);
        const MatrixSeries raw = feedback_inverse(lawless(h2), lawless(h1));
        CHECK(membership(raw, a, 0.0));
    }
}

TEST_CASE("feedback_inverse rejects a biproper loop") {
    Rng rng(14);
    const AdjacencyMatrix a = identity_graph(2);
    const MatrixSeries h1 = random_masked_series(rng, {1, 1}, {1, 1}, a, 3);  // h1(0) != 0
    const MatrixSeries h2 = random_masked_series(rng, {1, 1}, {1, 1}, a, 3);
    CHECK_THROWS_AS(feedback_inverse(h2, h1), std::invalid_argument);
}

TEST_CASE("transpose flips coefficients, partitions, and the law") {
    Rng rng(15);
    const AdjacencyMatrix chain = chain_graph(3);
    const MatrixSeries g = random_masked_series(rng, {2, 1, 1}, {1, 2, 1}, chain, 4);
    const MatrixSeries t = transpose(g);
    CHECK(t.rows() == g.cols());
    CHECK(t.cols() == g.rows());
    CHECK(t.row_dims() == g.col_dims());
    CHECK(t.col_dims() == g.row_dims());
    for (int s = 0; s <= 4; ++s)
        CHECK(max_abs(t.coeff(s) - g.coeff(s).transpose()) == 0.0);
    REQUIRE(t.law().has_value());
    CHECK((*t.law() == transpose_graph(chain)));
    CHECK(membership(t, transpose_graph(chain), 0.0));
}

TEST_CASE("membership flags a planted violation") {
    const AdjacencyMatrix chain = chain_graph(3);
    std::vector<Eigen::MatrixXd> coeffs = {Eigen::MatrixXd::Zero(3, 3),
                                           Eigen::MatrixXd::Zero(3, 3)};
    coeffs[1](2, 0) = 1.0;
    const MatrixSeries g(coeffs, {1, 1, 1}, {1, 1, 1});
    CHECK_FALSE(membership(g, chain, 0.0));
    CHECK_FALSE(membership(g, chain, 0.5));
    CHECK(membership(g, chain, 1.0));
}

TEST_CASE("norm is the root of the summed squared Frobenius norms") {
    std::vector<Eigen::MatrixXd> coeffs = {Eigen::MatrixXd::Zero(2, 2),
                                           Eigen::MatrixXd::Zero(2, 2)};
    coeffs[0](0, 0) = 3.0;
    coeffs[1](1, 1) = 4.0;
    const MatrixSeries g(coeffs, {2}, {2});
    CHECK(norm(g) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(norm(MatrixSeries::zero(3, {2}, {2})) == 0.0);
}

}  // TEST_SUITE

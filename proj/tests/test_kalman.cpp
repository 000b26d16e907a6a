#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "graphlq/kalman.hpp"
#include "graphlq/lifting.hpp"
#include "graphlq/linalg.hpp"
#include "graphlq/simkit.hpp"
#include "graphlq/sysmodel.hpp"
#include "testutil.hpp"

using namespace graphlq;

namespace {

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

// Stationary solution of the scalar predictor Riccati equation
//   p = a^2 p + q - (a p c)^2 / (c^2 p + r)
// for a = 0.5, c = q = r = 1 reduces to p^2 - 0.25 p - 1 = 0.
constexpr double kScalarP = 1.1327822185373185;
constexpr double kScalarK = 0.26556443707463705;

}  // namespace

TEST_SUITE("kalman") {

TEST_CASE("riccati_iterate: scalar fixed point matches the quadratic root") {
    auto r = riccati_iterate(scalar(0.5), scalar(1.0), scalar(1.0), scalar(1.0),
                             scalar(0.0));
    REQUIRE(r.converged);
    CHECK(std::abs(r.P(0, 0) - kScalarP) <= 1e-10);
    CHECK(std::abs(r.gain(0, 0) - kScalarK) <= 1e-10);
}

TEST_CASE("riccati_iterate: memoryless plant keeps P = q and zero gain") {
    auto r = riccati_iterate(scalar(0.0), scalar(1.0), scalar(2.5), scalar(1.0),
                             scalar(0.0));
    REQUIRE(r.converged);
    CHECK(std::abs(r.P(0, 0) - 2.5) <= 1e-12);
    CHECK(std::abs(r.gain(0, 0)) <= 1e-12);
}

TEST_CASE("riccati_iterate: no measurement gives the geometric Lyapunov sum") {
    const double a = 0.5, q = 1.0;
    auto r = riccati_iterate(scalar(a), scalar(0.0), scalar(q), scalar(1.0),
                             scalar(0.0));
    REQUIRE(r.converged);
    CHECK(std::abs(r.P(0, 0) - q / (1.0 - a * a)) <= 1e-10);
    CHECK(std::abs(r.gain(0, 0)) <= 1e-15);
}

TEST_CASE("riccati_iterate: symmetric PSD iterate on a lifted chain instance") {
    auto sys = testutil::random_instance(testutil::chain_graph(3), 11);
    auto L = lift(sys);
    for (int i = 0; i < 3; ++i) {
        auto r = riccati_iterate(L.Ae, L.E[static_cast<std::size_t>(i)],
                                 L.Be * L.Be.transpose(),
                                 L.Dei[static_cast<std::size_t>(i)] *
                                     L.Dei[static_cast<std::size_t>(i)].transpose(),
                                 L.Be * L.Dei[static_cast<std::size_t>(i)].transpose());
        REQUIRE(r.converged);
        CHECK((r.P - r.P.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.P);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        CHECK(std::isfinite(r.residual));
    }
}

TEST_CASE("riccati_iterate: divergence to infinity throws") {
    CHECK_THROWS_AS(riccati_iterate(scalar(2.0), scalar(0.0), scalar(1.0),
                                    scalar(1.0), scalar(0.0)),
                    std::runtime_error);
}

TEST_CASE("riccati_iterate: marginally unstable plant reports non-convergence") {
    RiccatiOptions opts;
    opts.max_iter = 200;
    auto r = riccati_iterate(scalar(1.0), scalar(0.0), scalar(1.0), scalar(1.0),
                             scalar(0.0), opts);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 200);
}

TEST_CASE("synthesize_node_filter: stable filters with consistent covariances") {
    for (int variant = 0; variant < 2; ++variant) {
        auto graph = variant == 0 ? testutil::chain_graph(3) : testutil::cycle_graph(3);
        auto sys = testutil::random_instance(graph, 21 + variant);
        auto L = lift(sys);
        for (int i = 0; i < 3; ++i) {
            auto f = synthesize_node_filter(L, i);
            REQUIRE(f.riccati.converged);
            CHECK(f.node == i);
            CHECK(f.spectral_radius < 1.0);
            auto rep = filter_error_covariance(f, L, i);
            REQUIRE(rep.stable);
            // The stationary filter error covariance is the Riccati fixed point.
            CHECK(testutil::max_abs(rep.sigma - f.riccati.P) <= 1e-7);
            double predicted = (L.selector(i) * f.riccati.P *
                                L.selector(i).transpose()).trace();
            CHECK(testutil::rel_err(rep.cost, predicted) <= 1e-7);
        }
    }
}

TEST_CASE("synthesize_node_filter: node order does not change any gain") {
    auto sys = testutil::random_instance(testutil::cycle_graph(3), 33);
    auto L = lift(sys);
    std::vector<FilterRealization> forward, shuffled(3);
    for (int i = 0; i < 3; ++i) forward.push_back(synthesize_node_filter(L, i));
    for (int i : {2, 0, 1}) shuffled[static_cast<std::size_t>(i)] = synthesize_node_filter(L, i);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK((forward[i].G_in.array() == shuffled[i].G_in.array()).all());
        CHECK((forward[i].F.array() == shuffled[i].F.array()).all());
    }
}

TEST_CASE("synthesize_node_filter: decoupled nodes recover the standalone filter") {
    // Block-diagonal plant with block-diagonal D: each node is its own system.
    testutil::Rng rng(77);
    BlockSystem sys;
    sys.N = 2;
    sys.n_i = {2, 2};
    sys.m_i = {2, 2};
    sys.p_i = {1, 1};
    sys.A = Eigen::MatrixXd::Zero(4, 4);
    sys.D = Eigen::MatrixXd::Zero(2, 4);
    for (int i = 0; i < 2; ++i) {
        Eigen::MatrixXd Aii = testutil::uniform_matrix(rng, 2, 2, 1.0);
        Aii *= 0.6 / std::max(1e-9, spectral_radius(Aii));
        sys.A.block(2 * i, 2 * i, 2, 2) = Aii;
        sys.B_blocks.push_back(Eigen::MatrixXd::Identity(2, 2) +
                               0.4 * testutil::uniform_matrix(rng, 2, 2, 1.0));
        Eigen::MatrixXd Ci(1, 2);
        Ci << testutil::signed_u(rng, 0.5, 1.5), testutil::signed_u(rng, 0.5, 1.5);
        sys.C_blocks.push_back(Ci);
        sys.D.block(i, 2 * i, 1, 2) = testutil::uniform_matrix(rng, 1, 2, 0.8);
    }
    sys.noise_cov = Eigen::MatrixXd::Identity(4, 4);
    REQUIRE(validate(sys).empty());

    auto L = lift(sys);  // M = 2; node i reads only its own output
    const int T = 12;
    for (int i = 0; i < 2; ++i) {
        BlockSystem sub;
        sub.N = 1;
        sub.n_i = {2};
        sub.m_i = {2};
        sub.p_i = {1};
        sub.A = sys.A.block(2 * i, 2 * i, 2, 2);
        sub.B_blocks = {sys.B_blocks[static_cast<std::size_t>(i)]};
        sub.C_blocks = {sys.C_blocks[static_cast<std::size_t>(i)]};
        sub.D = sys.D.block(i, 2 * i, 1, 2);
        sub.noise_cov = Eigen::MatrixXd::Identity(2, 2);
        REQUIRE(validate(sub).empty());
        auto Ls = lift(sub);

        auto f_full = synthesize_node_filter(L, i);
        auto f_sub = synthesize_node_filter(Ls, 0);
        auto rep_full = filter_error_covariance(f_full, L, i);
        auto rep_sub = filter_error_covariance(f_sub, Ls, 0);
        REQUIRE(rep_full.stable);
        REQUIRE(rep_sub.stable);
        CHECK(testutil::rel_err(rep_full.cost, rep_sub.cost) <= 1e-8);

        auto l_full = assemble_estimator({synthesize_node_filter(L, 0),
                                          synthesize_node_filter(L, 1)},
                                         L, T);
        auto l_sub = assemble_estimator({f_sub}, Ls, T);
        for (int s = 0; s < T; ++s) {
            CHECK(testutil::max_abs(l_full.block(s, i, i) - l_sub.coeff(s)) <= 1e-8);
            // Cross blocks of a decoupled plant are structural zeros.
            CHECK(testutil::max_abs(l_full.block(s, i, 1 - i)) == 0.0);
        }
    }
}

TEST_CASE("assemble_estimator: chain information structure shows in the series") {
    auto sys = testutil::random_instance(testutil::chain_graph(3), 5);
    auto L = lift(sys);
    std::vector<FilterRealization> filters;
    for (int i = 0; i < 3; ++i) filters.push_back(synthesize_node_filter(L, i));
    const int T = 10;
    auto l = assemble_estimator(filters, L, T);
    REQUIRE(l.horizon() == T);
    CHECK(membership(l, adjacency_of(sys), 1e-10));
    CHECK(membership(l, adjacency_of(sys), 0.0));  // masked, not just small
    for (int s = 0; s < T; ++s) {
        // Downstream nodes never see upstream outputs: block (2, 1) is zero for
        // every lag, and node 3 uses only its own measurements.
        CHECK(testutil::max_abs(l.block(s, 1, 0)) == 0.0);
        CHECK(testutil::max_abs(l.block(s, 2, 0)) == 0.0);
        CHECK(testutil::max_abs(l.block(s, 2, 1)) == 0.0);
    }
    // Two-hop data arrives two lags late.
    CHECK(testutil::max_abs(l.block(0, 0, 2)) == 0.0);
    CHECK(testutil::max_abs(l.block(1, 0, 2)) == 0.0);
    CHECK(testutil::max_abs(l.coeff(2)) > 0.0);
}

TEST_CASE("assemble_estimator: single node reduces to Gamma F^s K") {
    auto sys = testutil::random_instance(testutil::identity_graph(1), 9, 3, 2, 2);
    auto L = lift(sys, 1);
    auto f = synthesize_node_filter(L, 0);
    const int T = 8;
    auto l = assemble_estimator({f}, L, T);
    Eigen::MatrixXd cur = f.G_in;
    for (int s = 0; s < T; ++s) {
        CHECK(testutil::max_abs(l.coeff(s) - f.H * cur) <= 1e-12);
        cur = f.F * cur;
    }
}

TEST_CASE("assemble_estimator: rejects a negative horizon") {
    auto sys = testutil::random_instance(testutil::identity_graph(1), 9);
    auto L = lift(sys);
    auto f = synthesize_node_filter(L, 0);
    CHECK_THROWS_AS(assemble_estimator({f}, L, -1), std::invalid_argument);
}

TEST_CASE("scalar chain: filter cost is the structured optimum") {
    auto sys = testutil::scalar_chain_system(3);
    auto a = adjacency_of(sys);
    auto L = lift(sys);
    std::vector<FilterRealization> filters;
    std::vector<double> node_cost;
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        filters.push_back(synthesize_node_filter(L, i));
        auto rep = filter_error_covariance(filters.back(), L, i);
        REQUIRE(rep.stable);
        node_cost.push_back(rep.cost);
        total += rep.cost;
    }

    const int T = 40;
    auto oracle = structured_ls_oracle(sys, a, {}, T);
    REQUIRE(oracle.residual <= 1e-8);
    REQUIRE(oracle.node_costs.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(testutil::rel_err(node_cost[static_cast<std::size_t>(i)],
                                oracle.node_costs[static_cast<std::size_t>(i)]) <= 1e-6);
    }
    CHECK(testutil::rel_err(total, oracle.cost) <= 1e-6);

    // No admissible linear filter of the same structure does better.
    testutil::Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        auto cand = testutil::random_masked_series(rng, sys.n_i, sys.p_i, a, T - 1);
        CHECK(fir_estimation_cost(sys, cand, T) >= oracle.cost - 1e-9);
    }
}

TEST_CASE("filter_error_covariance: self-only node pays at least the centralized cost") {
    auto sys = testutil::random_instance(testutil::chain_graph(3), 41);
    auto L = lift(sys);
    auto f = synthesize_node_filter(L, 2);
    auto rep = filter_error_covariance(f, L, 2);
    REQUIRE(rep.stable);
    Eigen::MatrixXd Pc = testutil::centralized_predictor_cov(sys);
    double central =
        Pc.block(sys.n_off(2), sys.n_off(2), sys.n_i[2], sys.n_i[2]).trace();
    CHECK(rep.cost >= central - 1e-9);
}

TEST_CASE("filter_error_covariance: noise-free plant with full state output costs zero") {
    // B = 0 removes process noise; y = x is exact. The innovation covariance is
    // identically zero and the pseudo-inverse keeps the gain finite (here zero).
    BlockSystem sys;
    sys.N = 1;
    sys.n_i = {2};
    sys.m_i = {1};
    sys.p_i = {2};
    sys.A = (Eigen::MatrixXd(2, 2) << 0.5, 0.2, 0.0, 0.4).finished();
    sys.B_blocks = {Eigen::MatrixXd::Zero(2, 1)};
    sys.C_blocks = {Eigen::MatrixXd::Identity(2, 2)};
    sys.D = Eigen::MatrixXd::Zero(2, 1);
    sys.noise_cov = Eigen::MatrixXd::Identity(1, 1);
    auto L = lift(sys);
    auto f = synthesize_node_filter(L, 0);
    CHECK(f.spectral_radius < 1.0);
    auto rep = filter_error_covariance(f, L, 0);
    REQUIRE(rep.stable);
    CHECK(std::abs(rep.cost) <= 1e-12);
    CHECK(testutil::max_abs(f.riccati.P) <= 1e-12);
}

TEST_CASE("filter_error_covariance: exact full-state measurement leaves only fresh noise") {
    BlockSystem sys;
    sys.N = 1;
    sys.n_i = {2};
    sys.m_i = {2};
    sys.p_i = {2};
    sys.A = (Eigen::MatrixXd(2, 2) << 0.3, 0.5, -0.2, 0.1).finished();
    sys.B_blocks = {(Eigen::MatrixXd(2, 2) << 1.0, 0.2, 0.0, 0.8).finished()};
    sys.C_blocks = {Eigen::MatrixXd::Identity(2, 2)};
    sys.D = Eigen::MatrixXd::Zero(2, 2);
    sys.noise_cov = Eigen::MatrixXd::Identity(2, 2);
    REQUIRE(validate(sys).empty());
    auto L = lift(sys);
    auto f = synthesize_node_filter(L, 0);
    auto rep = filter_error_covariance(f, L, 0);
    REQUIRE(rep.stable);
    const Eigen::MatrixXd& B = sys.B_blocks[0];
    CHECK(std::abs(rep.cost - (B * B.transpose()).trace()) <= 1e-8);
}

TEST_CASE("synthesize_node_filter: singular-innovation gains are completed to stability") {
    // Dualized instances routinely leave the minimum-norm gain unstable on the
    // zero-variance innovation directions; the synthesized gain must differ from
    // riccati.gain only in ways invisible to the optimality condition.
    int triggered = 0;
    for (int seed = 1; seed <= 40 && triggered < 3; ++seed) {
        for (int variant = 0; variant < 2; ++variant) {
            auto graph =
                variant == 0 ? testutil::chain_graph(3) : testutil::cycle_graph(3);
            auto sys = testutil::random_instance(graph, 1000 + seed);
            auto L = lift(dualize(sys));
            for (int i = 0; i < 3; ++i) {
                auto f = synthesize_node_filter(L, i);
                REQUIRE(f.spectral_radius < 1.0);
                const Eigen::MatrixXd& Ei = L.E[static_cast<std::size_t>(i)];
                const Eigen::MatrixXd& Di = L.Dei[static_cast<std::size_t>(i)];
                Eigen::MatrixXd Syy =
                    Ei * f.riccati.P * Ei.transpose() + Di * Di.transpose();
                Eigen::MatrixXd Sxy =
                    L.Ae * f.riccati.P * Ei.transpose() + L.Be * Di.transpose();
                double scale = std::max(1.0, testutil::max_abs(Sxy));
                CHECK(testutil::max_abs(f.G_in * Syy - Sxy) <= 1e-9 * scale);
                if (testutil::max_abs(f.G_in - f.riccati.gain) > 1e-9) {
                    ++triggered;
                    auto rep = filter_error_covariance(f, L, i);
                    REQUIRE(rep.stable);
                    CHECK(testutil::max_abs(rep.sigma - f.riccati.P) <= 1e-6);
                }
            }
        }
    }
    // The completion path must actually be exercised by this sweep.
    CHECK(triggered >= 1);
}

TEST_CASE("filter_error_covariance: non-contractive realization is rejected") {
    auto sys = testutil::random_instance(testutil::identity_graph(1), 3);
    auto L = lift(sys);
    auto f = synthesize_node_filter(L, 0);
    f.F = 1.25 * Eigen::MatrixXd::Identity(L.ne, L.ne);
    f.spectral_radius = 1.25;
    auto rep = filter_error_covariance(f, L, 0);
    CHECK_FALSE(rep.stable);
    CHECK(std::isnan(rep.cost));
    CHECK(rep.spectral_radius >= 1.0);
}

}  // TEST_SUITE

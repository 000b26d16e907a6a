#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "graphlq/duality.hpp"
#include "graphlq/kalman.hpp"
#include "graphlq/lifting.hpp"
#include "graphlq/series.hpp"
#include "graphlq/simkit.hpp"
#include "graphlq/sysmodel.hpp"
#include "testutil.hpp"

using namespace graphlq;

namespace {

MatrixSeries static_feedback(double k, int horizon) {
    std::vector<Eigen::MatrixXd> coeffs(static_cast<std::size_t>(horizon) + 1,
                                        Eigen::MatrixXd::Zero(1, 1));
    coeffs[0](0, 0) = k;
    return MatrixSeries(std::move(coeffs), {1}, {1}, testutil::identity_graph(1));
}

}  // namespace

TEST_SUITE("duality") {

TEST_CASE("feedback_to_feedforward: scalar static gain gives a geometric response") {
    const double a = 0.4, k = -0.3;
    const int T = 10;
    Eigen::MatrixXd A = Eigen::MatrixXd::Constant(1, 1, a);
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(1, 1);
    auto G = feedback_to_feedforward(static_feedback(k, T), A, B);
    REQUIRE(G.horizon() == T);
    for (int s = 0; s <= T; ++s) {
        CHECK(std::abs(G.coeff(s)(0, 0) - (-k * std::pow(a + k, s))) <= 1e-12);
    }
    auto K2 = feedforward_to_feedback(G, A, B);
    CHECK(std::abs(K2.coeff(0)(0, 0) - k) <= 1e-12);
    for (int s = 1; s < T; ++s) CHECK(std::abs(K2.coeff(s)(0, 0)) <= 1e-12);
}

TEST_CASE("feedback_to_feedforward: zero gain maps to zero response") {
    auto sys = testutil::random_instance(testutil::chain_graph(3), 4);
    auto K = MatrixSeries::zero(6, sys.m_i, sys.n_i, adjacency_of(sys));
    auto G = feedback_to_feedforward(K, sys.A, sys.B());
    CHECK(norm(G) == 0.0);
}

TEST_CASE("round trip: feedback -> feedforward -> feedback is the identity") {
    const int T = 8;
    for (int variant = 0; variant < 2; ++variant) {
        auto graph = variant == 0 ? testutil::chain_graph(3) : testutil::cycle_graph(3);
        auto sys = testutil::random_instance(graph, 50 + variant);
        testutil::Rng rng(60 + static_cast<std::uint64_t>(variant));
        for (int trial = 0; trial < 5; ++trial) {
            auto K = testutil::random_masked_series(rng, sys.m_i, sys.n_i, graph, T);
            auto G = feedback_to_feedforward(K, sys.A, sys.B());
            CHECK(membership(G, graph, 0.0));
            auto K2 = feedforward_to_feedback(G, sys.A, sys.B());
            REQUIRE(K2.horizon() == T);
            for (int s = 0; s < T; ++s) {
                CHECK(testutil::max_abs(K.coeff(s) - K2.coeff(s)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("transform preconditions are enforced") {
    auto sys = testutil::random_instance(testutil::chain_graph(3), 8);
    auto graph = adjacency_of(sys);
    testutil::Rng rng(9);
    auto K = testutil::random_masked_series(rng, sys.m_i, sys.n_i, graph, 4);

    SUBCASE("coupled B is rejected") {
        Eigen::MatrixXd B = sys.B();
        B(0, B.cols() - 1) = 0.1;
        CHECK_THROWS_AS(feedback_to_feedforward(K, sys.A, B), std::invalid_argument);
    }
    SUBCASE("A outside the law is rejected") {
        Eigen::MatrixXd A = sys.A;
        A(sys.n_off(2), 0) = 0.1;  // block (3, 1) is not an edge of the chain
        CHECK_THROWS_AS(feedback_to_feedforward(K, A, sys.B()), std::invalid_argument);
    }
    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS_AS(feedback_to_feedforward(K, sys.A.topLeftCorner(4, 4), sys.B()),
                        std::invalid_argument);
    }
    SUBCASE("a series without a law is rejected") {
        std::vector<Eigen::MatrixXd> coeffs(5, Eigen::MatrixXd::Zero(sys.m(), sys.n()));
        MatrixSeries lawless(std::move(coeffs), sys.m_i, sys.n_i);
        CHECK_THROWS_AS(feedback_to_feedforward(lawless, sys.A, sys.B()),
                        std::invalid_argument);
    }
}

TEST_CASE("dual_estimator_to_controller: fields transpose the node filters") {
    auto sys = testutil::random_instance(testutil::cycle_graph(3), 14);
    auto dual = dualize(sys);
    auto L = lift(dual);
    std::vector<FilterRealization> filters;
    for (int i = 0; i < 3; ++i) filters.push_back(synthesize_node_filter(L, i));
    auto ctrl = dual_estimator_to_controller(filters, L);

    REQUIRE(ctrl.nodes.size() == 3);
    CHECK(ctrl.u_dims == dual.p_i);
    CHECK(ctrl.w_dims == dual.n_i);
    int expect_memory = 0;
    for (int i = 0; i < 3; ++i) {
        const auto& c = ctrl.nodes[static_cast<std::size_t>(i)];
        const auto& f = filters[static_cast<std::size_t>(i)];
        CHECK(c.node == i);
        CHECK((c.Ad.array() == f.F.transpose().array()).all());
        CHECK((c.In.array() == f.H.transpose().array()).all());
        CHECK((c.Out.array() == (-f.G_in.transpose()).array()).all());
        CHECK(c.pairs == L.pairs[static_cast<std::size_t>(i)]);
        for (auto [j, k] : c.pairs) expect_memory = std::max(expect_memory, k);
    }
    CHECK(ctrl.memory == expect_memory);

    SUBCASE("wrong filter count is rejected") {
        std::vector<FilterRealization> two(filters.begin(), filters.begin() + 2);
        CHECK_THROWS_AS(dual_estimator_to_controller(two, L), std::invalid_argument);
    }
    SUBCASE("out-of-order filters are rejected") {
        std::swap(filters[0], filters[1]);
        CHECK_THROWS_AS(dual_estimator_to_controller(filters, L), std::invalid_argument);
    }
}

TEST_CASE("controller response equals the transposed dual estimator series") {
    const int T = 15;
    for (int variant = 0; variant < 2; ++variant) {
        auto graph = variant == 0 ? testutil::chain_graph(3) : testutil::cycle_graph(3);
        auto sys = testutil::random_instance(graph, 70 + variant);
        auto dual = dualize(sys);
        auto L = lift(dual);
        std::vector<FilterRealization> filters;
        for (int i = 0; i < 3; ++i) filters.push_back(synthesize_node_filter(L, i));
        auto ctrl = dual_estimator_to_controller(filters, L);

        auto g = ctrl.feedforward_series(T - 1);
        auto lt = transpose(assemble_estimator(filters, L, T));
        REQUIRE(g.horizon() == T - 1);
        REQUIRE(g.rows() == lt.rows());
        REQUIRE(g.cols() == lt.cols());
        for (int s = 0; s < T; ++s) {
            CHECK(testutil::max_abs(g.coeff(s) - lt.coeff(s)) <= 1e-12);
        }
        // The controller's response lives on the plant graph.
        CHECK(membership(g, graph, 0.0));
    }
}

TEST_CASE("synthesized controller attains the feedforward optimum") {
    // Scalar pairs routinely produce singular innovation covariances, which
    // leave the stationary synthesis without a stable realization and the
    // least-squares normal matrix without a usable eigenvalue gap. Only
    // instances where both routes are trustworthy make a meaningful
    // comparison, so candidates are screened the same way a user of the
    // library would have to.
    const int T = 40;
    int tested = 0;
    for (int seed = 0; seed < 200 && tested < 3; ++seed) {
        auto sys = testutil::random_scalar_pair(seed);
        auto graph = adjacency_of(sys);
        auto dual = dualize(sys);
        auto L = lift(dual);
        std::vector<FilterRealization> filters;
        bool usable = true;
        for (int i = 0; i < sys.N; ++i) {
            filters.push_back(synthesize_node_filter(L, i));
            const auto& f = filters.back();
            if (!f.riccati.converged || f.spectral_radius >= 1.0) usable = false;
        }
        if (!usable) continue;
        auto oracle = feedforward_ls_oracle(sys, graph, {}, T);
        if (oracle.ill_conditioned || oracle.condition_gap <= 1e-6 ||
            oracle.residual > 1e-7) {
            continue;
        }

        auto ctrl = dual_estimator_to_controller(filters, L);
        auto g = ctrl.feedforward_series(T - 1);
        double ctrl_cost = fir_feedforward_cost(sys, g, T);
        CHECK(testutil::rel_err(ctrl_cost, oracle.cost) <= 1e-6);
        CHECK(ctrl_cost >= oracle.cost - 1e-9);

        // The same instance seen from the estimation side lands on the same
        // optimum.
        auto l = assemble_estimator(filters, L, T - 1);
        CHECK(testutil::rel_err(fir_estimation_cost(dual, l, T), oracle.cost) <= 1e-6);
        ++tested;
    }
    REQUIRE(tested == 3);
}

TEST_CASE("stationary synthesis reports instability instead of faking it") {
    // This instance has a singular innovation direction through which the
    // unstable error mode cannot be stabilized: any completion of the gain
    // needs entries around 1e14, so no usable stationary realization exists.
    auto sys = testutil::random_scalar_pair(31);
    auto L = lift(dualize(sys));
    auto f = synthesize_node_filter(L, 1);
    CHECK(f.spectral_radius >= 1.0);
    CHECK(testutil::max_abs(f.G_in - f.riccati.gain) == 0.0);
    CHECK(testutil::max_abs(f.G_in) < 1e3);
    auto rep = filter_error_covariance(f, L, 1);
    CHECK(!rep.stable);
    CHECK(std::isnan(rep.cost));
}

TEST_CASE("dual_problem: swaps estimation and feedforward and is an involution") {
    auto sys = testutil::random_instance(testutil::chain_graph(3), 90);
    ProblemSpec p{ProblemKind::estimation, sys, std::nullopt};
    auto d = dual_problem(p);
    CHECK(d.kind == ProblemKind::feedforward);
    CHECK((d.system.A.array() == sys.A.transpose().array()).all());
    CHECK(d.system.p_i == sys.m_i);
    CHECK(d.system.n_i == sys.n_i);

    auto dd = dual_problem(d);
    CHECK(dd.kind == ProblemKind::estimation);
    CHECK((dd.system.A.array() == sys.A.array()).all());
    CHECK((dd.system.D.array() == sys.D.array()).all());

    ProblemSpec bad{ProblemKind::weighted_estimation, sys,
                    Eigen::MatrixXd::Identity(sys.n(), sys.n())};
    CHECK_THROWS_AS(dual_problem(bad), std::invalid_argument);
    ProblemSpec bad2{ProblemKind::state_feedback, sys, std::nullopt};
    CHECK_THROWS_AS(dual_problem(bad2), std::invalid_argument);
}

}  // TEST_SUITE

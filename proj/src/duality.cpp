#include "graphlq/duality.hpp"

#include <numeric>
#include <stdexcept>

namespace graphlq {

namespace {

std::vector<int> offsets_of(const std::vector<int>& dims) {
    std::vector<int> off(dims.size() + 1, 0);
    std::partial_sum(dims.begin(), dims.end(), off.begin() + 1);
    return off;
}

void check_state_matrices(const MatrixSeries& gains,
                          const Eigen::MatrixXd& A,
                          const Eigen::MatrixXd& B,
                          const char* who) {
    const std::vector<int>& n_i = gains.col_dims();
    const std::vector<int>& m_i = gains.row_dims();
    const std::vector<int> n_off = offsets_of(n_i);
    const std::vector<int> m_off = offsets_of(m_i);
    const int n = n_off.back();
    const int m = m_off.back();
    if (A.rows() != n || A.cols() != n || B.rows() != n || B.cols() != m)
        throw std::invalid_argument(std::string(who) + ": A/B dims do not match the series");
    if (!gains.law()) throw std::invalid_argument(std::string(who) + ": series needs a sparsity law");
    const AdjacencyMatrix& law = *gains.law();
    const int N = static_cast<int>(n_i.size());
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            if (i != j &&
                B.block(n_off[static_cast<std::size_t>(i)], m_off[static_cast<std::size_t>(j)],
                        n_i[static_cast<std::size_t>(i)], m_i[static_cast<std::size_t>(j)])
                        .cwiseAbs()
                        .maxCoeff() != 0.0)
                throw std::invalid_argument(std::string(who) + ": B must be block diagonal");
            if (law(i, j) == 0 &&
                A.block(n_off[static_cast<std::size_t>(i)], n_off[static_cast<std::size_t>(j)],
                        n_i[static_cast<std::size_t>(i)], n_i[static_cast<std::size_t>(j)])
                        .cwiseAbs()
                        .maxCoeff() != 0.0)
                throw std::invalid_argument(std::string(who) + ": A does not respect the sparsity law");
        }
}

MatrixSeries negated(const MatrixSeries& g) {
    std::vector<Eigen::MatrixXd> coeffs;
    coeffs.reserve(static_cast<std::size_t>(g.horizon()) + 1);
    for (int t = 0; t <= g.horizon(); ++t) coeffs.push_back(-g.coeff(t));
    return MatrixSeries(std::move(coeffs), g.row_dims(), g.col_dims(), g.law());
}

// I - A lambda, padded with zeros to the requested horizon.
MatrixSeries identity_minus_shift(const Eigen::MatrixXd& A,
                                  const std::vector<int>& dims,
                                  const std::optional<AdjacencyMatrix>& law,
                                  int horizon) {
    std::vector<Eigen::MatrixXd> coeffs(static_cast<std::size_t>(horizon) + 1,
                                        Eigen::MatrixXd::Zero(A.rows(), A.cols()));
    coeffs[0] = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    if (horizon >= 1) coeffs[1] = -A;
    return MatrixSeries(std::move(coeffs), dims, dims, law);
}

}  // namespace

MatrixSeries feedback_to_feedforward(const MatrixSeries& K,
                                     const Eigen::MatrixXd& A,
                                     const Eigen::MatrixXd& B) {
    check_state_matrices(K, A, B, "feedback_to_feedforward");
    const int T = K.horizon();
    // H1(t) = A [t == 1] + B k(t-1): the strictly causal loop A lambda + B K lambda.
    std::vector<Eigen::MatrixXd> h1(static_cast<std::size_t>(T) + 1,
                                    Eigen::MatrixXd::Zero(A.rows(), A.cols()));
    for (int t = 1; t <= T; ++t) {
        h1[static_cast<std::size_t>(t)] = B * K.coeff(t - 1);
        if (t == 1) h1[1] += A;
    }
    MatrixSeries loop(std::move(h1), K.col_dims(), K.col_dims(), K.law());
    return feedback_inverse(negated(K), loop);
}

MatrixSeries feedforward_to_feedback(const MatrixSeries& G,
                                     const Eigen::MatrixXd& A,
                                     const Eigen::MatrixXd& B) {
    check_state_matrices(G, A, B, "feedforward_to_feedback");
    const int T = G.horizon();
    std::vector<Eigen::MatrixXd> h1(static_cast<std::size_t>(T) + 1,
                                    Eigen::MatrixXd::Zero(A.rows(), A.cols()));
    for (int t = 1; t <= T; ++t) h1[static_cast<std::size_t>(t)] = B * G.coeff(t - 1);
    MatrixSeries loop(std::move(h1), G.col_dims(), G.col_dims(), G.law());
    const MatrixSeries F = feedback_inverse(negated(G), loop);
    return multiply(F, identity_minus_shift(A, G.col_dims(), G.law(), T));
}

MatrixSeries ControllerRealization::feedforward_series(int horizon) const {
    if (horizon < 0) throw std::invalid_argument("feedforward_series: horizon must be >= 0");
    const std::vector<int> u_off = offsets_of(u_dims);
    const std::vector<int> w_off = offsets_of(w_dims);
    std::vector<Eigen::MatrixXd> coeffs(
        static_cast<std::size_t>(horizon) + 1,
        Eigen::MatrixXd::Zero(u_off.back(), w_off.back()));

    for (const ControllerNode& c : nodes) {
        // gch(s) = K^T (F^T)^s Gamma^T on the dual lift, i.e. -Out Ad^s In read
        // with the applied-control sign removed.
        std::vector<Eigen::MatrixXd> gch;
        gch.reserve(static_cast<std::size_t>(horizon) + 1);
        Eigen::MatrixXd cur = c.In;
        for (int s = 0; s <= horizon; ++s) {
            gch.push_back(-c.Out * cur);
            if (s < horizon) cur = c.Ad * cur;
        }
        const int i = c.node;
        std::vector<int> row_off(c.pairs.size() + 1, 0);
        std::partial_sum(c.pair_rows.begin(), c.pair_rows.end(), row_off.begin() + 1);
        for (int sigma = 0; sigma <= horizon; ++sigma) {
            Eigen::MatrixXd& out = coeffs[static_cast<std::size_t>(sigma)];
            for (std::size_t pr = 0; pr < c.pairs.size(); ++pr) {
                const int j = c.pairs[pr].first;
                const int k = c.pairs[pr].second;
                if (k > sigma + 1) continue;  // row block acts on u_j at k-1 extra lags
                out.block(u_off[static_cast<std::size_t>(j)], w_off[static_cast<std::size_t>(i)],
                          c.pair_rows[pr], w_dims[static_cast<std::size_t>(i)]) +=
                    gch[static_cast<std::size_t>(sigma + 1 - k)].middleRows(
                        row_off[pr], c.pair_rows[pr]);
            }
        }
    }
    return MatrixSeries(std::move(coeffs), u_dims, w_dims, law);
}

ControllerRealization dual_estimator_to_controller(
    const std::vector<FilterRealization>& filters, const LiftedSystem& dual_lift) {
    const BlockSystem& dual = dual_lift.base;
    if (static_cast<int>(filters.size()) != dual.N)
        throw std::invalid_argument("dual_estimator_to_controller: one filter per node required");

    ControllerRealization ctrl;
    ctrl.u_dims = dual.p_i;  // dual outputs are the plant inputs
    ctrl.w_dims = dual.n_i;
    ctrl.law = transpose_graph(dual_lift.graph);
    for (int i = 0; i < dual.N; ++i) {
        const FilterRealization& f = filters[static_cast<std::size_t>(i)];
        if (f.node != i)
            throw std::invalid_argument("dual_estimator_to_controller: filters out of node order");
        ControllerNode c;
        c.node = i;
        c.Ad = f.F.transpose();
        c.In = f.H.transpose();
        c.Out = -f.G_in.transpose();
        c.pairs = dual_lift.pairs[static_cast<std::size_t>(i)];
        const std::vector<int> off = dual_lift.pair_row_offsets(i);
        for (std::size_t pr = 0; pr < c.pairs.size(); ++pr) {
            c.pair_rows.push_back(off[pr + 1] - off[pr]);
            ctrl.memory = std::max(ctrl.memory, c.pairs[pr].second);
        }
        ctrl.nodes.push_back(std::move(c));
    }
    return ctrl;
}

ProblemSpec dual_problem(const ProblemSpec& p) {
    if (p.kind != ProblemKind::estimation && p.kind != ProblemKind::feedforward)
        throw std::invalid_argument("dual_problem: kind must be estimation or feedforward");
    ProblemSpec out;
    out.kind = p.kind == ProblemKind::estimation ? ProblemKind::feedforward
                                                 : ProblemKind::estimation;
    out.system = dualize(p.system);
    return out;
}

}  // namespace graphlq

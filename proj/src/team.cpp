#include "graphlq/team.hpp"

#include <algorithm>
#include <stdexcept>

#include "graphlq/linalg.hpp"

namespace graphlq {

Eigen::MatrixXd static_team_gain(const Eigen::MatrixXd& Sxy,
                                 const Eigen::MatrixXd& Syy,
                                 double rel_tol) {
    if (Syy.rows() != Syy.cols() || Sxy.cols() != Syy.rows())
        throw std::invalid_argument("static_team_gain: inconsistent dimensions");
    return Sxy * pinv_psd(Syy, rel_tol);
}

TeamLift build_team_lift(const LiftedSystem& lifted, const Eigen::MatrixXd& W) {
    const int N = lifted.base.N;
    if (W.rows() != N || W.cols() != N)
        throw std::invalid_argument("build_team_lift: weight must be N x N");
    if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + W.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("build_team_lift: weight must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(W));
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("build_team_lift: weight must be positive definite");

    TeamLift team;
    team.N = N;
    team.ne = lifted.ne;
    team.W = symmetrized(W);

    const int nw = lifted.base.n_w();
    team.Acal = Eigen::MatrixXd::Zero(N * lifted.ne, N * lifted.ne);
    team.Bcal = Eigen::MatrixXd::Zero(N * lifted.ne, N * nw);
    team.What = Eigen::MatrixXd::Zero(N * nw, N * nw);
    for (int i = 0; i < N; ++i) {
        team.Acal.block(i * lifted.ne, i * lifted.ne, lifted.ne, lifted.ne) = lifted.Ae;
        team.Bcal.block(i * lifted.ne, i * nw, lifted.ne, nw) = lifted.Be;
        for (int j = 0; j < N; ++j)
            team.What.block(i * nw, j * nw, nw, nw) = team.W(i, j) * lifted.base.noise_cov;
    }

    team.crow_off.assign(static_cast<std::size_t>(N) + 1, 0);
    for (int i = 0; i < N; ++i)
        team.crow_off[static_cast<std::size_t>(i) + 1] =
            team.crow_off[static_cast<std::size_t>(i)] +
            static_cast<int>(lifted.E[static_cast<std::size_t>(i)].rows());
    const int q = team.crow_off.back();
    team.Ccal = Eigen::MatrixXd::Zero(q, N * lifted.ne);
    team.Dcal = Eigen::MatrixXd::Zero(q, N * nw);
    for (int i = 0; i < N; ++i) {
        const auto& Ei = lifted.E[static_cast<std::size_t>(i)];
        const auto& Di = lifted.Dei[static_cast<std::size_t>(i)];
        team.Ccal.block(team.crow_off[static_cast<std::size_t>(i)], i * lifted.ne,
                        Ei.rows(), lifted.ne) = Ei;
        team.Dcal.block(team.crow_off[static_cast<std::size_t>(i)], i * nw, Di.rows(), nw) = Di;
    }
    return team;
}

TeamGainSchedule team_filter_iterate(const TeamLift& team, int T, double tol) {
    constexpr int step_cap = 5000;
    const int steps = std::min(T, step_cap);
    if (steps < 0) throw std::invalid_argument("team_filter_iterate: T must be >= 0");

    TeamGainSchedule sched;
    Eigen::MatrixXd sigma =
        Eigen::MatrixXd::Zero(team.Acal.rows(), team.Acal.rows());
    for (int t = 0; t < steps; ++t) {
        const Eigen::MatrixXd Syy =
            team.Ccal * sigma * team.Ccal.transpose() + team.Dcal * team.What * team.Dcal.transpose();
        const Eigen::MatrixXd Sxy =
            team.Acal * sigma * team.Ccal.transpose() + team.Bcal * team.What * team.Dcal.transpose();
        Eigen::MatrixXd K = static_team_gain(Sxy, symmetrized(Syy));
        const Eigen::MatrixXd Fcl = team.Acal - K * team.Ccal;
        const Eigen::MatrixXd Gcl = team.Bcal - K * team.Dcal;
        sigma = symmetrized(Fcl * sigma * Fcl.transpose() + Gcl * team.What * Gcl.transpose());

        double res = std::numeric_limits<double>::infinity();
        if (!sched.gains.empty()) res = (K - sched.gains.back()).cwiseAbs().maxCoeff();
        sched.gains.push_back(std::move(K));
        sched.residuals.push_back(res);
        sched.steps = t + 1;
        if (tol > 0.0 && res < tol) {
            sched.stationary = true;
            sched.stationary_at = t;
            break;
        }
    }
    sched.sigma_final = std::move(sigma);
    return sched;
}

double team_weighted_cost(const TeamLift& team, const LiftedSystem& lifted,
                          const Eigen::MatrixXd& sigma) {
    const int N = team.N;
    for (int i = 1; i < N; ++i)
        if (lifted.base.n_i[static_cast<std::size_t>(i)] != lifted.base.n_i[0])
            throw std::invalid_argument(
                "team_weighted_cost: per-node state dimensions must be homogeneous");
    const int nloc = lifted.base.n_i[0];
    Eigen::MatrixXd Gbar = Eigen::MatrixXd::Zero(nloc, N * team.ne);
    for (int j = 0; j < N; ++j)
        Gbar.block(0, j * team.ne, nloc, team.ne) = lifted.selector(j);
    return (Gbar * sigma * Gbar.transpose()).trace();
}

Eigen::MatrixXd combine_estimates(const Eigen::MatrixXd& Xhat, const LiftedSystem& lifted) {
    const int N = lifted.base.N;
    for (int i = 1; i < N; ++i)
        if (lifted.base.n_i[static_cast<std::size_t>(i)] != lifted.base.n_i[0])
            throw std::invalid_argument(
                "combine_estimates: per-node state dimensions must be homogeneous");
    if (Xhat.rows() != static_cast<Eigen::Index>(N) * lifted.ne || Xhat.cols() != N)
        throw std::invalid_argument("combine_estimates: estimate matrix has wrong shape");
    const int nloc = lifted.base.n_i[0];
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nloc, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            out.col(i) += lifted.selector(j) * Xhat.block(j * lifted.ne, i, lifted.ne, 1);
    return out;
}

ProblemSpec correlated_to_weighted(const ProblemSpec& p) {
    if (p.kind != ProblemKind::correlated_feedback)
        throw std::invalid_argument("correlated_to_weighted: kind must be correlated_feedback");
    if (!p.weight) throw std::invalid_argument("correlated_to_weighted: weight required");
    if (p.weight->rows() != p.system.n() || p.weight->cols() != p.system.n())
        throw std::invalid_argument(
            "correlated_to_weighted: weight must match the disturbance dimension");
    ProblemSpec out;
    out.kind = ProblemKind::weighted_estimation;
    out.system = dualize(p.system);
    out.weight = symmetrized(*p.weight);
    return out;
}

}  // namespace graphlq

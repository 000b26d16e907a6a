#pragma once

#include <vector>

#include <Eigen/Dense>

#include "graphlq/lifting.hpp"
#include "graphlq/sysmodel.hpp"

namespace graphlq {

// Minimum-norm solution K = Sxy Syy^+ of the static team optimality condition
// K Syy = Sxy for possibly singular Syy.
Eigen::MatrixXd static_team_gain(const Eigen::MatrixXd& Sxy,
                                 const Eigen::MatrixXd& Syy,
                                 double rel_tol = 1e-10);

// N parallel copies of the lifted plant, one per estimating node, driven by a
// common disturbance whose cross-copy second moment is the weight W:
//   Acal = I_N (x) A_e, Bcal = I_N (x) B_e, Ccal = blkdiag(E_i), Dcal = blkdiag(D_e_i),
//   What = W (x) V with V the per-copy disturbance covariance.
struct TeamLift {
    int N = 0;
    int ne = 0;                 // per-copy state dimension
    Eigen::MatrixXd Acal, Bcal, Ccal, Dcal, What;
    Eigen::MatrixXd W;          // N x N weight
    std::vector<int> crow_off;  // row offsets of each node's block in Ccal
};

TeamLift build_team_lift(const LiftedSystem& lifted, const Eigen::MatrixXd& W);

// Weighted team filtering recursion from Sigma_W(0) = 0:
//   Syy = Ccal Sigma Ccal^T + Dcal What Dcal^T
//   Sxy = Acal Sigma Ccal^T + Bcal What Dcal^T
//   K   = Sxy Syy^+
//   Sigma+ = (Acal - K Ccal) Sigma (Acal - K Ccal)^T + (Bcal - K Dcal) What (Bcal - K Dcal)^T.
// The gain is block diagonal in effect: column block i of the estimate matrix is
// driven by node i's measurement alone.
struct TeamGainSchedule {
    std::vector<Eigen::MatrixXd> gains;  // K(0..steps-1)
    std::vector<double> residuals;       // max-abs gain increments
    Eigen::MatrixXd sigma_final;         // Sigma_W after the last computed step
    int steps = 0;
    bool stationary = false;
    int stationary_at = -1;              // first step with residual < tol
};

// Runs min(T, 5000) steps; with tol > 0 stops early once the gain is stationary.
TeamGainSchedule team_filter_iterate(const TeamLift& team, int T, double tol = 1e-9);

// Weighted terminal cost trace(Gbar Sigma Gbar^T) with Gbar = [Gamma_1 ... Gamma_N];
// requires homogeneous per-node state dimensions.
double team_weighted_cost(const TeamLift& team, const LiftedSystem& lifted,
                          const Eigen::MatrixXd& sigma);

// Combines the estimate matrix Xhat ((N ne) x N; column i is node i's stacked
// copy estimates) into xcheck_i = sum_j Gamma_j Xhat_(j, i), returned as column i.
Eigen::MatrixXd combine_estimates(const Eigen::MatrixXd& Xhat, const LiftedSystem& lifted);

// Rewrites a correlated-disturbance feedforward problem (disturbance covariance W)
// as the weighted estimation problem on the transposed system with weight W and
// unit-covariance disturbance.
ProblemSpec correlated_to_weighted(const ProblemSpec& p);

}  // namespace graphlq

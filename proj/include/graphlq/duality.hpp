#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphlq/kalman.hpp"
#include "graphlq/lifting.hpp"
#include "graphlq/series.hpp"
#include "graphlq/sysmodel.hpp"

namespace graphlq {

// State feedback u(t) = sum_s k(s) x(t-s) mapped to the disturbance-feedforward
// response of the closed loop x+ = Ax + Bu + w:
//   G = -K (I - A lambda - B K lambda)^{-1},
// so that u(t) = -sum_s g(s) w(t-1-s) reproduces the loop. B must be block
// diagonal and A must respect K's sparsity law; G inherits the law.
MatrixSeries feedback_to_feedforward(const MatrixSeries& K,
                                     const Eigen::MatrixXd& A,
                                     const Eigen::MatrixXd& B);

// Inverse map: K = -G (I - B lambda G)^{-1} (I - A lambda). Lags 0..T-1 of the
// round trip regenerate K exactly; the top truncated lag is not trustworthy.
MatrixSeries feedforward_to_feedback(const MatrixSeries& G,
                                     const Eigen::MatrixXd& A,
                                     const Eigen::MatrixXd& B);

// One node of the distributed disturbance-feedforward controller obtained by
// transposing a node filter synthesized on the dual estimation problem.
struct ControllerNode {
    int node = 0;
    Eigen::MatrixXd Ad;                     // F_i^T = (A_e - K_i E_i)^T on the dual lift
    Eigen::MatrixXd In;                     // Gamma_i^T; driven by w_i(t)
    Eigen::MatrixXd Out;                    // -K_i^T; raw output, routed per pair
    std::vector<std::pair<int, int>> pairs; // row block (j, k) applies to u_j(t + k - 1)
    std::vector<int> pair_rows;             // rows per pair block
};

struct ControllerRealization {
    std::vector<ControllerNode> nodes;
    std::vector<int> u_dims;  // per-node input dims of the controlled plant
    std::vector<int> w_dims;  // per-node disturbance dims
    AdjacencyMatrix law;      // plant graph; the w -> u response lives in its series
    int memory = 0;           // max pair lag k; length of the routing delay lines

    // Aggregate response g with u(t) = -sum_s g(s) w(t-1-s); equals the
    // transposed estimator series of the dual problem coefficient by coefficient.
    MatrixSeries feedforward_series(int horizon) const;
};

// Transposes per-node filters synthesized on lift(dualize(plant)) into the
// distributed controller for the plant itself.
ControllerRealization dual_estimator_to_controller(
    const std::vector<FilterRealization>& filters, const LiftedSystem& dual_lift);

// estimation <-> feedforward on the transposed system; an involution.
ProblemSpec dual_problem(const ProblemSpec& p);

}  // namespace graphlq

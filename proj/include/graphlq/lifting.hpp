#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphlq/graphnet.hpp"
#include "graphlq/sysmodel.hpp"

namespace graphlq {

// One named block of the extended state vector.
struct LayoutEntry {
    std::string name;   // "x.j" or "y.j.lag.k" (1-based node j, register k)
    int offset = 0;
    int size = 0;
};

// Extended system whose state stacks the plant state with M shift registers of
// past outputs:
//   x_e(t) = (x(t); y(t-1); ...; y(t-M)),   x_e(t+1) = A_e x_e(t) + B_e w(t).
//
// Node i's measurement at time t is y_e^i(t) = E_i x_e(t) + D_e_i w(t), built from
// the admissible pairs (j, k), 1 <= k <= M, k-1 >= delay(i, j), ordered j ascending
// then k ascending; pair (j, k) reads y_j(t+1-k). The k = 1 pair (own output, read
// through C_jj on x_j) is the only row with a direct noise term, [D]_j. Rows with
// k >= 2 re-read register k-1, so their innovations vanish once the register content
// is known; register M is stored but never read (it feeds nothing), keeping
// dim(A_e) = n + M p as displayed.
struct LiftedSystem {
    BlockSystem base;
    int M = 0;
    int ne = 0;                                        // n + M p
    Eigen::MatrixXd Ae, Be;                            // ne x ne, ne x n_w
    std::vector<Eigen::MatrixXd> E;                    // per node, q_i x ne
    std::vector<Eigen::MatrixXd> Dei;                  // per node, q_i x n_w
    std::vector<std::vector<std::pair<int, int>>> pairs;  // per node, (j 0-based, k 1-based)
    DelayMatrix delays;
    AdjacencyMatrix graph;
    std::vector<LayoutEntry> layout;

    // Gamma_i: picks x_i out of x_e (n_i x ne).
    Eigen::MatrixXd selector(int i) const;

    // Row offsets of node i's measurement rows, one entry per pair plus a trailing total.
    std::vector<int> pair_row_offsets(int i) const;
};

// Builds the lift. memory = -1 picks the default M = N; M below max finite delay + 1
// is rejected (an admissible measurement would be unrepresentable).
LiftedSystem lift(const BlockSystem& sys, int memory = -1);

// (E_i, D_e_i) for node i.
std::pair<const Eigen::MatrixXd&, const Eigen::MatrixXd&> measurement_map(
    const LiftedSystem& lifted, int i);

}  // namespace graphlq

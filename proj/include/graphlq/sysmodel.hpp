#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphlq/graphnet.hpp"
#include "graphlq/series.hpp"

namespace graphlq {

// Interconnected plant over a directed graph:
//   x(t+1) = A x(t) + B w(t)   (estimation reading; w also drives y directly)
//   y(t)   = C x(t) + D w(t)
// or, read as a disturbance-rejection plant,
//   x(t+1) = A x(t) + B u(t) + w(t),  z(t) = C x(t) + D u(t).
// A is partitioned into N x N node blocks; B and C are block-diagonal. The shared
// disturbance has dimension n_w = sum(m_i) and covariance noise_cov (default I).
struct BlockSystem {
    int N = 0;
    std::vector<int> n_i, m_i, p_i;
    Eigen::MatrixXd A;                       // n x n, assembled
    std::vector<Eigen::MatrixXd> B_blocks;   // per node, n_i x m_i
    std::vector<Eigen::MatrixXd> C_blocks;   // per node, p_i x n_i
    Eigen::MatrixXd D;                       // p x n_w
    Eigen::MatrixXd noise_cov;               // n_w x n_w, SPD

    int n() const;
    int m() const;
    int p() const;
    int n_w() const { return m(); }
    int n_off(int i) const;
    int m_off(int i) const;
    int p_off(int i) const;

    Eigen::MatrixXd B() const;               // block-diagonal, n x m
    Eigen::MatrixXd C() const;               // block-diagonal, p x n
    Eigen::Block<const Eigen::MatrixXd> A_block(int i, int j) const;
};

BlockSystem make_block_system(std::vector<int> n_i,
                              std::vector<int> m_i,
                              std::vector<int> p_i,
                              Eigen::MatrixXd A,
                              std::vector<Eigen::MatrixXd> B_blocks,
                              std::vector<Eigen::MatrixXd> C_blocks,
                              Eigen::MatrixXd D,
                              std::optional<Eigen::MatrixXd> noise_cov = std::nullopt);

// Diagnostic check: returns the list of violated invariants (empty = valid).
// Rank conditions on B_ii (full column) and C_ii (full row) use singular values
// >= 1e-10 * sigma_max.
std::vector<std::string> validate(const BlockSystem& sys);

// Entry (i, j) = 1 iff A_ij has a nonzero entry; diagonal forced to 1 so each node
// always knows its own past.
AdjacencyMatrix adjacency_of(const BlockSystem& sys);

// g(0) = D, g(t) = C A^(t-1) B; carries law = adjacency_of(sys).
MatrixSeries impulse_response(const BlockSystem& sys, int horizon);

// (A, B, C, D) -> (A^T, C^T, B^T, D^T); the graph transposes with it.
BlockSystem dualize(const BlockSystem& sys);

enum class ProblemKind {
    state_feedback,        // u = K(q^-1) x minimizing E||Cx + Du||^2
    feedforward,           // u(t) = -sum g(s) w(t-1-s), same cost
    estimation,            // xhat(t) = sum l(s) y(t-1-s) minimizing E||x - xhat||^2
    weighted_estimation,   // estimation with cost E[(x-xcheck)^T W (x-xcheck)]
    correlated_feedback,   // feedforward with w ~ N(0, W)
};

std::string to_string(ProblemKind kind);

struct ProblemSpec {
    ProblemKind kind;
    BlockSystem system;
    std::optional<Eigen::MatrixXd> weight;   // W for the weighted/correlated kinds
};

// Checks kind/weight/noise_cov consistency (weight SPD where required; noise_cov != I
// only for the weighted/correlated kinds). Returns diagnostics like validate().
std::vector<std::string> validate(const ProblemSpec& p);

}  // namespace graphlq

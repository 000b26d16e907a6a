#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace graphlq {

// Directed interconnection graph as a nonnegative integer adjacency matrix.
// Entry (i, j) counts edges from node j to node i; every node carries at least
// one self-loop (diagonal >= 1), so reachability patterns grow monotonically
// with the walk length.
using AdjacencyMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Entry (i, j): minimal s >= 0 with [A^s]_(i,j) != 0, i.e. the information delay
// from node j to node i, or `unreachable`. Finite entries are <= N-1.
using DelayMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

using PatternMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int unreachable = -1;

// Walk counts saturate here; only zero vs nonzero matters downstream.
inline constexpr std::int64_t adjacency_count_cap = 2147483647;

// Throws std::invalid_argument unless A is square, N >= 1, entrywise >= 0,
// with diagonal >= 1.
void validate_adjacency(const AdjacencyMatrix& a);

// A^s with A^0 = I; exact integer arithmetic with entries saturating at
// adjacency_count_cap.
AdjacencyMatrix power(const AdjacencyMatrix& a, int s);

DelayMatrix delay_matrix(const AdjacencyMatrix& a);

// mask(i, j) = ([A^s]_(i,j) != 0); equals (delay(i,j) <= s) under the loop convention.
PatternMatrix pattern(const AdjacencyMatrix& a, int s);

AdjacencyMatrix transpose_graph(const AdjacencyMatrix& a);

}  // namespace graphlq

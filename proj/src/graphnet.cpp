#include "graphlq/graphnet.hpp"

#include <stdexcept>
#include <string>

namespace graphlq {

namespace {

// Saturating product: operands are <= cap, so each partial product fits in
// int64 and the running sum is clamped before it can overflow.
AdjacencyMatrix saturating_multiply(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
    const Eigen::Index n = a.rows();
    AdjacencyMatrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            std::int64_t acc = 0;
            for (Eigen::Index k = 0; k < n; ++k) {
                acc += a(i, k) * b(k, j);
                if (acc > adjacency_count_cap) acc = adjacency_count_cap;
            }
            out(i, j) = acc;
        }
    }
    return out;
}

}  // namespace

void validate_adjacency(const AdjacencyMatrix& a) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("adjacency matrix must be square");
    if (a.rows() < 1)
        throw std::invalid_argument("adjacency matrix needs at least one node");
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (a(i, j) < 0)
                throw std::invalid_argument("adjacency entries must be nonnegative");
        }
        if (a(i, i) < 1)
            throw std::invalid_argument("adjacency diagonal must be >= 1 (node " +
                                        std::to_string(i) + " lacks its self-loop)");
    }
}

AdjacencyMatrix power(const AdjacencyMatrix& a, int s) {
    validate_adjacency(a);
    if (s < 0) throw std::invalid_argument("adjacency power needs s >= 0");
    const Eigen::Index n = a.rows();
    AdjacencyMatrix out = AdjacencyMatrix::Identity(n, n);
    for (int k = 0; k < s; ++k) out = saturating_multiply(out, a);
    return out;
}

DelayMatrix delay_matrix(const AdjacencyMatrix& a) {
    validate_adjacency(a);
    const Eigen::Index n = a.rows();
    DelayMatrix d = DelayMatrix::Constant(n, n, unreachable);
    // Self-loops make patterns monotone, so s <= N-1 suffices for every finite delay.
    AdjacencyMatrix p = AdjacencyMatrix::Identity(n, n);
    for (int s = 0; s < static_cast<int>(n); ++s) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (d(i, j) == unreachable && p(i, j) != 0) d(i, j) = s;
        if (s + 1 < static_cast<int>(n)) p = saturating_multiply(p, a);
    }
    return d;
}

PatternMatrix pattern(const AdjacencyMatrix& a, int s) {
    const AdjacencyMatrix p = power(a, s);
    return p.array() != 0;
}

AdjacencyMatrix transpose_graph(const AdjacencyMatrix& a) {
    validate_adjacency(a);
    return a.transpose();
}

}  // namespace graphlq

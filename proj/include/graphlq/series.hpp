#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "graphlq/graphnet.hpp"

namespace graphlq {

// Truncated matrix power series G(lambda) = sum_{t=0..T} g(t) lambda^t with block
// partitions and an optional sparsity law: with a law A attached, block (i, j) of
// g(t) is exactly zero whenever [A^t]_(i,j) = 0. Operations re-mask their result,
// so forbidden blocks stay exact zeros rather than accumulating float dust.
class MatrixSeries {
  public:
    // Constructing with a law verifies it: any nonzero entry in a forbidden block
    // throws std::invalid_argument. Use masked() to build from unmasked data.
    MatrixSeries(std::vector<Eigen::MatrixXd> coeffs,
                 std::vector<int> row_dims,
                 std::vector<int> col_dims,
                 std::optional<AdjacencyMatrix> law = std::nullopt);

    // Same, but zeroes forbidden blocks instead of rejecting them.
    static MatrixSeries masked(std::vector<Eigen::MatrixXd> coeffs,
                               std::vector<int> row_dims,
                               std::vector<int> col_dims,
                               AdjacencyMatrix law);

    static MatrixSeries zero(int horizon,
                             std::vector<int> row_dims,
                             std::vector<int> col_dims,
                             std::optional<AdjacencyMatrix> law = std::nullopt);

    int horizon() const { return static_cast<int>(coeffs_.size()) - 1; }
    Eigen::Index rows() const { return coeffs_.front().rows(); }
    Eigen::Index cols() const { return coeffs_.front().cols(); }
    const Eigen::MatrixXd& coeff(int t) const { return coeffs_.at(static_cast<std::size_t>(t)); }
    const std::vector<int>& row_dims() const { return row_dims_; }
    const std::vector<int>& col_dims() const { return col_dims_; }
    const std::optional<AdjacencyMatrix>& law() const { return law_; }

    Eigen::Block<const Eigen::MatrixXd> block(int t, int i, int j) const;

  private:
    MatrixSeries() = default;
    std::vector<Eigen::MatrixXd> coeffs_;
    std::vector<int> row_dims_, col_dims_;
    std::vector<int> row_off_, col_off_;
    std::optional<AdjacencyMatrix> law_;

    void mask_to_law();
    friend MatrixSeries multiply(const MatrixSeries&, const MatrixSeries&);
    friend MatrixSeries feedback_inverse(const MatrixSeries&, const MatrixSeries&);
    friend MatrixSeries transpose(const MatrixSeries&);
};

// g3(t) = sum_{s=0..t} g1(s) g2(t-s), truncated to min(T1, T2). Partitions must
// chain; laws must match (or one side may be lawless), and the result carries the
// common law with structural zeros enforced exactly.
MatrixSeries multiply(const MatrixSeries& g1, const MatrixSeries& g2);

// H2 (I - H1)^{-1} for square, strictly causal H1 (h1(0) = 0), via
// g3(t) = h2(t) + sum_{s=1..t} g3(t-s) h1(s).
MatrixSeries feedback_inverse(const MatrixSeries& h2, const MatrixSeries& h1);

// Coefficientwise transpose; the law transposes with it.
MatrixSeries transpose(const MatrixSeries& g);

// True iff every structurally forbidden block of g has max-abs entry <= tol.
bool membership(const MatrixSeries& g, const AdjacencyMatrix& a, double tol);

// sqrt(sum_t ||g(t)||_F^2).
double norm(const MatrixSeries& g);

}  // namespace graphlq

#include "graphlq/series.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace graphlq {

namespace {

std::vector<int> offsets_of(const std::vector<int>& dims) {
    std::vector<int> off(dims.size() + 1, 0);
    std::partial_sum(dims.begin(), dims.end(), off.begin() + 1);
    return off;
}

// Reachability masks for lags 0..T; pattern(a, t) is monotone in t.
std::vector<PatternMatrix> patterns_up_to(const AdjacencyMatrix& a, int horizon) {
    std::vector<PatternMatrix> pats;
    pats.reserve(static_cast<std::size_t>(horizon) + 1);
    for (int t = 0; t <= horizon; ++t) pats.push_back(pattern(a, t));
    return pats;
}

void check_same_law(const std::optional<AdjacencyMatrix>& l1,
                    const std::optional<AdjacencyMatrix>& l2) {
    if (l1 && l2 && (l1->rows() != l2->rows() || *l1 != *l2))
        throw std::invalid_argument("series laws differ");
}

std::optional<AdjacencyMatrix> common_law(const std::optional<AdjacencyMatrix>& l1,
                                          const std::optional<AdjacencyMatrix>& l2) {
    check_same_law(l1, l2);
    return l1 ? l1 : l2;
}

}  // namespace

MatrixSeries::MatrixSeries(std::vector<Eigen::MatrixXd> coeffs,
                           std::vector<int> row_dims,
                           std::vector<int> col_dims,
                           std::optional<AdjacencyMatrix> law)
    : coeffs_(std::move(coeffs)),
      row_dims_(std::move(row_dims)),
      col_dims_(std::move(col_dims)),
      law_(std::move(law)) {
    if (coeffs_.empty()) throw std::invalid_argument("series needs at least g(0)");
    row_off_ = offsets_of(row_dims_);
    col_off_ = offsets_of(col_dims_);
    for (const auto& c : coeffs_)
        if (c.rows() != row_off_.back() || c.cols() != col_off_.back())
            throw std::invalid_argument("series coefficient dims do not match partitions");
    if (law_) {
        validate_adjacency(*law_);
        const auto n = static_cast<std::size_t>(law_->rows());
        if (row_dims_.size() != n || col_dims_.size() != n)
            throw std::invalid_argument("series partitions do not match law dimension");
        if (!membership(*this, *law_, 0.0))
            throw std::invalid_argument("series violates its sparsity law");
    }
}

MatrixSeries MatrixSeries::masked(std::vector<Eigen::MatrixXd> coeffs,
                                  std::vector<int> row_dims,
                                  std::vector<int> col_dims,
                                  AdjacencyMatrix law) {
    MatrixSeries g;
    g.coeffs_ = std::move(coeffs);
    g.row_dims_ = std::move(row_dims);
    g.col_dims_ = std::move(col_dims);
    g.row_off_ = offsets_of(g.row_dims_);
    g.col_off_ = offsets_of(g.col_dims_);
    g.law_ = std::move(law);
    validate_adjacency(*g.law_);
    g.mask_to_law();
    return g;
}

MatrixSeries MatrixSeries::zero(int horizon,
                                std::vector<int> row_dims,
                                std::vector<int> col_dims,
                                std::optional<AdjacencyMatrix> law) {
    const int r = std::accumulate(row_dims.begin(), row_dims.end(), 0);
    const int c = std::accumulate(col_dims.begin(), col_dims.end(), 0);
    std::vector<Eigen::MatrixXd> coeffs(static_cast<std::size_t>(horizon) + 1,
                                        Eigen::MatrixXd::Zero(r, c));
    return MatrixSeries(std::move(coeffs), std::move(row_dims), std::move(col_dims),
                        std::move(law));
}

Eigen::Block<const Eigen::MatrixXd> MatrixSeries::block(int t, int i, int j) const {
    return coeffs_.at(static_cast<std::size_t>(t))
        .block(row_off_.at(static_cast<std::size_t>(i)), col_off_.at(static_cast<std::size_t>(j)),
               row_dims_.at(static_cast<std::size_t>(i)), col_dims_.at(static_cast<std::size_t>(j)));
}

void MatrixSeries::mask_to_law() {
    if (!law_) return;
    const auto pats = patterns_up_to(*law_, horizon());
    const auto n = static_cast<int>(law_->rows());
    for (int t = 0; t <= horizon(); ++t)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (!pats[static_cast<std::size_t>(t)](i, j))
                    coeffs_[static_cast<std::size_t>(t)]
                        .block(row_off_[static_cast<std::size_t>(i)],
                               col_off_[static_cast<std::size_t>(j)],
                               row_dims_[static_cast<std::size_t>(i)],
                               col_dims_[static_cast<std::size_t>(j)])
                        .setZero();
}

MatrixSeries multiply(const MatrixSeries& g1, const MatrixSeries& g2) {
    if (g1.col_dims() != g2.row_dims())
        throw std::invalid_argument("multiply: inner partitions do not chain");
    auto law = common_law(g1.law(), g2.law());
    const int horizon = std::min(g1.horizon(), g2.horizon());
    std::vector<Eigen::MatrixXd> coeffs;
    coeffs.reserve(static_cast<std::size_t>(horizon) + 1);
    for (int t = 0; t <= horizon; ++t) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(g1.rows(), g2.cols());
        for (int s = 0; s <= t; ++s) acc += g1.coeff(s) * g2.coeff(t - s);
        coeffs.push_back(std::move(acc));
    }
    MatrixSeries out(std::move(coeffs), g1.row_dims(), g2.col_dims(), std::nullopt);
    if (law) {
        out.law_ = std::move(law);
        out.mask_to_law();
    }
    return out;
}

MatrixSeries feedback_inverse(const MatrixSeries& h2, const MatrixSeries& h1) {
    if (h1.rows() != h1.cols() || h1.row_dims() != h1.col_dims())
        throw std::invalid_argument("feedback_inverse: H1 must be square");
    if (h2.col_dims() != h1.row_dims())
        throw std::invalid_argument("feedback_inverse: partitions do not chain");
    if (h1.coeff(0).cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument("feedback_inverse: H1 must be strictly causal (h1(0) = 0)");
    auto law = common_law(h2.law(), h1.law());
    const int horizon = std::min(h2.horizon(), h1.horizon());
    std::vector<Eigen::MatrixXd> coeffs;
    coeffs.reserve(static_cast<std::size_t>(horizon) + 1);
    for (int t = 0; t <= horizon; ++t) {
        Eigen::MatrixXd acc = h2.coeff(t);
        for (int s = 1; s <= t; ++s) acc += coeffs[static_cast<std::size_t>(t - s)] * h1.coeff(s);
        coeffs.push_back(std::move(acc));
    }
    MatrixSeries out(std::move(coeffs), h2.row_dims(), h2.col_dims(), std::nullopt);
    if (law) {
        out.law_ = std::move(law);
        out.mask_to_law();
    }
    return out;
}

MatrixSeries transpose(const MatrixSeries& g) {
    std::vector<Eigen::MatrixXd> coeffs;
    coeffs.reserve(static_cast<std::size_t>(g.horizon()) + 1);
    for (int t = 0; t <= g.horizon(); ++t) coeffs.push_back(g.coeff(t).transpose());
    std::optional<AdjacencyMatrix> law;
    if (g.law()) law = transpose_graph(*g.law());
    return MatrixSeries(std::move(coeffs), g.col_dims(), g.row_dims(), std::move(law));
}

bool membership(const MatrixSeries& g, const AdjacencyMatrix& a, double tol) {
    validate_adjacency(a);
    const auto n = static_cast<std::size_t>(a.rows());
    if (g.row_dims().size() != n || g.col_dims().size() != n)
        throw std::invalid_argument("membership: partitions do not match adjacency dimension");
    const auto pats = patterns_up_to(a, g.horizon());
    for (int t = 0; t <= g.horizon(); ++t)
        for (int i = 0; i < static_cast<int>(n); ++i)
            for (int j = 0; j < static_cast<int>(n); ++j) {
                if (pats[static_cast<std::size_t>(t)](i, j)) continue;
                const auto b = g.block(t, i, j);
                if (b.size() > 0 && b.cwiseAbs().maxCoeff() > tol) return false;
            }
    return true;
}

double norm(const MatrixSeries& g) {
    double sum = 0.0;
    for (int t = 0; t <= g.horizon(); ++t) sum += g.coeff(t).squaredNorm();
    return std::sqrt(sum);
}

}  // namespace graphlq

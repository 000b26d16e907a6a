#include "graphlq/sysmodel.hpp"

#include <numeric>
#include <stdexcept>

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

namespace graphlq {

namespace {

int sum_of(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

int offset_of(const std::vector<int>& v, int i) {
    return std::accumulate(v.begin(), v.begin() + i, 0);
}

bool has_rank(const Eigen::MatrixXd& mat, Eigen::Index want) {
    if (mat.size() == 0) return want == 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
    const auto& sv = svd.singularValues();
    const double cut = 1e-10 * sv(0);
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > cut && sv(k) > 0.0) ++rank;
    return rank == want;
}

}  // namespace

int BlockSystem::n() const { return sum_of(n_i); }
int BlockSystem::m() const { return sum_of(m_i); }
int BlockSystem::p() const { return sum_of(p_i); }
int BlockSystem::n_off(int i) const { return offset_of(n_i, i); }
int BlockSystem::m_off(int i) const { return offset_of(m_i, i); }
int BlockSystem::p_off(int i) const { return offset_of(p_i, i); }

Eigen::MatrixXd BlockSystem::B() const {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n(), m());
    for (int i = 0; i < N; ++i)
        b.block(n_off(i), m_off(i), n_i[static_cast<std::size_t>(i)],
                m_i[static_cast<std::size_t>(i)]) = B_blocks[static_cast<std::size_t>(i)];
    return b;
}

Eigen::MatrixXd BlockSystem::C() const {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p(), n());
    for (int i = 0; i < N; ++i)
        c.block(p_off(i), n_off(i), p_i[static_cast<std::size_t>(i)],
                n_i[static_cast<std::size_t>(i)]) = C_blocks[static_cast<std::size_t>(i)];
    return c;
}

Eigen::Block<const Eigen::MatrixXd> BlockSystem::A_block(int i, int j) const {
    return A.block(n_off(i), n_off(j), n_i[static_cast<std::size_t>(i)],
                   n_i[static_cast<std::size_t>(j)]);
}

BlockSystem make_block_system(std::vector<int> n_i,
                              std::vector<int> m_i,
                              std::vector<int> p_i,
                              Eigen::MatrixXd A,
                              std::vector<Eigen::MatrixXd> B_blocks,
                              std::vector<Eigen::MatrixXd> C_blocks,
                              Eigen::MatrixXd D,
                              std::optional<Eigen::MatrixXd> noise_cov) {
    BlockSystem sys;
    sys.N = static_cast<int>(n_i.size());
    sys.n_i = std::move(n_i);
    sys.m_i = std::move(m_i);
    sys.p_i = std::move(p_i);
    sys.A = std::move(A);
    sys.B_blocks = std::move(B_blocks);
    sys.C_blocks = std::move(C_blocks);
    sys.D = std::move(D);
    sys.noise_cov = noise_cov ? std::move(*noise_cov)
                              : Eigen::MatrixXd::Identity(sys.m(), sys.m()).eval();
    auto issues = validate(sys);
    if (!issues.empty()) {
        std::string msg = "invalid block system:";
        for (const auto& s : issues) msg += "\n  " + s;
        throw std::invalid_argument(msg);
    }
    return sys;
}

std::vector<std::string> validate(const BlockSystem& sys) {
    std::vector<std::string> issues;
    const auto nodes = static_cast<std::size_t>(sys.N);
    if (sys.N < 1) {
        issues.push_back("N must be >= 1");
        return issues;
    }
    if (sys.n_i.size() != nodes || sys.m_i.size() != nodes || sys.p_i.size() != nodes) {
        issues.push_back("dim vectors must each have N entries");
        return issues;
    }
    for (std::size_t i = 0; i < nodes; ++i)
        if (sys.n_i[i] < 1 || sys.m_i[i] < 1 || sys.p_i[i] < 1)
            issues.push_back("node " + std::to_string(i + 1) + " has a nonpositive dimension");
    if (!issues.empty()) return issues;

    const int n = sys.n(), m = sys.m(), p = sys.p();
    if (sys.A.rows() != n || sys.A.cols() != n)
        issues.push_back("A must be " + std::to_string(n) + "x" + std::to_string(n));
    if (sys.B_blocks.size() != nodes || sys.C_blocks.size() != nodes) {
        issues.push_back("B/C must carry one block per node");
        return issues;
    }
    for (std::size_t i = 0; i < nodes; ++i) {
        const auto& b = sys.B_blocks[i];
        const auto& c = sys.C_blocks[i];
        if (b.rows() != sys.n_i[i] || b.cols() != sys.m_i[i])
            issues.push_back("B block " + std::to_string(i + 1) + " has wrong dimensions");
        else if (!has_rank(b, b.cols()))
            issues.push_back("B block " + std::to_string(i + 1) + " is not full column rank");
        if (c.rows() != sys.p_i[i] || c.cols() != sys.n_i[i])
            issues.push_back("C block " + std::to_string(i + 1) + " has wrong dimensions");
        else if (!has_rank(c, c.rows()))
            issues.push_back("C block " + std::to_string(i + 1) + " is not full row rank");
    }
    if (sys.D.rows() != p || sys.D.cols() != sys.n_w())
        issues.push_back("D must be " + std::to_string(p) + "x" + std::to_string(sys.n_w()));
    if (sys.noise_cov.rows() != sys.n_w() || sys.noise_cov.cols() != sys.n_w()) {
        issues.push_back("noise_cov must be " + std::to_string(sys.n_w()) + "x" +
                         std::to_string(sys.n_w()));
    } else {
        if ((sys.noise_cov - sys.noise_cov.transpose()).cwiseAbs().maxCoeff() > 1e-10)
            issues.push_back("noise_cov must be symmetric");
        else if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sys.noise_cov)
                     .eigenvalues()
                     .minCoeff() <= 0.0)
            issues.push_back("noise_cov must be positive definite");
    }
    return issues;
}

AdjacencyMatrix adjacency_of(const BlockSystem& sys) {
    AdjacencyMatrix a = AdjacencyMatrix::Zero(sys.N, sys.N);
    for (int i = 0; i < sys.N; ++i)
        for (int j = 0; j < sys.N; ++j)
            if (i == j || sys.A_block(i, j).cwiseAbs().maxCoeff() > 0.0) a(i, j) = 1;
    return a;
}

MatrixSeries impulse_response(const BlockSystem& sys, int horizon) {
    if (horizon < 0) throw std::invalid_argument("impulse_response: horizon must be >= 0");
    const Eigen::MatrixXd b = sys.B();
    const Eigen::MatrixXd c = sys.C();
    std::vector<Eigen::MatrixXd> coeffs;
    coeffs.reserve(static_cast<std::size_t>(horizon) + 1);
    coeffs.push_back(sys.D);
    Eigen::MatrixXd apow = Eigen::MatrixXd::Identity(sys.n(), sys.n());
    for (int t = 1; t <= horizon; ++t) {
        coeffs.push_back(c * apow * b);
        apow = sys.A * apow;
    }
    return MatrixSeries::masked(std::move(coeffs), sys.p_i, sys.m_i, adjacency_of(sys));
}

BlockSystem dualize(const BlockSystem& sys) {
    std::vector<Eigen::MatrixXd> b_blocks, c_blocks;
    b_blocks.reserve(static_cast<std::size_t>(sys.N));
    c_blocks.reserve(static_cast<std::size_t>(sys.N));
    for (int i = 0; i < sys.N; ++i) {
        b_blocks.push_back(sys.C_blocks[static_cast<std::size_t>(i)].transpose());
        c_blocks.push_back(sys.B_blocks[static_cast<std::size_t>(i)].transpose());
    }
    return make_block_system(sys.n_i, sys.p_i, sys.m_i, sys.A.transpose(), std::move(b_blocks),
                             std::move(c_blocks), sys.D.transpose());
}

std::string to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::state_feedback: return "state_feedback";
        case ProblemKind::feedforward: return "feedforward";
        case ProblemKind::estimation: return "estimation";
        case ProblemKind::weighted_estimation: return "weighted_estimation";
        case ProblemKind::correlated_feedback: return "correlated_feedback";
    }
    return "unknown";
}

std::vector<std::string> validate(const ProblemSpec& p) {
    std::vector<std::string> issues = validate(p.system);
    const bool weighted = p.kind == ProblemKind::weighted_estimation ||
                          p.kind == ProblemKind::correlated_feedback;
    if (weighted) {
        if (!p.weight) {
            issues.push_back(to_string(p.kind) + " requires a weight matrix");
        } else {
            const auto& w = *p.weight;
            if (w.rows() != w.cols())
                issues.push_back("weight must be square");
            else if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-10)
                issues.push_back("weight must be symmetric");
            else if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(w).eigenvalues().minCoeff() <=
                     0.0)
                issues.push_back("weight must be positive definite");
        }
    } else {
        if (p.weight) issues.push_back(to_string(p.kind) + " does not take a weight");
        const Eigen::MatrixXd eye =
            Eigen::MatrixXd::Identity(p.system.n_w(), p.system.n_w());
        if (p.system.noise_cov.rows() == eye.rows() &&
            (p.system.noise_cov - eye).cwiseAbs().maxCoeff() > 0.0)
            issues.push_back(to_string(p.kind) + " requires unit noise covariance");
    }
    return issues;
}

}  // namespace graphlq

#include "graphlq/linalg.hpp"

#include <Eigen/Eigenvalues>

namespace graphlq {

Eigen::MatrixXd pinv_psd(const Eigen::MatrixXd& s, double rel_tol) {
    if (s.size() == 0) return s;
    const Eigen::MatrixXd sym = symmetrized(s);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const Eigen::VectorXd& vals = eig.eigenvalues();
    const double cutoff = rel_tol * vals.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(vals.size());
    for (Eigen::Index i = 0; i < vals.size(); ++i)
        if (vals(i) > cutoff && vals(i) > 0.0) inv(i) = 1.0 / vals(i);
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(s));
    Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double spectral_radius(const Eigen::MatrixXd& m) {
    return m.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace graphlq

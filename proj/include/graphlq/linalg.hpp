#pragma once

#include <Eigen/Dense>

namespace graphlq {

// Pseudo-inverse of a symmetric positive semidefinite matrix via eigendecomposition.
// Eigenvalues below rel_tol * max(|eig|) are treated as rank-deficient and dropped.
// The input is symmetrized first; singular innovation covariances are expected
// (delayed-output rows are noise-free), so this is the one inversion used on them.
Eigen::MatrixXd pinv_psd(const Eigen::MatrixXd& s, double rel_tol = 1e-10);

// Symmetric PSD square root; negative eigenvalues (numerical noise) clamp to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s);

double spectral_radius(const Eigen::MatrixXd& m);

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

}  // namespace graphlq

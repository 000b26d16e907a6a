#pragma once

#include <vector>

#include <Eigen/Dense>

#include "graphlq/lifting.hpp"
#include "graphlq/series.hpp"

namespace graphlq {

struct RiccatiOptions {
    double tol = 1e-11;          // max-abs P-update difference
    int max_iter = 10000;
    double pinv_rel_tol = 1e-10; // rank cutoff for the innovation pseudo-inverse
};

struct RiccatiResult {
    Eigen::MatrixXd P;      // stationary predicted error covariance
    Eigen::MatrixXd gain;   // K = (A P C^T + S)(C P C^T + R)^+
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

// Fixed-point iteration of the filtering Riccati update from P0 = Q:
//   P+ = A P A^T + Q - (A P C^T + S)(C P C^T + R)^+ (A P C^T + S)^T.
// P is symmetrized every step. Singular innovation covariance is expected and
// handled by the PSD pseudo-inverse. Non-convergence is reported, not thrown;
// NaN/Inf in the iterates throws std::runtime_error.
RiccatiResult riccati_iterate(const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& C,
                              const Eigen::MatrixXd& Q,
                              const Eigen::MatrixXd& R,
                              const Eigen::MatrixXd& S,
                              const RiccatiOptions& opts = {});

// Stationary one-step predictor for node i on the lifted system:
//   xhat_e(t+1) = A_e xhat_e(t) + K_i (y_e^i(t) - E_i xhat_e(t)).
struct FilterRealization {
    int node = 0;
    Eigen::MatrixXd F;        // A_e - K_i E_i
    Eigen::MatrixXd G_in;     // K_i
    Eigen::MatrixXd H;        // Gamma_i
    double spectral_radius = 0.0;
    RiccatiResult riccati;
};

// Riccati data: A = A_e, C = E_i, Q = B_e V B_e^T, R = D_e_i V D_e_i^T,
// S = B_e V D_e_i^T with V the disturbance covariance (identity for the plain
// estimation problem). When the innovation covariance is singular the optimal
// gain is not unique; if the minimum-norm gain (riccati.gain) leaves
// A_e - K E_i unstable, G_in is completed on the zero-variance innovation
// directions to a stabilizing gain with identical estimate trajectories.
FilterRealization synthesize_node_filter(const LiftedSystem& lifted, int i,
                                         const RiccatiOptions& opts = {});

// Stacks the per-node filter responses ltilde_i(s) = Gamma_i (A_e - K_i E_i)^s K_i
// into the estimator series of xhat(t) = sum_s l(s) y(t-1-s): measurement row
// (j, k) of node i reads y_j(t+1-k), so it lands in block (i, j) of l(k-1+s).
// Blocks never written stay exact zeros; the result carries law adjacency_of(base).
MatrixSeries assemble_estimator(const std::vector<FilterRealization>& filters,
                                const LiftedSystem& lifted, int horizon);

struct CovarianceReport {
    Eigen::MatrixXd sigma;        // stationary filter error covariance on x_e
    double cost = 0.0;            // trace(Gamma_i sigma Gamma_i^T); NaN if not stable
    bool stable = false;
    double spectral_radius = 0.0;
    int iterations = 0;
};

// Stationary error covariance of one node filter:
//   sigma = F sigma F^T + (B_e - K_i D_e_i) V (B_e - K_i D_e_i)^T
// iterated to max-abs increment 1e-12. A filter with spectral radius >= 1 is
// declared non-stabilizing (stable = false, cost = NaN) without iterating.
CovarianceReport filter_error_covariance(const FilterRealization& filter,
                                         const LiftedSystem& lifted, int i);

}  // namespace graphlq

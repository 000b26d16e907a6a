#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "graphlq/duality.hpp"
#include "graphlq/kalman.hpp"
#include "graphlq/lifting.hpp"
#include "graphlq/series.hpp"
#include "graphlq/sysmodel.hpp"

namespace graphlq {

// Stationary output power trace(H Sigma H^T) with Sigma = F Sigma F^T + G G^T,
// iterated to max-abs increment 1e-12. Throws std::runtime_error if the
// spectral radius of F is >= 1.
double analytic_cost(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G,
                     const Eigen::MatrixXd& H);

// Structured finite-horizon least squares: the reference optimum every synthesis
// route is checked against. Solves the normal equations over the free entries of
// the coefficient series; entries outside the information structure are pinned
// to exact zero.
struct OracleSolution {
    MatrixSeries coefficients;      // l(s) or g(s), s = 0..horizon-1
    double cost = 0.0;              // minimized objective value
    double residual = 0.0;          // ||A v - b|| / max(1, ||b||) of the normal equations
    std::vector<double> node_costs; // per-node split; filled only when the row weight is I
    bool ill_conditioned = false;   // min/max eigenvalue gap of the normal matrix < 1e-10
    double condition_gap = 0.0;     // that min/max gap (worst block)
};

// Estimation reading x+ = A x + B w, y = C x + D w, w ~ N(0, noise_cov):
// minimizes sum_{k=1..err_horizon} trace(e(k)^T WL e(k) noise_cov) over
// l(0..horizon-1) with e(k) = h_x(k) - sum_s l(s) h_y(k-1-s), subject to
// block (i, j) of l(s) being zero unless delay(i, j) <= s in graph a.
// weight WL is n x n, or empty for identity; err_horizon < 0 means horizon,
// which makes the objective the terminal error power after `horizon` steps
// from rest.
OracleSolution structured_ls_oracle(const BlockSystem& sys, const AdjacencyMatrix& a,
                                    const Eigen::MatrixXd& weight, int horizon,
                                    int err_horizon = -1);

// Feedforward reading x+ = A x + B u + w, z = C x + D u, w ~ N(0, noise_weight):
// minimizes sum_k trace(e(k) noise_weight e(k)^T) over g(0..horizon-1) with
// e(k) = h_zw(k) - sum_t h_zu(k-1-t) g(t) and the same structural pinning.
// Solved natively (not by transposing the estimation path), so the two routes
// stay independent checks of each other.
OracleSolution feedforward_ls_oracle(const BlockSystem& sys, const AdjacencyMatrix& a,
                                     const Eigen::MatrixXd& noise_weight, int horizon,
                                     int err_horizon = -1);

// Objective evaluators for arbitrary coefficient series; used to probe that a
// reported optimum cannot be improved by coordinate perturbations.
double fir_estimation_cost(const BlockSystem& sys, const MatrixSeries& l,
                           int err_horizon, const Eigen::MatrixXd& weight = {});
double fir_feedforward_cost(const BlockSystem& sys, const MatrixSeries& g,
                            int err_horizon, const Eigen::MatrixXd& noise_weight = {});

struct SimReport {
    std::vector<double> node_cost;  // mean squared error per node per step
    double total_cost = 0.0;
    double total_stderr = 0.0;      // over per-trial means
    int trials = 0;
    int horizon = 0;
    std::uint64_t seed = 0;
    bool diverged = false;
};

// Monte Carlo run of the per-node filters on the lifted plant. Disturbances are
// i.i.d. N(0, noise_cov), state and filters start at rest, and only the second
// half of each trajectory is averaged. Trial r draws from substream (seed, r),
// so reports are independent of trial scheduling.
SimReport simulate_estimator(const LiftedSystem& lifted,
                             const std::vector<FilterRealization>& filters,
                             int horizon, int trials, std::uint64_t seed);

struct WhitenessReport {
    std::vector<double> max_abs_corr;  // worst normalized autocorrelation per lag 1..max_lag
    std::vector<double> threshold;     // 4 / sqrt(samples) per lag
    int samples = 0;                   // sample pairs at lag 1
    bool pass = false;
};

// Lag 1..max_lag sample autocorrelations of the innovation components of every
// node filter, after burn-in. Components whose innovation variance is
// negligible (rows the filter reconstructs exactly) are skipped.
WhitenessReport innovation_whiteness(const LiftedSystem& lifted,
                                     const std::vector<FilterRealization>& filters,
                                     int horizon, int trials, std::uint64_t seed,
                                     int max_lag = 5);

struct ClosedLoopReport {
    double cost = 0.0;     // mean ||z(t)||^2 per step after burn-in
    double cost_stderr = 0.0;
    int trials = 0;
    int horizon = 0;
    std::uint64_t seed = 0;
    bool diverged = false;
};

// Monte Carlo run of x+ = A x + B u + w, z = C x + D u with the distributed
// controller (ctrl == nullptr gives the open loop u = 0). w ~ N(0, cov) with
// empty cov meaning identity. Averages ||z||^2 over the second half.
ClosedLoopReport simulate_closed_loop(const BlockSystem& sys,
                                      const ControllerRealization* ctrl,
                                      int horizon, int trials, std::uint64_t seed,
                                      const Eigen::MatrixXd& cov = {});

}  // namespace graphlq

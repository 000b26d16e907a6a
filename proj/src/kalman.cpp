#include "graphlq/kalman.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "graphlq/linalg.hpp"
#include "graphlq/sysmodel.hpp"

namespace graphlq {

RiccatiResult riccati_iterate(const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& C,
                              const Eigen::MatrixXd& Q,
                              const Eigen::MatrixXd& R,
                              const Eigen::MatrixXd& S,
                              const RiccatiOptions& opts) {
    const auto n = A.rows();
    const auto q = C.rows();
    if (A.cols() != n || C.cols() != n || Q.rows() != n || Q.cols() != n ||
        R.rows() != q || R.cols() != q || S.rows() != n || S.cols() != q) {
        throw std::invalid_argument("riccati_iterate: inconsistent dimensions");
    }

    RiccatiResult res;
    res.P = symmetrized(Q);
    res.residual = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd gain = Eigen::MatrixXd::Zero(n, q);
    for (int it = 1; it <= opts.max_iter; ++it) {
        const Eigen::MatrixXd cross = A * res.P * C.transpose() + S;
        const Eigen::MatrixXd innov = C * res.P * C.transpose() + R;
        gain = cross * pinv_psd(innov, opts.pinv_rel_tol);
        Eigen::MatrixXd next = A * res.P * A.transpose() + Q - gain * cross.transpose();
        next = symmetrized(next);
        if (!next.allFinite()) {
            throw std::runtime_error("riccati_iterate: iterate is not finite");
        }
        res.residual = (next - res.P).cwiseAbs().maxCoeff();
        res.P = next;
        res.iterations = it;
        if (res.residual < opts.tol) {
            res.converged = true;
            break;
        }
    }
    const Eigen::MatrixXd cross = A * res.P * C.transpose() + S;
    const Eigen::MatrixXd innov = C * res.P * C.transpose() + R;
    res.gain = cross * pinv_psd(innov, opts.pinv_rel_tol);
    return res;
}

namespace {

// Completes an optimal gain on the null space of the innovation covariance.
// Zero-variance innovation directions never carry signal, so K and K + Z Pi
// drive identical estimate trajectories; Z only changes the realization
// matrix A - K C. A discrete LQR pass on the transposed pair picks a Z that
// pulls the realization inside the unit circle when the minimum-norm gain
// fails to. Returns the input gain unchanged if the covariance is
// nonsingular. The pass is a proposal only: when the pair is not stabilizable
// the cost iterate diverges and the harvested gain is astronomically large,
// so oversized proposals are dropped here and the caller keeps a completion
// only when it verifiably pulls the spectral radius below one.
Eigen::MatrixXd stabilize_on_null(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                  const Eigen::MatrixXd& innov, const Eigen::MatrixXd& gain,
                                  double rel_tol) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(innov));
    const double cut = rel_tol * std::max(0.0, es.eigenvalues().maxCoeff());
    const Eigen::VectorXd sel = (es.eigenvalues().array() <= cut).cast<double>();
    if (sel.sum() == 0.0) {
        return gain;
    }
    const Eigen::MatrixXd Pi =
        es.eigenvectors() * sel.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::MatrixXd Abar = (A - gain * C).transpose();
    const Eigen::MatrixXd Bbar = (Pi * C).transpose();
    const auto n = A.rows();
    const auto q = Bbar.cols();
    const Eigen::MatrixXd In = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd Iq = Eigen::MatrixXd::Identity(q, q);
    Eigen::MatrixXd X = In;
    for (int it = 0; it < 20000; ++it) {
        const Eigen::MatrixXd L =
            (Bbar.transpose() * X * Bbar + Iq).ldlt().solve(Bbar.transpose() * X * Abar);
        Eigen::MatrixXd next = In + Abar.transpose() * (X * Abar - X * Bbar * L);
        next = symmetrized(next);
        if (!next.allFinite()) {
            return gain;  // pair not stabilizable: leave the gain alone
        }
        const double diff = (next - X).cwiseAbs().maxCoeff();
        X = next;
        if (diff < 1e-11 || X.cwiseAbs().maxCoeff() > 1e20) {
            break;  // settled, or clearly diverging: the cap below decides
        }
    }
    const Eigen::MatrixXd Z =
        (Bbar.transpose() * X * Bbar + Iq).ldlt().solve(Bbar.transpose() * X * Abar).transpose();
    // A completion that dwarfs the minimum-norm gain needs a realization whose
    // entries cancel catastrophically in every downstream product; reporting
    // the instability honestly is strictly more useful than faking stability.
    const double cap = 1e3 * (1.0 + gain.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd shift = Z * Pi;
    if (!shift.allFinite() || shift.cwiseAbs().maxCoeff() > cap) {
        return gain;
    }
    return gain + shift;
}

}  // namespace

FilterRealization synthesize_node_filter(const LiftedSystem& lifted, int i,
                                         const RiccatiOptions& opts) {
    if (i < 0 || i >= lifted.base.N) {
        throw std::invalid_argument("synthesize_node_filter: node index out of range");
    }
    const Eigen::MatrixXd& V = lifted.base.noise_cov;
    const Eigen::MatrixXd& Ei = lifted.E[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd& Di = lifted.Dei[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd Q = lifted.Be * V * lifted.Be.transpose();
    const Eigen::MatrixXd R = Di * V * Di.transpose();
    const Eigen::MatrixXd S = lifted.Be * V * Di.transpose();

    FilterRealization f;
    f.node = i;
    f.riccati = riccati_iterate(lifted.Ae, Ei, Q, R, S, opts);
    f.G_in = f.riccati.gain;
    f.F = lifted.Ae - f.G_in * Ei;
    f.H = lifted.selector(i);
    f.spectral_radius = spectral_radius(f.F);
    if (f.spectral_radius >= 1.0) {
        const Eigen::MatrixXd innov = Ei * f.riccati.P * Ei.transpose() + R;
        const Eigen::MatrixXd cand =
            stabilize_on_null(lifted.Ae, Ei, innov, f.riccati.gain, opts.pinv_rel_tol);
        const Eigen::MatrixXd Fc = lifted.Ae - cand * Ei;
        const double rc = spectral_radius(Fc);
        if (rc < 1.0) {
            f.G_in = cand;
            f.F = Fc;
            f.spectral_radius = rc;
        }
    }
    return f;
}

MatrixSeries assemble_estimator(const std::vector<FilterRealization>& filters,
                                const LiftedSystem& lifted, int horizon) {
    const BlockSystem& base = lifted.base;
    if (static_cast<int>(filters.size()) != base.N) {
        throw std::invalid_argument("assemble_estimator: one filter per node required");
    }
    if (horizon < 0) {
        throw std::invalid_argument("assemble_estimator: horizon must be >= 0");
    }

    std::vector<Eigen::MatrixXd> coeffs(
        static_cast<std::size_t>(horizon) + 1,
        Eigen::MatrixXd::Zero(base.n(), base.p()));

    for (int i = 0; i < base.N; ++i) {
        const FilterRealization& f = filters[static_cast<std::size_t>(i)];
        if (f.node != i) {
            throw std::invalid_argument("assemble_estimator: filters out of node order");
        }
        // ltilde(s) = Gamma_i F^s K_i, built incrementally in cur = F^s K_i.
        std::vector<Eigen::MatrixXd> ltilde;
        ltilde.reserve(static_cast<std::size_t>(horizon) + 1);
        Eigen::MatrixXd cur = f.G_in;
        for (int s = 0; s <= horizon; ++s) {
            ltilde.push_back(f.H * cur);
            if (s < horizon) cur = f.F * cur;
        }

        const auto& pairs = lifted.pairs[static_cast<std::size_t>(i)];
        const std::vector<int> row_off = lifted.pair_row_offsets(i);
        for (int sigma = 0; sigma <= horizon; ++sigma) {
            Eigen::MatrixXd& out = coeffs[static_cast<std::size_t>(sigma)];
            for (std::size_t pr = 0; pr < pairs.size(); ++pr) {
                const int j = pairs[pr].first;
                const int k = pairs[pr].second;
                if (k > sigma + 1) continue;  // row reads y_j(t+1-k); lands at lag k-1+s
                const int rows = row_off[pr + 1] - row_off[pr];
                out.block(base.n_off(i), base.p_off(j), base.n_i[static_cast<std::size_t>(i)],
                          base.p_i[static_cast<std::size_t>(j)]) +=
                    ltilde[static_cast<std::size_t>(sigma + 1 - k)].middleCols(row_off[pr], rows);
            }
        }
    }

    return MatrixSeries(std::move(coeffs), base.n_i, base.p_i, adjacency_of(base));
}

CovarianceReport filter_error_covariance(const FilterRealization& filter,
                                         const LiftedSystem& lifted, int i) {
    if (i < 0 || i >= lifted.base.N || filter.node != i) {
        throw std::invalid_argument("filter_error_covariance: node mismatch");
    }
    CovarianceReport rep;
    rep.spectral_radius = spectral_radius(filter.F);
    rep.sigma = Eigen::MatrixXd::Zero(lifted.ne, lifted.ne);
    rep.cost = std::numeric_limits<double>::quiet_NaN();
    if (rep.spectral_radius >= 1.0) {
        return rep;  // non-stabilizing filter: no stationary covariance
    }

    const Eigen::MatrixXd& V = lifted.base.noise_cov;
    const Eigen::MatrixXd Gcl =
        lifted.Be - filter.G_in * lifted.Dei[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd W = symmetrized(Gcl * V * Gcl.transpose());

    constexpr double tol = 1e-12;
    constexpr int max_iter = 200000;
    Eigen::MatrixXd sigma = W;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::MatrixXd next = symmetrized(filter.F * sigma * filter.F.transpose() + W);
        const double diff = (next - sigma).cwiseAbs().maxCoeff();
        sigma = next;
        rep.iterations = it;
        if (diff < tol) {
            rep.stable = true;
            break;
        }
    }
    rep.sigma = sigma;
    if (rep.stable) {
        rep.cost = (filter.H * sigma * filter.H.transpose()).trace();
    }
    return rep;
}

}  // namespace graphlq

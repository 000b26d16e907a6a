#include "graphlq/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "graphlq/linalg.hpp"
#include "graphlq/rng.hpp"

namespace graphlq {

namespace {

constexpr double kConditionGapFloor = 1e-10;

// Trials are fanned out over GRAPHLQ_THREADS workers; each trial writes its own
// slot, and the merge walks slots in index order, so the report is bit-identical
// for any thread count.
int thread_count() {
    const char* s = std::getenv("GRAPHLQ_THREADS");
    if (!s) return 1;
    const int k = std::atoi(s);
    if (k < 1) return 1;
    const unsigned hw = std::thread::hardware_concurrency();
    return std::min(k, static_cast<int>(hw == 0 ? 64 : 4 * hw));
}

template <typename Fn>
void run_trials(int trials, Fn&& per_trial) {
    const int k = std::min(thread_count(), trials);
    if (k <= 1) {
        for (int r = 0; r < trials; ++r) per_trial(r);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(k));
    for (int w = 0; w < k; ++w)
        pool.emplace_back([&, w] {
            for (int r = w; r < trials; r += k) per_trial(r);
        });
    for (auto& t : pool) t.join();
}

// Markov parameters of the estimation reading: hx(k) = A^{k-1} B for k >= 1,
// hy(0) = D, hy(k) = C A^{k-1} B. Index 0 of hx is unused and kept zero.
struct MarkovData {
    std::vector<Eigen::MatrixXd> hx;  // 0..err_horizon
    std::vector<Eigen::MatrixXd> hy;  // 0..err_horizon - 1 (largest index used)
};

MarkovData markov_estimation(const BlockSystem& sys, int err_horizon) {
    MarkovData md;
    md.hx.assign(static_cast<std::size_t>(err_horizon) + 1,
                 Eigen::MatrixXd::Zero(sys.n(), sys.n_w()));
    md.hy.assign(static_cast<std::size_t>(err_horizon),
                 Eigen::MatrixXd::Zero(sys.p(), sys.n_w()));
    Eigen::MatrixXd Ak_B = sys.B();  // A^{k-1} B
    const Eigen::MatrixXd C = sys.C();
    for (int k = 1; k <= err_horizon; ++k) {
        md.hx[static_cast<std::size_t>(k)] = Ak_B;
        if (k < err_horizon) md.hy[static_cast<std::size_t>(k)] = C * Ak_B;
        if (k < err_horizon) Ak_B = sys.A * Ak_B;
    }
    if (err_horizon >= 1) md.hy[0] = sys.D;
    return md;
}

// Feedforward reading: hzw(k) = C A^{k-1} for k >= 1, hzu(0) = D,
// hzu(k) = C A^{k-1} B.
struct FeedforwardData {
    std::vector<Eigen::MatrixXd> hzw;  // 0..err_horizon
    std::vector<Eigen::MatrixXd> hzu;  // 0..err_horizon - 1
};

FeedforwardData markov_feedforward(const BlockSystem& sys, int err_horizon) {
    FeedforwardData fd;
    fd.hzw.assign(static_cast<std::size_t>(err_horizon) + 1,
                  Eigen::MatrixXd::Zero(sys.p(), sys.n()));
    fd.hzu.assign(static_cast<std::size_t>(err_horizon),
                  Eigen::MatrixXd::Zero(sys.p(), sys.m()));
    Eigen::MatrixXd C_Ak = sys.C();  // C A^{k-1}
    for (int k = 1; k <= err_horizon; ++k) {
        fd.hzw[static_cast<std::size_t>(k)] = C_Ak;
        if (k < err_horizon) fd.hzu[static_cast<std::size_t>(k)] = C_Ak * sys.B();
        if (k < err_horizon) C_Ak = C_Ak * sys.A;
    }
    if (err_horizon >= 1) fd.hzu[0] = sys.D;
    return fd;
}

std::vector<int> rows_to_nodes(const std::vector<int>& dims) {
    std::vector<int> owner;
    for (std::size_t i = 0; i < dims.size(); ++i)
        owner.insert(owner.end(), static_cast<std::size_t>(dims[i]), static_cast<int>(i));
    return owner;
}

struct NormalSolve {
    Eigen::VectorXd v;
    double cost_term = 0.0;     // -2 b^T v + v^T M v
    double res2 = 0.0;          // ||M v - b||^2
    double rhs2 = 0.0;          // ||b||^2
    double eig_min = 0.0, eig_max = 0.0;
};

NormalSolve solve_normal(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                         double rel_tol = 1e-10) {
    NormalSolve out;
    if (b.size() == 0) return out;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(M));
    out.eig_max = es.eigenvalues().cwiseAbs().maxCoeff();
    out.eig_min = es.eigenvalues().minCoeff();
    const double cut = rel_tol * out.eig_max;
    Eigen::VectorXd inv = es.eigenvalues();
    for (Eigen::Index i = 0; i < inv.size(); ++i)
        inv(i) = (es.eigenvalues()(i) > cut && es.eigenvalues()(i) > 0.0)
                     ? 1.0 / es.eigenvalues()(i)
                     : 0.0;
    out.v = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * b;
    out.cost_term = -2.0 * b.dot(out.v) + out.v.dot(M * out.v);
    out.res2 = (M * out.v - b).squaredNorm();
    out.rhs2 = b.squaredNorm();
    return out;
}

void check_oracle_inputs(const BlockSystem& sys, const AdjacencyMatrix& a, int horizon) {
    validate_adjacency(a);
    if (a.rows() != sys.N)
        throw std::invalid_argument("ls oracle: adjacency dimension does not match the system");
    if (horizon < 1) throw std::invalid_argument("ls oracle: horizon must be >= 1");
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(symmetrized(cov));
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("covariance is not positive definite");
    return llt.matrixL();
}

}  // namespace

double analytic_cost(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G,
                     const Eigen::MatrixXd& H) {
    if (F.rows() != F.cols() || G.rows() != F.rows() || H.cols() != F.rows())
        throw std::invalid_argument("analytic_cost: inconsistent dimensions");
    if (spectral_radius(F) >= 1.0)
        throw std::runtime_error("analytic_cost: realization is not stable");
    const Eigen::MatrixXd W = symmetrized(G * G.transpose());
    Eigen::MatrixXd sigma = W;
    constexpr double tol = 1e-12;
    constexpr int max_iter = 500000;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd next = symmetrized(F * sigma * F.transpose() + W);
        const double diff = (next - sigma).cwiseAbs().maxCoeff();
        sigma = next;
        if (diff < tol) return (H * sigma * H.transpose()).trace();
    }
    throw std::runtime_error("analytic_cost: covariance iteration did not converge");
}

OracleSolution structured_ls_oracle(const BlockSystem& sys, const AdjacencyMatrix& a,
                                    const Eigen::MatrixXd& weight, int horizon,
                                    int err_horizon) {
    check_oracle_inputs(sys, a, horizon);
    if (err_horizon < 0) err_horizon = horizon;
    const bool unit_weight = weight.size() == 0;
    if (!unit_weight && (weight.rows() != sys.n() || weight.cols() != sys.n()))
        throw std::invalid_argument("structured_ls_oracle: weight must be n x n");

    const DelayMatrix delays = delay_matrix(a);
    const MarkovData md = markov_estimation(sys, err_horizon);
    const Eigen::MatrixXd& WR = sys.noise_cov;

    // WR hy(tau)^T, reused across the Gram and rhs sums.
    std::vector<Eigen::MatrixXd> wr_hyT;
    wr_hyT.reserve(md.hy.size());
    for (const auto& h : md.hy) wr_hyT.push_back(WR * h.transpose());

    // Gr[s][s'] = sum_k hy(k-1-s) WR hy(k-1-s')^T; terms with negative index vanish.
    std::vector<std::vector<Eigen::MatrixXd>> Gr(
        static_cast<std::size_t>(horizon),
        std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(horizon)));
    for (int s = 0; s < horizon; ++s)
        for (int sp = s; sp < horizon; ++sp) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(sys.p(), sys.p());
            for (int k = std::max(s, sp) + 1; k <= err_horizon; ++k)
                acc += md.hy[static_cast<std::size_t>(k - 1 - s)] *
                       wr_hyT[static_cast<std::size_t>(k - 1 - sp)];
            Gr[static_cast<std::size_t>(s)][static_cast<std::size_t>(sp)] = acc;
            if (sp != s)
                Gr[static_cast<std::size_t>(sp)][static_cast<std::size_t>(s)] = acc.transpose();
        }

    // B0[s] = sum_k hx(k) WR hy(k-1-s)^T.
    std::vector<Eigen::MatrixXd> B0(static_cast<std::size_t>(horizon));
    for (int s = 0; s < horizon; ++s) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(sys.n(), sys.p());
        for (int k = s + 1; k <= err_horizon; ++k)
            acc += md.hx[static_cast<std::size_t>(k)] * wr_hyT[static_cast<std::size_t>(k - 1 - s)];
        B0[static_cast<std::size_t>(s)] = acc;
    }

    const std::vector<int> row_node = rows_to_nodes(sys.n_i);
    const std::vector<int> col_node = rows_to_nodes(sys.p_i);

    OracleSolution sol{MatrixSeries::zero(std::max(0, horizon - 1), sys.n_i, sys.p_i, a)};
    std::vector<Eigen::MatrixXd> coeffs(static_cast<std::size_t>(horizon),
                                        Eigen::MatrixXd::Zero(sys.n(), sys.p()));
    double res2 = 0.0, rhs2 = 0.0;
    double gap_min = std::numeric_limits<double>::infinity();
    bool any_unknowns = false;

    if (unit_weight) {
        // The row weight is identity, so the normal equations decouple per state row.
        sol.node_costs.assign(static_cast<std::size_t>(sys.N), 0.0);
        for (int r = 0; r < sys.n(); ++r) {
            const int i = row_node[static_cast<std::size_t>(r)];
            std::vector<std::pair<int, int>> free_sc;
            for (int s = 0; s < horizon; ++s)
                for (int c = 0; c < sys.p(); ++c) {
                    const int d = delays(i, col_node[static_cast<std::size_t>(c)]);
                    if (d >= 0 && d <= s) free_sc.emplace_back(s, c);
                }
            double c0 = 0.0;
            for (int k = 1; k <= err_horizon; ++k) {
                const auto row = md.hx[static_cast<std::size_t>(k)].row(r);
                c0 += row * WR * row.transpose();
            }
            const auto u = static_cast<Eigen::Index>(free_sc.size());
            Eigen::MatrixXd M(u, u);
            Eigen::VectorXd b(u);
            for (Eigen::Index x = 0; x < u; ++x) {
                b(x) = B0[static_cast<std::size_t>(free_sc[static_cast<std::size_t>(x)].first)](
                    r, free_sc[static_cast<std::size_t>(x)].second);
                for (Eigen::Index y = 0; y < u; ++y)
                    M(x, y) = Gr[static_cast<std::size_t>(
                        free_sc[static_cast<std::size_t>(x)].first)][static_cast<std::size_t>(
                        free_sc[static_cast<std::size_t>(y)].first)](
                        free_sc[static_cast<std::size_t>(x)].second,
                        free_sc[static_cast<std::size_t>(y)].second);
            }
            const NormalSolve ns = solve_normal(M, b);
            for (Eigen::Index x = 0; x < u; ++x)
                coeffs[static_cast<std::size_t>(free_sc[static_cast<std::size_t>(x)].first)](
                    r, free_sc[static_cast<std::size_t>(x)].second) = ns.v(x);
            const double row_cost = c0 + ns.cost_term;
            sol.cost += row_cost;
            sol.node_costs[static_cast<std::size_t>(i)] += row_cost;
            res2 += ns.res2;
            rhs2 += ns.rhs2;
            if (u > 0) {
                any_unknowns = true;
                gap_min = std::min(gap_min, ns.eig_max > 0.0 ? ns.eig_min / ns.eig_max : 0.0);
            }
        }
    } else {
        // Joint solve; the row weight couples state rows across nodes.
        struct Key { int s, r, c; };
        std::vector<Key> keys;
        for (int s = 0; s < horizon; ++s)
            for (int r = 0; r < sys.n(); ++r)
                for (int c = 0; c < sys.p(); ++c) {
                    const int d = delays(row_node[static_cast<std::size_t>(r)],
                                         col_node[static_cast<std::size_t>(c)]);
                    if (d >= 0 && d <= s) keys.push_back({s, r, c});
                }
        const auto u = static_cast<Eigen::Index>(keys.size());
        Eigen::MatrixXd M(u, u);
        Eigen::VectorXd b(u);
        std::vector<Eigen::MatrixXd> WB0;
        WB0.reserve(B0.size());
        for (const auto& m : B0) WB0.push_back(weight * m);
        for (Eigen::Index x = 0; x < u; ++x) {
            b(x) = WB0[static_cast<std::size_t>(keys[static_cast<std::size_t>(x)].s)](
                keys[static_cast<std::size_t>(x)].r, keys[static_cast<std::size_t>(x)].c);
            for (Eigen::Index y = 0; y < u; ++y) {
                const Key& kx = keys[static_cast<std::size_t>(x)];
                const Key& ky = keys[static_cast<std::size_t>(y)];
                M(x, y) = weight(kx.r, ky.r) *
                          Gr[static_cast<std::size_t>(kx.s)][static_cast<std::size_t>(ky.s)](kx.c, ky.c);
            }
        }
        double c0 = 0.0;
        for (int k = 1; k <= err_horizon; ++k) {
            const Eigen::MatrixXd& hx = md.hx[static_cast<std::size_t>(k)];
            c0 += ((weight * hx * WR).cwiseProduct(hx)).sum();
        }
        const NormalSolve ns = solve_normal(M, b);
        for (Eigen::Index x = 0; x < u; ++x)
            coeffs[static_cast<std::size_t>(keys[static_cast<std::size_t>(x)].s)](
                keys[static_cast<std::size_t>(x)].r, keys[static_cast<std::size_t>(x)].c) = ns.v(x);
        sol.cost = c0 + ns.cost_term;
        res2 = ns.res2;
        rhs2 = ns.rhs2;
        if (u > 0) {
            any_unknowns = true;
            gap_min = ns.eig_max > 0.0 ? ns.eig_min / ns.eig_max : 0.0;
        }
    }

    sol.coefficients = MatrixSeries(std::move(coeffs), sys.n_i, sys.p_i, a);
    sol.residual = std::sqrt(res2) / std::max(1.0, std::sqrt(rhs2));
    sol.condition_gap = any_unknowns ? gap_min : 0.0;
    sol.ill_conditioned = any_unknowns && gap_min < kConditionGapFloor;
    return sol;
}

OracleSolution feedforward_ls_oracle(const BlockSystem& sys, const AdjacencyMatrix& a,
                                     const Eigen::MatrixXd& noise_weight, int horizon,
                                     int err_horizon) {
    check_oracle_inputs(sys, a, horizon);
    if (err_horizon < 0) err_horizon = horizon;
    const bool unit_noise = noise_weight.size() == 0;
    if (!unit_noise && (noise_weight.rows() != sys.n() || noise_weight.cols() != sys.n()))
        throw std::invalid_argument("feedforward_ls_oracle: noise weight must be n x n");
    const Eigen::MatrixXd Wn =
        unit_noise ? Eigen::MatrixXd::Identity(sys.n(), sys.n()).eval() : noise_weight;

    const DelayMatrix delays = delay_matrix(a);
    const FeedforwardData fd = markov_feedforward(sys, err_horizon);

    // GrU[t][t'] = sum_k hzu(k-1-t)^T hzu(k-1-t').
    std::vector<std::vector<Eigen::MatrixXd>> GrU(
        static_cast<std::size_t>(horizon),
        std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(horizon)));
    for (int t = 0; t < horizon; ++t)
        for (int tp = t; tp < horizon; ++tp) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(sys.m(), sys.m());
            for (int k = std::max(t, tp) + 1; k <= err_horizon; ++k)
                acc += fd.hzu[static_cast<std::size_t>(k - 1 - t)].transpose() *
                       fd.hzu[static_cast<std::size_t>(k - 1 - tp)];
            GrU[static_cast<std::size_t>(t)][static_cast<std::size_t>(tp)] = acc;
            if (tp != t)
                GrU[static_cast<std::size_t>(tp)][static_cast<std::size_t>(t)] = acc.transpose();
        }

    // B0[t] = sum_k hzu(k-1-t)^T hzw(k) Wn.
    std::vector<Eigen::MatrixXd> B0(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(sys.m(), sys.n());
        for (int k = t + 1; k <= err_horizon; ++k)
            acc += fd.hzu[static_cast<std::size_t>(k - 1 - t)].transpose() *
                   fd.hzw[static_cast<std::size_t>(k)];
        B0[static_cast<std::size_t>(t)] = acc * Wn;
    }

    double c0 = 0.0;
    for (int k = 1; k <= err_horizon; ++k) {
        const Eigen::MatrixXd& hzw = fd.hzw[static_cast<std::size_t>(k)];
        c0 += ((hzw * Wn).cwiseProduct(hzw)).sum();
    }

    const std::vector<int> row_node = rows_to_nodes(sys.m_i);  // rows of g index inputs
    const std::vector<int> col_node = rows_to_nodes(sys.n_i);  // cols index disturbances

    OracleSolution sol{MatrixSeries::zero(std::max(0, horizon - 1), sys.m_i, sys.n_i, a)};
    std::vector<Eigen::MatrixXd> coeffs(static_cast<std::size_t>(horizon),
                                        Eigen::MatrixXd::Zero(sys.m(), sys.n()));
    struct Key { int t, r, c; };
    std::vector<Key> keys;
    for (int t = 0; t < horizon; ++t)
        for (int r = 0; r < sys.m(); ++r)
            for (int c = 0; c < sys.n(); ++c) {
                const int d = delays(row_node[static_cast<std::size_t>(r)],
                                     col_node[static_cast<std::size_t>(c)]);
                if (d >= 0 && d <= t) keys.push_back({t, r, c});
            }
    const auto u = static_cast<Eigen::Index>(keys.size());
    Eigen::MatrixXd M(u, u);
    Eigen::VectorXd b(u);
    for (Eigen::Index x = 0; x < u; ++x) {
        const Key& kx = keys[static_cast<std::size_t>(x)];
        b(x) = B0[static_cast<std::size_t>(kx.t)](kx.r, kx.c);
        for (Eigen::Index y = 0; y < u; ++y) {
            const Key& ky = keys[static_cast<std::size_t>(y)];
            M(x, y) = GrU[static_cast<std::size_t>(kx.t)][static_cast<std::size_t>(ky.t)](kx.r, ky.r) *
                      Wn(kx.c, ky.c);
        }
    }
    const NormalSolve ns = solve_normal(M, b);
    for (Eigen::Index x = 0; x < u; ++x)
        coeffs[static_cast<std::size_t>(keys[static_cast<std::size_t>(x)].t)](
            keys[static_cast<std::size_t>(x)].r, keys[static_cast<std::size_t>(x)].c) = ns.v(x);

    sol.coefficients = MatrixSeries(std::move(coeffs), sys.m_i, sys.n_i, a);
    sol.cost = c0 + ns.cost_term;
    sol.residual = std::sqrt(ns.res2) / std::max(1.0, std::sqrt(ns.rhs2));
    if (u > 0) {
        sol.condition_gap = ns.eig_max > 0.0 ? ns.eig_min / ns.eig_max : 0.0;
        sol.ill_conditioned = sol.condition_gap < kConditionGapFloor;
    }
    return sol;
}

double fir_estimation_cost(const BlockSystem& sys, const MatrixSeries& l,
                           int err_horizon, const Eigen::MatrixXd& weight) {
    if (l.rows() != sys.n() || l.cols() != sys.p())
        throw std::invalid_argument("fir_estimation_cost: series must be n x p");
    if (err_horizon < 1) throw std::invalid_argument("fir_estimation_cost: horizon must be >= 1");
    const MarkovData md = markov_estimation(sys, err_horizon);
    double cost = 0.0;
    for (int k = 1; k <= err_horizon; ++k) {
        Eigen::MatrixXd e = md.hx[static_cast<std::size_t>(k)];
        for (int s = 0; s <= std::min(k - 1, l.horizon()); ++s)
            e -= l.coeff(s) * md.hy[static_cast<std::size_t>(k - 1 - s)];
        const Eigen::MatrixXd we = weight.size() == 0 ? e : (weight * e).eval();
        cost += ((we * sys.noise_cov).cwiseProduct(e)).sum();
    }
    return cost;
}

double fir_feedforward_cost(const BlockSystem& sys, const MatrixSeries& g,
                            int err_horizon, const Eigen::MatrixXd& noise_weight) {
    if (g.rows() != sys.m() || g.cols() != sys.n())
        throw std::invalid_argument("fir_feedforward_cost: series must be m x n");
    if (err_horizon < 1) throw std::invalid_argument("fir_feedforward_cost: horizon must be >= 1");
    const FeedforwardData fd = markov_feedforward(sys, err_horizon);
    double cost = 0.0;
    for (int k = 1; k <= err_horizon; ++k) {
        Eigen::MatrixXd e = fd.hzw[static_cast<std::size_t>(k)];
        for (int t = 0; t <= std::min(k - 1, g.horizon()); ++t)
            e -= fd.hzu[static_cast<std::size_t>(k - 1 - t)] * g.coeff(t);
        const Eigen::MatrixXd ew = noise_weight.size() == 0 ? e : (e * noise_weight).eval();
        cost += (ew.cwiseProduct(e)).sum();
    }
    return cost;
}

SimReport simulate_estimator(const LiftedSystem& lifted,
                             const std::vector<FilterRealization>& filters,
                             int horizon, int trials, std::uint64_t seed) {
    const BlockSystem& base = lifted.base;
    if (static_cast<int>(filters.size()) != base.N)
        throw std::invalid_argument("simulate_estimator: one filter per node required");
    if (horizon < 2 || trials < 1)
        throw std::invalid_argument("simulate_estimator: need horizon >= 2 and trials >= 1");

    SimReport rep;
    rep.trials = trials;
    rep.horizon = horizon;
    rep.seed = seed;
    rep.node_cost.assign(static_cast<std::size_t>(base.N), 0.0);

    const Eigen::MatrixXd Lw = cholesky_factor(base.noise_cov);
    const int burn = horizon / 2;
    const int recorded = horizon - burn;
    std::vector<Eigen::MatrixXd> gammas;
    for (int i = 0; i < base.N; ++i) gammas.push_back(lifted.selector(i));

    std::vector<std::vector<double>> trial_node(
        static_cast<std::size_t>(trials),
        std::vector<double>(static_cast<std::size_t>(base.N), 0.0));
    std::vector<char> trial_diverged(static_cast<std::size_t>(trials), 0);

    run_trials(trials, [&](int r) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r));
        Eigen::VectorXd xe = Eigen::VectorXd::Zero(lifted.ne);
        std::vector<Eigen::VectorXd> xhat(static_cast<std::size_t>(base.N),
                                          Eigen::VectorXd::Zero(lifted.ne));
        auto& node_acc = trial_node[static_cast<std::size_t>(r)];
        for (int t = 0; t < horizon; ++t) {
            if (t >= burn) {
                for (int i = 0; i < base.N; ++i) {
                    const Eigen::VectorXd err =
                        xe.segment(base.n_off(i), base.n_i[static_cast<std::size_t>(i)]) -
                        gammas[static_cast<std::size_t>(i)] * xhat[static_cast<std::size_t>(i)];
                    const double e2 = err.squaredNorm();
                    if (!std::isfinite(e2) || e2 > 1e18) {
                        trial_diverged[static_cast<std::size_t>(r)] = 1;
                        return;
                    }
                    node_acc[static_cast<std::size_t>(i)] += e2;
                }
            }
            Eigen::VectorXd gauss(base.n_w());
            for (int q = 0; q < base.n_w(); ++q) gauss(q) = rng.next_gaussian();
            const Eigen::VectorXd w = Lw * gauss;
            for (int i = 0; i < base.N; ++i) {
                const auto& Ei = lifted.E[static_cast<std::size_t>(i)];
                const Eigen::VectorXd ye =
                    Ei * xe + lifted.Dei[static_cast<std::size_t>(i)] * w;
                auto& xh = xhat[static_cast<std::size_t>(i)];
                xh = lifted.Ae * xh +
                     filters[static_cast<std::size_t>(i)].G_in * (ye - Ei * xh);
            }
            xe = lifted.Ae * xe + lifted.Be * w;
        }
    });

    std::vector<double> trial_totals;
    trial_totals.reserve(static_cast<std::size_t>(trials));
    for (int r = 0; r < trials; ++r) {
        if (trial_diverged[static_cast<std::size_t>(r)]) {
            rep.diverged = true;
            break;
        }
        double tot = 0.0;
        for (int i = 0; i < base.N; ++i) {
            rep.node_cost[static_cast<std::size_t>(i)] +=
                trial_node[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
            tot += trial_node[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
        }
        trial_totals.push_back(tot / recorded);
    }

    if (!rep.diverged) {
        for (auto& c : rep.node_cost) c /= static_cast<double>(trials) * recorded;
        rep.total_cost = std::accumulate(rep.node_cost.begin(), rep.node_cost.end(), 0.0);
        double var = 0.0;
        for (const double t : trial_totals) var += (t - rep.total_cost) * (t - rep.total_cost);
        if (trials > 1)
            rep.total_stderr = std::sqrt(var / (trials - 1)) / std::sqrt(double(trials));
    }
    return rep;
}

WhitenessReport innovation_whiteness(const LiftedSystem& lifted,
                                     const std::vector<FilterRealization>& filters,
                                     int horizon, int trials, std::uint64_t seed,
                                     int max_lag) {
    const BlockSystem& base = lifted.base;
    if (static_cast<int>(filters.size()) != base.N)
        throw std::invalid_argument("innovation_whiteness: one filter per node required");
    const int burn = horizon / 2;
    const int recorded = horizon - burn;
    if (max_lag < 1 || recorded <= max_lag + 1)
        throw std::invalid_argument("innovation_whiteness: horizon too short for the lags");

    const Eigen::MatrixXd Lw = cholesky_factor(base.noise_cov);
    int total_comp = 0;
    for (int i = 0; i < base.N; ++i)
        total_comp += static_cast<int>(lifted.E[static_cast<std::size_t>(i)].rows());

    // Per component: zero-lag power and per-lag cross sums, pooled over trials.
    Eigen::VectorXd pow0 = Eigen::VectorXd::Zero(total_comp);
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(total_comp, max_lag);
    std::int64_t count0 = 0;
    std::vector<std::int64_t> countl(static_cast<std::size_t>(max_lag), 0);

    Eigen::MatrixXd hist(total_comp, recorded);
    for (int r = 0; r < trials; ++r) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r));
        Eigen::VectorXd xe = Eigen::VectorXd::Zero(lifted.ne);
        std::vector<Eigen::VectorXd> xhat(static_cast<std::size_t>(base.N),
                                          Eigen::VectorXd::Zero(lifted.ne));
        for (int t = 0; t < horizon; ++t) {
            Eigen::VectorXd gauss(base.n_w());
            for (int q = 0; q < base.n_w(); ++q) gauss(q) = rng.next_gaussian();
            const Eigen::VectorXd w = Lw * gauss;
            int row0 = 0;
            for (int i = 0; i < base.N; ++i) {
                const auto& Ei = lifted.E[static_cast<std::size_t>(i)];
                const Eigen::VectorXd ye =
                    Ei * xe + lifted.Dei[static_cast<std::size_t>(i)] * w;
                auto& xh = xhat[static_cast<std::size_t>(i)];
                const Eigen::VectorXd innov = ye - Ei * xh;
                if (t >= burn) hist.block(row0, t - burn, innov.size(), 1) = innov;
                row0 += static_cast<int>(innov.size());
                xh = lifted.Ae * xh + filters[static_cast<std::size_t>(i)].G_in * innov;
            }
            xe = lifted.Ae * xe + lifted.Be * w;
        }
        pow0 += hist.cwiseProduct(hist).rowwise().sum();
        count0 += recorded;
        for (int lag = 1; lag <= max_lag; ++lag) {
            cross.col(lag - 1) +=
                (hist.leftCols(recorded - lag).cwiseProduct(hist.rightCols(recorded - lag)))
                    .rowwise()
                    .sum();
            countl[static_cast<std::size_t>(lag - 1)] += recorded - lag;
        }
    }

    WhitenessReport rep;
    const double var_floor = 1e-12 * (pow0.maxCoeff() / count0);
    rep.samples = static_cast<int>(countl[0]);
    rep.pass = true;
    for (int lag = 1; lag <= max_lag; ++lag) {
        const auto n = static_cast<double>(countl[static_cast<std::size_t>(lag - 1)]);
        double worst = 0.0;
        for (int c = 0; c < total_comp; ++c) {
            const double v0 = pow0(c) / count0;
            if (v0 <= var_floor) continue;  // exactly reconstructed rows carry no innovation
            worst = std::max(worst, std::abs((cross(c, lag - 1) / n) / v0));
        }
        rep.max_abs_corr.push_back(worst);
        rep.threshold.push_back(4.0 / std::sqrt(n));
        if (worst > rep.threshold.back()) rep.pass = false;
    }
    return rep;
}

ClosedLoopReport simulate_closed_loop(const BlockSystem& sys,
                                      const ControllerRealization* ctrl,
                                      int horizon, int trials, std::uint64_t seed,
                                      const Eigen::MatrixXd& cov) {
    if (horizon < 2 || trials < 1)
        throw std::invalid_argument("simulate_closed_loop: need horizon >= 2 and trials >= 1");
    const Eigen::MatrixXd Wn =
        cov.size() == 0 ? Eigen::MatrixXd::Identity(sys.n(), sys.n()).eval() : cov;
    if (Wn.rows() != sys.n() || Wn.cols() != sys.n())
        throw std::invalid_argument("simulate_closed_loop: cov must be n x n");
    const Eigen::MatrixXd Lw = cholesky_factor(Wn);

    std::vector<int> w_off{0}, u_off{0};
    if (ctrl) {
        if (std::accumulate(ctrl->w_dims.begin(), ctrl->w_dims.end(), 0) != sys.n() ||
            std::accumulate(ctrl->u_dims.begin(), ctrl->u_dims.end(), 0) != sys.m())
            throw std::invalid_argument("simulate_closed_loop: controller does not fit the plant");
        for (const int d : ctrl->w_dims) w_off.push_back(w_off.back() + d);
        for (const int d : ctrl->u_dims) u_off.push_back(u_off.back() + d);
    }
    const int ring = ctrl ? std::max(ctrl->memory, 1) : 1;

    ClosedLoopReport rep;
    rep.trials = trials;
    rep.horizon = horizon;
    rep.seed = seed;
    const int burn = horizon / 2;
    const int recorded = horizon - burn;
    const Eigen::MatrixXd C = sys.C();
    const Eigen::MatrixXd B = sys.B();
    std::vector<double> trial_means(static_cast<std::size_t>(trials), 0.0);
    std::vector<char> trial_diverged(static_cast<std::size_t>(trials), 0);

    run_trials(trials, [&](int r) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r));
        Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n());
        std::vector<Eigen::VectorXd> zstate;
        if (ctrl)
            for (const auto& node : ctrl->nodes)
                zstate.push_back(Eigen::VectorXd::Zero(node.Ad.rows()));
        std::vector<Eigen::VectorXd> pending(static_cast<std::size_t>(ring),
                                             Eigen::VectorXd::Zero(sys.m()));
        double acc = 0.0;
        for (int t = 0; t < horizon; ++t) {
            if (ctrl) {
                for (std::size_t ni = 0; ni < ctrl->nodes.size(); ++ni) {
                    const ControllerNode& c = ctrl->nodes[ni];
                    const Eigen::VectorXd raw = c.Out * zstate[ni];
                    int row0 = 0;
                    for (std::size_t pr = 0; pr < c.pairs.size(); ++pr) {
                        const int j = c.pairs[pr].first;
                        const int k = c.pairs[pr].second;
                        pending[static_cast<std::size_t>((t + k - 1) % ring)]
                            .segment(u_off[static_cast<std::size_t>(j)], c.pair_rows[pr]) +=
                            raw.segment(row0, c.pair_rows[pr]);
                        row0 += c.pair_rows[pr];
                    }
                }
            }
            const Eigen::VectorXd u = pending[static_cast<std::size_t>(t % ring)];
            pending[static_cast<std::size_t>(t % ring)].setZero();
            const Eigen::VectorXd z = C * x + sys.D * u;
            if (t >= burn) {
                const double z2 = z.squaredNorm();
                if (!std::isfinite(z2) || z2 > 1e18) {
                    trial_diverged[static_cast<std::size_t>(r)] = 1;
                    return;
                }
                acc += z2;
            }
            Eigen::VectorXd gauss(sys.n());
            for (int q = 0; q < sys.n(); ++q) gauss(q) = rng.next_gaussian();
            const Eigen::VectorXd w = Lw * gauss;
            x = sys.A * x + B * u + w;
            if (ctrl)
                for (std::size_t ni = 0; ni < ctrl->nodes.size(); ++ni) {
                    const ControllerNode& c = ctrl->nodes[ni];
                    zstate[ni] = c.Ad * zstate[ni] +
                                 c.In * w.segment(w_off[static_cast<std::size_t>(c.node)],
                                                  ctrl->w_dims[static_cast<std::size_t>(c.node)]);
                }
        }
        trial_means[static_cast<std::size_t>(r)] = acc / recorded;
    });

    for (const char d : trial_diverged)
        if (d) rep.diverged = true;
    if (!rep.diverged) {
        rep.cost = std::accumulate(trial_means.begin(), trial_means.end(), 0.0) / trials;
        double var = 0.0;
        for (const double t : trial_means) var += (t - rep.cost) * (t - rep.cost);
        if (trials > 1)
            rep.cost_stderr = std::sqrt(var / (trials - 1)) / std::sqrt(double(trials));
    }
    return rep;
}

}  // namespace graphlq

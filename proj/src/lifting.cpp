#include "graphlq/lifting.hpp"

#include <stdexcept>

namespace graphlq {

namespace {

// Shape consistency only: rank-deficient B or C blocks are allowed through the
// lift, because synthesis on such systems is well defined (singular innovation
// covariances are handled by the pseudo-inverse). Full diagnostics, including
// the rank conditions, live in validate().
void check_shapes(const BlockSystem& sys) {
    const auto nodes = static_cast<std::size_t>(sys.N);
    bool ok = sys.N >= 1 && sys.n_i.size() == nodes && sys.m_i.size() == nodes &&
              sys.p_i.size() == nodes && sys.B_blocks.size() == nodes &&
              sys.C_blocks.size() == nodes;
    for (std::size_t i = 0; ok && i < nodes; ++i)
        ok = sys.n_i[i] >= 1 && sys.m_i[i] >= 1 && sys.p_i[i] >= 1 &&
             sys.B_blocks[i].rows() == sys.n_i[i] && sys.B_blocks[i].cols() == sys.m_i[i] &&
             sys.C_blocks[i].rows() == sys.p_i[i] && sys.C_blocks[i].cols() == sys.n_i[i];
    if (ok) {
        const int n = sys.n(), p = sys.p(), nw = sys.n_w();
        ok = sys.A.rows() == n && sys.A.cols() == n && sys.D.rows() == p &&
             sys.D.cols() == nw && sys.noise_cov.rows() == nw && sys.noise_cov.cols() == nw;
    }
    if (!ok) throw std::invalid_argument("lift: system dimensions are inconsistent");
}

}  // namespace

LiftedSystem lift(const BlockSystem& sys, int memory) {
    check_shapes(sys);

    LiftedSystem L;
    L.base = sys;
    L.graph = adjacency_of(sys);
    L.delays = delay_matrix(L.graph);
    L.M = memory < 0 ? sys.N : memory;
    if (L.M < 1) throw std::invalid_argument("lift: memory must be >= 1");
    int max_delay = 0;
    for (int i = 0; i < sys.N; ++i)
        for (int j = 0; j < sys.N; ++j)
            if (L.delays(i, j) != unreachable && L.delays(i, j) > max_delay)
                max_delay = L.delays(i, j);
    if (L.M < max_delay + 1)
        throw std::invalid_argument("lift: memory " + std::to_string(L.M) +
                                    " cannot represent delay " + std::to_string(max_delay));

    const int n = sys.n(), p = sys.p(), nw = sys.n_w();
    L.ne = n + L.M * p;

    // A_e rows: plant dynamics, then C feeding register 1, then the register shifts.
    L.Ae = Eigen::MatrixXd::Zero(L.ne, L.ne);
    L.Ae.topLeftCorner(n, n) = sys.A;
    L.Ae.block(n, 0, p, n) = sys.C();
    for (int r = 2; r <= L.M; ++r)
        L.Ae.block(n + (r - 1) * p, n + (r - 2) * p, p, p) = Eigen::MatrixXd::Identity(p, p);

    L.Be = Eigen::MatrixXd::Zero(L.ne, nw);
    L.Be.topRows(n) = sys.B();
    L.Be.block(n, 0, p, nw) = sys.D;

    for (int i = 0; i < sys.N; ++i) {
        std::vector<std::pair<int, int>> pr;
        for (int j = 0; j < sys.N; ++j) {
            if (L.delays(i, j) == unreachable) continue;
            for (int k = 1; k <= L.M; ++k)
                if (k - 1 >= L.delays(i, j)) pr.emplace_back(j, k);
        }
        int rows = 0;
        for (const auto& [j, k] : pr) rows += sys.p_i[static_cast<std::size_t>(j)];
        Eigen::MatrixXd Ei = Eigen::MatrixXd::Zero(rows, L.ne);
        Eigen::MatrixXd Di = Eigen::MatrixXd::Zero(rows, nw);
        int row = 0;
        for (const auto& [j, k] : pr) {
            const int pj = sys.p_i[static_cast<std::size_t>(j)];
            if (k == 1) {
                // Own current output: C_jj on x_j with the direct noise row of D.
                Ei.block(row, sys.n_off(j), pj, sys.n_i[static_cast<std::size_t>(j)]) =
                    sys.C_blocks[static_cast<std::size_t>(j)];
                Di.block(row, 0, pj, nw) = sys.D.block(sys.p_off(j), 0, pj, nw);
            } else {
                // Register k-1 holds y(t+1-k); pick block j.
                Ei.block(row, n + (k - 2) * p + sys.p_off(j), pj, pj) =
                    Eigen::MatrixXd::Identity(pj, pj);
            }
            row += pj;
        }
        L.pairs.push_back(std::move(pr));
        L.E.push_back(std::move(Ei));
        L.Dei.push_back(std::move(Di));
    }

    for (int j = 0; j < sys.N; ++j)
        L.layout.push_back({"x." + std::to_string(j + 1), sys.n_off(j),
                            sys.n_i[static_cast<std::size_t>(j)]});
    for (int k = 1; k <= L.M; ++k)
        for (int j = 0; j < sys.N; ++j)
            L.layout.push_back({"y." + std::to_string(j + 1) + ".lag." + std::to_string(k),
                                n + (k - 1) * p + sys.p_off(j),
                                sys.p_i[static_cast<std::size_t>(j)]});
    return L;
}

Eigen::MatrixXd LiftedSystem::selector(int i) const {
    const int ni = base.n_i.at(static_cast<std::size_t>(i));
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(ni, ne);
    g.block(0, base.n_off(i), ni, ni) = Eigen::MatrixXd::Identity(ni, ni);
    return g;
}

std::vector<int> LiftedSystem::pair_row_offsets(int i) const {
    const auto& pr = pairs.at(static_cast<std::size_t>(i));
    std::vector<int> off;
    off.reserve(pr.size() + 1);
    int row = 0;
    for (const auto& [j, k] : pr) {
        off.push_back(row);
        row += base.p_i[static_cast<std::size_t>(j)];
    }
    off.push_back(row);
    return off;
}

std::pair<const Eigen::MatrixXd&, const Eigen::MatrixXd&> measurement_map(
    const LiftedSystem& lifted, int i) {
    return {lifted.E.at(static_cast<std::size_t>(i)), lifted.Dei.at(static_cast<std::size_t>(i))};
}

}  // namespace graphlq

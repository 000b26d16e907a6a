// graphlq: distributed estimator/controller synthesis over directed graphs.
//
// Subcommands: validate, synthesize, verify, simulate. Exit codes: 0 ok,
// 1 validation or suite failure, 2 parse error, 3 numerical non-convergence.
// GRAPHLQ_THREADS caps the Monte-Carlo worker count (reports do not depend
// on it); no other environment is consulted.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphlq/duality.hpp"
#include "graphlq/graphnet.hpp"
#include "graphlq/kalman.hpp"
#include "graphlq/lifting.hpp"
#include "graphlq/linalg.hpp"
#include "graphlq/rng.hpp"
#include "graphlq/series.hpp"
#include "graphlq/simkit.hpp"
#include "graphlq/sysfile.hpp"
#include "graphlq/sysmodel.hpp"
#include "graphlq/team.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace graphlq;

json to_json_matrix(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd from_json_matrix(const json& v, const std::string& what) {
    if (!v.is_array() || v.empty() || !v.front().is_array())
        throw ParseError(what + ": expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto cols = static_cast<Eigen::Index>(v.front().size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = v[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ParseError(what + ": ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_json(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << doc.dump(2) << '\n';
}

struct SynthesisRun {
    LiftedSystem lifted;
    std::vector<FilterRealization> filters;
    std::vector<CovarianceReport> covs;
    bool converged = true;
    bool stable = true;
};

SynthesisRun synthesize_filters(const BlockSystem& sys, const RunOptions& opt) {
    SynthesisRun run{lift(sys, opt.memory), {}, {}};
    RiccatiOptions ro;
    ro.tol = opt.riccati_tol;
    ro.max_iter = opt.riccati_max_iter;
    for (int i = 0; i < sys.N; ++i) {
        run.filters.push_back(synthesize_node_filter(run.lifted, i, ro));
        run.covs.push_back(filter_error_covariance(run.filters.back(), run.lifted, i));
        run.converged = run.converged && run.filters.back().riccati.converged;
        run.stable = run.stable && run.covs.back().stable;
    }
    return run;
}

json per_node_summary(const SynthesisRun& run) {
    json nodes = json::array();
    for (std::size_t i = 0; i < run.filters.size(); ++i) {
        const auto& f = run.filters[i];
        const auto& c = run.covs[i];
        json e;
        e["node"] = f.node + 1;
        e["iterations"] = f.riccati.iterations;
        e["residual"] = f.riccati.residual;
        e["converged"] = f.riccati.converged;
        e["spectral_radius"] = f.spectral_radius;
        e["stable"] = c.stable;
        if (c.stable) e["cost"] = c.cost; else e["cost"] = nullptr;
        nodes.push_back(std::move(e));
    }
    return nodes;
}

int run_validate(const std::string& path) {
    load_system_file(path);
    std::cout << "ok\n";
    return 0;
}

int run_synthesize(const std::string& path, const std::string& mode, const std::string& out,
                   std::optional<std::uint64_t> seed_flag) {
    SystemDescription desc = load_system_file(path);
    if (seed_flag) desc.options.seed = *seed_flag;
    fs::create_directories(out);

    const AdjacencyMatrix graph = adjacency_of(desc.system);
    write_int_matrix_csv((fs::path(out) / "adjacency.csv").string(), graph);
    write_delay_csv((fs::path(out) / "delays.csv").string(), delay_matrix(graph));

    json manifest;
    manifest["kind"] = "synthesize";
    manifest["format_version"] = 1;
    manifest["mode"] = mode;
    manifest["system"] = path;
    manifest["N"] = desc.system.N;
    manifest["horizon"] = desc.options.horizon;
    manifest["seed"] = desc.options.seed;
    manifest["trials"] = desc.options.trials;
    manifest["riccati_tol"] = desc.options.riccati_tol;
    manifest["riccati_max_iter"] = desc.options.riccati_max_iter;
    manifest["stationary_tol"] = desc.options.stationary_tol;

    if (mode == "estimator" || mode == "controller") {
        const bool dual_side = mode == "controller";
        const BlockSystem work = dual_side ? dualize(desc.system) : desc.system;
        SynthesisRun run = synthesize_filters(work, desc.options);
        manifest["memory"] = run.lifted.M;
        manifest["per_node"] = per_node_summary(run);
        double total = 0.0;
        bool have_total = true;
        for (const auto& c : run.covs) {
            if (!c.stable) have_total = false;
            else total += c.cost;
        }
        if (have_total) manifest["total_cost"] = total; else manifest["total_cost"] = nullptr;

        std::vector<std::string> artifacts;
        if (dual_side) {
            const ControllerRealization ctrl = dual_estimator_to_controller(run.filters, run.lifted);
            for (const auto& node : ctrl.nodes) {
                json cj;
                cj["node"] = node.node + 1;
                cj["Ad"] = to_json_matrix(node.Ad);
                cj["In"] = to_json_matrix(node.In);
                cj["Out"] = to_json_matrix(node.Out);
                json prs = json::array();
                for (const auto& [j, k] : node.pairs) prs.push_back(json::array({j + 1, k}));
                cj["pairs"] = prs;
                cj["pair_rows"] = node.pair_rows;
                const std::string name = "controller_" + std::to_string(node.node + 1) + ".json";
                write_json((fs::path(out) / name).string(), cj);
                artifacts.push_back(name);
            }
            write_series(out, "feedforward", ctrl.feedforward_series(desc.options.horizon));
            manifest["series"] = json::array({"feedforward"});
        } else {
            for (std::size_t i = 0; i < run.filters.size(); ++i) {
                const auto& f = run.filters[i];
                json fj;
                fj["node"] = f.node + 1;
                fj["F"] = to_json_matrix(f.F);
                fj["K"] = to_json_matrix(f.G_in);
                fj["H"] = to_json_matrix(f.H);
                fj["spectral_radius"] = f.spectral_radius;
                const std::string name = "filter_" + std::to_string(f.node + 1) + ".json";
                write_json((fs::path(out) / name).string(), fj);
                artifacts.push_back(name);
            }
            write_series(out, "estimator",
                         assemble_estimator(run.filters, run.lifted, desc.options.horizon));
            manifest["series"] = json::array({"estimator"});
        }
        manifest["artifacts"] = artifacts;
        manifest["converged"] = run.converged;
        manifest["stable"] = run.stable;
        write_json((fs::path(out) / "manifest.json").string(), manifest);
        if (!run.converged || !run.stable) {
            std::cerr << "synthesis did not converge to a stabilizing solution; artifacts flagged\n";
            return 3;
        }
        std::cout << "wrote " << artifacts.size() << " realizations to " << out << "\n";
        return 0;
    }

    if (mode == "team") {
        if (!desc.weight) {
            std::cerr << "team mode requires a weight W in the system file\n";
            return 1;
        }
        LiftedSystem lifted = lift(desc.system, desc.options.memory);
        const TeamLift team = build_team_lift(lifted, *desc.weight);
        const TeamGainSchedule sched = team_filter_iterate(team, 5000, desc.options.stationary_tol);
        manifest["memory"] = lifted.M;
        json tj;
        tj["W"] = to_json_matrix(team.W);
        tj["gain"] = to_json_matrix(sched.gains.back());
        tj["steps"] = sched.steps;
        tj["stationary"] = sched.stationary;
        tj["stationary_at"] = sched.stationary_at;
        tj["residual"] = sched.residuals.back();
        try {
            tj["cost"] = team_weighted_cost(team, lifted, sched.sigma_final);
        } catch (const std::invalid_argument&) {
            tj["cost"] = nullptr;  // heterogeneous node dims: no combined readout
        }
        write_json((fs::path(out) / "team.json").string(), tj);
        manifest["artifacts"] = json::array({"team.json"});
        manifest["converged"] = sched.stationary;
        write_json((fs::path(out) / "manifest.json").string(), manifest);
        if (!sched.stationary) {
            std::cerr << "team gain did not reach stationarity; artifacts flagged\n";
            return 3;
        }
        std::cout << "wrote team gain to " << out << "\n";
        return 0;
    }

    std::cerr << "unknown mode \"" << mode << "\"\n";
    return 2;
}

// Strips the law so operations do not re-mask; structural zeros must then
// survive on their own, which is the content of the closure checks.
MatrixSeries lawless(const MatrixSeries& g) {
    std::vector<Eigen::MatrixXd> coeffs;
    for (int t = 0; t <= g.horizon(); ++t) coeffs.push_back(g.coeff(t));
    return MatrixSeries(std::move(coeffs), g.row_dims(), g.col_dims());
}

MatrixSeries random_masked_series(Rng& rng, const std::vector<int>& dims,
                                  const AdjacencyMatrix& law, int horizon,
                                  bool strictly_causal) {
    const int n = std::accumulate(dims.begin(), dims.end(), 0);
    std::vector<Eigen::MatrixXd> coeffs;
    for (int t = 0; t <= horizon; ++t) {
        Eigen::MatrixXd c(n, n);
        for (int r = 0; r < n; ++r)
            for (int q = 0; q < n; ++q) c(r, q) = 2.0 * rng.next_unit() - 1.0;
        if (strictly_causal && t == 0) c.setZero();
        coeffs.push_back(0.35 * c);
    }
    return MatrixSeries::masked(std::move(coeffs), dims, dims, law);
}

int run_verify(const std::string& path, const std::string& suite,
               std::optional<std::uint64_t> seed_flag) {
    SystemDescription desc = load_system_file(path);
    if (seed_flag) desc.options.seed = *seed_flag;
    const BlockSystem& sys = desc.system;
    const AdjacencyMatrix graph = adjacency_of(sys);
    bool pass = true;

    if (suite == "closure") {
        Rng rng(desc.options.seed);
        const int horizon = std::min(desc.options.horizon, 10);
        bool mul_ok = true, fb_ok = true;
        for (int trial = 0; trial < 50; ++trial) {
            const MatrixSeries g1 = random_masked_series(rng, sys.n_i, graph, horizon, false);
            const MatrixSeries g2 = random_masked_series(rng, sys.n_i, graph, horizon, false);
            const MatrixSeries h1 = random_masked_series(rng, sys.n_i, graph, horizon, true);
            mul_ok = mul_ok && membership(multiply(lawless(g1), lawless(g2)), graph, 0.0);
            fb_ok = fb_ok && membership(feedback_inverse(lawless(g1), lawless(h1)), graph, 0.0);
        }
        std::cout << "closure.multiply: " << (mul_ok ? "PASS" : "FAIL") << " (exact zeros)\n";
        std::cout << "closure.feedback_inverse: " << (fb_ok ? "PASS" : "FAIL") << " (exact zeros)\n";
        pass = mul_ok && fb_ok;
    } else if (suite == "duality") {
        const BlockSystem dual = dualize(sys);
        SynthesisRun run = synthesize_filters(dual, desc.options);
        const MatrixSeries l = assemble_estimator(run.filters, run.lifted, desc.options.horizon);
        const ControllerRealization ctrl = dual_estimator_to_controller(run.filters, run.lifted);
        const MatrixSeries g = ctrl.feedforward_series(desc.options.horizon);
        const MatrixSeries lt = transpose(l);
        double worst = 0.0;
        for (int s = 0; s <= desc.options.horizon; ++s)
            worst = std::max(worst, (g.coeff(s) - lt.coeff(s)).norm());
        const bool resp_ok = worst <= 1e-8;
        const bool member_ok = membership(g, graph, 1e-10);
        std::cout << "duality.response_transpose: " << (resp_ok ? "PASS" : "FAIL")
                  << " (max |g(s) - l'(s)| = " << worst << ")\n";
        std::cout << "duality.membership: " << (member_ok ? "PASS" : "FAIL") << "\n";
        pass = resp_ok && member_ok;
    } else if (suite == "optimality") {
        SynthesisRun run = synthesize_filters(sys, desc.options);
        const OracleSolution oracle =
            structured_ls_oracle(sys, graph, Eigen::MatrixXd(), desc.options.horizon);
        double worst = 0.0;
        bool ok = run.converged && run.stable;
        for (int i = 0; i < sys.N; ++i) {
            const double a = run.covs[static_cast<std::size_t>(i)].cost;
            const double b = oracle.node_costs[static_cast<std::size_t>(i)];
            const double rel = std::abs(a - b) / std::max(1e-12, std::abs(b));
            worst = std::max(worst, rel);
            std::cout << "optimality.node_" << i + 1 << ": filter=" << a << " oracle=" << b
                      << " rel=" << rel << "\n";
        }
        ok = ok && worst <= 1e-6;
        std::cout << "optimality: " << (ok ? "PASS" : "FAIL") << " (worst rel = " << worst << ")\n";
        pass = ok;
    } else if (suite == "whiteness") {
        SynthesisRun run = synthesize_filters(sys, desc.options);
        const WhitenessReport rep =
            innovation_whiteness(run.lifted, run.filters, desc.options.horizon,
                                 desc.options.trials, desc.options.seed);
        for (std::size_t lag = 0; lag < rep.max_abs_corr.size(); ++lag)
            std::cout << "whiteness.lag_" << lag + 1 << ": |r| = " << rep.max_abs_corr[lag]
                      << " (limit " << rep.threshold[lag] << ")\n";
        std::cout << "whiteness: " << (rep.pass ? "PASS" : "FAIL") << " (" << rep.samples
                  << " samples)\n";
        pass = rep.pass;
    } else {
        std::cerr << "unknown suite \"" << suite << "\"\n";
        return 2;
    }
    return pass ? 0 : 1;
}

void write_sim_report(const std::string& dir, const SimReport& rep) {
    json j;
    j["trials"] = rep.trials;
    j["horizon"] = rep.horizon;
    j["seed"] = rep.seed;
    j["node_cost"] = rep.node_cost;
    j["total_cost"] = rep.total_cost;
    j["total_stderr"] = rep.total_stderr;
    j["diverged"] = rep.diverged;
    write_json((fs::path(dir) / "simreport.json").string(), j);
    std::ofstream out(fs::path(dir) / "simreport.txt");
    out << "node        mean_cost\n";
    for (std::size_t i = 0; i < rep.node_cost.size(); ++i) {
        char line[64];
        std::snprintf(line, sizeof(line), "%-10zu  %.10g\n", i + 1, rep.node_cost[i]);
        out << line;
    }
    out << "total       " << rep.total_cost << " +- " << rep.total_stderr
        << (rep.diverged ? "  DIVERGED" : "") << "\n";
}

int run_simulate(const std::string& path, const std::string& with_dir,
                 std::optional<int> trials_flag, std::optional<std::uint64_t> seed_flag) {
    SystemDescription desc = load_system_file(path);
    if (!fs::exists(fs::path(with_dir) / "manifest.json")) {
        std::cerr << "missing artifacts: " << with_dir << "/manifest.json\n";
        return 1;
    }
    const json manifest = load_json((fs::path(with_dir) / "manifest.json").string());
    const std::string mode = manifest.at("mode").get<std::string>();
    const int memory = manifest.contains("memory") ? manifest["memory"].get<int>() : -1;
    const int trials = trials_flag ? *trials_flag : desc.options.trials;
    const std::uint64_t seed = seed_flag ? *seed_flag : desc.options.seed;
    const int horizon = std::max(desc.options.horizon, 4);

    if (mode == "estimator") {
        const LiftedSystem lifted = lift(desc.system, memory);
        std::vector<FilterRealization> filters;
        for (int i = 0; i < desc.system.N; ++i) {
            const json fj =
                load_json((fs::path(with_dir) / ("filter_" + std::to_string(i + 1) + ".json")).string());
            FilterRealization f;
            f.node = i;
            f.G_in = from_json_matrix(fj.at("K"), "K");
            if (f.G_in.rows() != lifted.ne ||
                f.G_in.cols() != lifted.E[static_cast<std::size_t>(i)].rows()) {
                std::cerr << "artifact dimensions do not match the system (filter " << i + 1 << ")\n";
                return 1;
            }
            f.F = lifted.Ae - f.G_in * lifted.E[static_cast<std::size_t>(i)];
            f.H = lifted.selector(i);
            f.spectral_radius = spectral_radius(f.F);
            filters.push_back(std::move(f));
        }
        const SimReport rep = simulate_estimator(lifted, filters, horizon, trials, seed);
        write_sim_report(with_dir, rep);
        std::cout << "total " << rep.total_cost << " +- " << rep.total_stderr
                  << (rep.diverged ? " DIVERGED" : "") << "\n";
        return rep.diverged ? 3 : 0;
    }

    if (mode == "controller") {
        const BlockSystem dual = dualize(desc.system);
        const LiftedSystem dlift = lift(dual, memory);
        ControllerRealization ctrl;
        ctrl.u_dims = dual.p_i;
        ctrl.w_dims = dual.n_i;
        ctrl.law = transpose_graph(dlift.graph);
        for (int i = 0; i < dual.N; ++i) {
            const json cj = load_json(
                (fs::path(with_dir) / ("controller_" + std::to_string(i + 1) + ".json")).string());
            ControllerNode node;
            node.node = i;
            node.Ad = from_json_matrix(cj.at("Ad"), "Ad");
            node.In = from_json_matrix(cj.at("In"), "In");
            node.Out = from_json_matrix(cj.at("Out"), "Out");
            for (const auto& pr : cj.at("pairs"))
                node.pairs.emplace_back(pr.at(0).get<int>() - 1, pr.at(1).get<int>());
            node.pair_rows = cj.at("pair_rows").get<std::vector<int>>();
            if (node.Ad.rows() != dlift.ne || node.In.cols() != dual.n_i[static_cast<std::size_t>(i)]) {
                std::cerr << "artifact dimensions do not match the system (controller " << i + 1
                          << ")\n";
                return 1;
            }
            ctrl.memory = std::max(ctrl.memory, dlift.M);
            ctrl.nodes.push_back(std::move(node));
        }
        const ClosedLoopReport rep =
            simulate_closed_loop(desc.system, &ctrl, horizon, trials, seed);
        json j;
        j["trials"] = rep.trials;
        j["horizon"] = rep.horizon;
        j["seed"] = rep.seed;
        j["cost"] = rep.cost;
        j["cost_stderr"] = rep.cost_stderr;
        j["diverged"] = rep.diverged;
        write_json((fs::path(with_dir) / "simreport.json").string(), j);
        std::cout << "z-cost " << rep.cost << " +- " << rep.cost_stderr
                  << (rep.diverged ? " DIVERGED" : "") << "\n";
        return rep.diverged ? 3 : 0;
    }

    if (mode == "team") {
        const LiftedSystem lifted = lift(desc.system, memory);
        const json tj = load_json((fs::path(with_dir) / "team.json").string());
        const Eigen::MatrixXd W = from_json_matrix(tj.at("W"), "W");
        const Eigen::MatrixXd K = from_json_matrix(tj.at("gain"), "gain");
        const int N = desc.system.N;
        std::vector<int> crow{0};
        for (int i = 0; i < N; ++i)
            crow.push_back(crow.back() + static_cast<int>(lifted.E[static_cast<std::size_t>(i)].rows()));
        if (K.rows() != static_cast<Eigen::Index>(N) * lifted.ne || K.cols() != crow.back() ||
            W.rows() != N) {
            std::cerr << "artifact dimensions do not match the system (team gain)\n";
            return 1;
        }
        for (int i = 1; i < N; ++i)
            if (desc.system.n_i[static_cast<std::size_t>(i)] != desc.system.n_i[0]) {
                std::cerr << "team simulation needs homogeneous node state dimensions\n";
                return 1;
            }
        const int nloc = desc.system.n_i[0];
        const Eigen::MatrixXd Lw = Eigen::LLT<Eigen::MatrixXd>(desc.system.noise_cov).matrixL();
        const int burn = horizon / 2;
        const int recorded = horizon - burn;
        double acc = 0.0;
        bool diverged = false;
        for (int r = 0; r < trials && !diverged; ++r) {
            Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r));
            Eigen::VectorXd xe = Eigen::VectorXd::Zero(lifted.ne);
            Eigen::MatrixXd Xhat = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N) * lifted.ne, N);
            for (int t = 0; t < horizon; ++t) {
                if (t >= burn) {
                    // Weighted error power sum_{ij} W_ij <xt_i, xt_j>.
                    Eigen::MatrixXd xtil(nloc, N);
                    for (int i = 0; i < N; ++i) {
                        Eigen::VectorXd xc = Eigen::VectorXd::Zero(nloc);
                        for (int jj = 0; jj < N; ++jj)
                            xc += lifted.selector(jj) * Xhat.block(jj * lifted.ne, i, lifted.ne, 1);
                        xtil.col(i) = xe.segment(desc.system.n_off(i),
                                                 desc.system.n_i[static_cast<std::size_t>(i)]) - xc;
                    }
                    const double v = (xtil * W * xtil.transpose()).trace();
                    if (!std::isfinite(v) || std::abs(v) > 1e18) {
                        diverged = true;
                        break;
                    }
                    acc += v;
                }
                Eigen::VectorXd gauss(desc.system.n_w());
                for (int q = 0; q < desc.system.n_w(); ++q) gauss(q) = rng.next_gaussian();
                const Eigen::VectorXd w = Lw * gauss;
                for (int i = 0; i < N; ++i) {
                    const auto& Ei = lifted.E[static_cast<std::size_t>(i)];
                    const Eigen::VectorXd innov =
                        Ei * xe + lifted.Dei[static_cast<std::size_t>(i)] * w -
                        Ei * Xhat.block(i * lifted.ne, i, lifted.ne, 1);
                    Eigen::VectorXd col = Xhat.col(i);
                    for (int jj = 0; jj < N; ++jj)
                        col.segment(jj * lifted.ne, lifted.ne) =
                            lifted.Ae * Xhat.block(jj * lifted.ne, i, lifted.ne, 1);
                    col += K.middleCols(crow[static_cast<std::size_t>(i)],
                                        crow[static_cast<std::size_t>(i) + 1] -
                                            crow[static_cast<std::size_t>(i)]) *
                           innov;
                    Xhat.col(i) = col;
                }
                xe = lifted.Ae * xe + lifted.Be * w;
            }
        }
        const double cost = acc / (static_cast<double>(trials) * recorded);
        json j;
        j["trials"] = trials;
        j["horizon"] = horizon;
        j["seed"] = seed;
        j["weighted_cost"] = cost;
        j["diverged"] = diverged;
        write_json((fs::path(with_dir) / "simreport.json").string(), j);
        std::cout << "weighted cost " << cost << (diverged ? " DIVERGED" : "") << "\n";
        return diverged ? 3 : 0;
    }

    std::cerr << "unknown artifact mode \"" << mode << "\"\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed estimation and control over directed graphs"};
    app.require_subcommand(1);

    std::string path, out_dir, with_dir;
    std::string mode = "estimator", suite = "duality";
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> trials_flag;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_flag, "override the RNG seed (default: file options.seed, else 12345)");
    };

    CLI::App* v = app.add_subcommand("validate", "check a system description file");
    v->add_option("path", path, "system description (JSON)")->required();

    CLI::App* s = app.add_subcommand("synthesize", "synthesize realizations and write artifacts");
    s->add_option("path", path, "system description (JSON)")->required();
    s->add_option("--mode", mode, "estimator | controller | team")->required();
    s->add_option("--out", out_dir, "artifact directory")->required();
    add_seed(s);

    CLI::App* ver = app.add_subcommand("verify", "run a property suite at file scale");
    ver->add_option("path", path, "system description (JSON)")->required();
    ver->add_option("--suite", suite, "closure | duality | optimality | whiteness")->required();
    add_seed(ver);

    CLI::App* sim = app.add_subcommand("simulate", "Monte-Carlo run against synthesized artifacts");
    sim->add_option("path", path, "system description (JSON)")->required();
    sim->add_option("--with", with_dir, "artifact directory from synthesize")->required();
    sim->add_option("--trials", trials_flag, "trial count (default: file options.trials)");
    add_seed(sim);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (v->parsed()) return run_validate(path);
        if (s->parsed()) return run_synthesize(path, mode, out_dir, seed_flag);
        if (ver->parsed()) return run_verify(path, suite, seed_flag);
        if (sim->parsed()) return run_simulate(path, with_dir, trials_flag, seed_flag);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        for (const auto& issue : e.issues()) std::cerr << issue << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

// Python bindings for the graphlq core. Mirrors the C++ API one to one; all
// matrices cross the boundary as numpy arrays by copy.

#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "graphlq/duality.hpp"
#include "graphlq/graphnet.hpp"
#include "graphlq/kalman.hpp"
#include "graphlq/lifting.hpp"
#include "graphlq/series.hpp"
#include "graphlq/simkit.hpp"
#include "graphlq/sysfile.hpp"
#include "graphlq/sysmodel.hpp"
#include "graphlq/team.hpp"

namespace py = pybind11;
using namespace graphlq;

PYBIND11_MODULE(_core, m) {
    m.doc() = "distributed estimation and control over directed graphs";
    m.attr("UNREACHABLE") = unreachable;
    m.attr("DEFAULT_SEED") = kDefaultSeed;

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    // graphnet
    m.def("validate_adjacency", &validate_adjacency, py::arg("a"));
    m.def("graph_power", &power, py::arg("a"), py::arg("s"));
    m.def("delay_matrix", &delay_matrix, py::arg("a"));
    m.def("transpose_graph", &transpose_graph, py::arg("a"));

    // series
    py::class_<MatrixSeries>(m, "MatrixSeries")
        .def(py::init<std::vector<Eigen::MatrixXd>, std::vector<int>, std::vector<int>,
                      std::optional<AdjacencyMatrix>>(),
             py::arg("coeffs"), py::arg("row_dims"), py::arg("col_dims"),
             py::arg("law") = std::nullopt)
        .def_static("masked", &MatrixSeries::masked, py::arg("coeffs"), py::arg("row_dims"),
                    py::arg("col_dims"), py::arg("law"))
        .def_static("zero", &MatrixSeries::zero, py::arg("horizon"), py::arg("row_dims"),
                    py::arg("col_dims"), py::arg("law") = std::nullopt)
        .def_property_readonly("horizon", &MatrixSeries::horizon)
        .def("coeff", &MatrixSeries::coeff, py::arg("t"))
        .def_property_readonly("row_dims",
                               [](const MatrixSeries& g) { return g.row_dims(); })
        .def_property_readonly("col_dims",
                               [](const MatrixSeries& g) { return g.col_dims(); })
        .def_property_readonly("law", [](const MatrixSeries& g) { return g.law(); });
    m.def("multiply", &multiply, py::arg("g1"), py::arg("g2"));
    m.def("feedback_inverse", &feedback_inverse, py::arg("h2"), py::arg("h1"));
    m.def("transpose_series", [](const MatrixSeries& g) { return transpose(g); }, py::arg("g"));
    m.def("membership", &membership, py::arg("g"), py::arg("a"), py::arg("tol"));
    m.def("series_norm", &norm, py::arg("g"));

    // sysmodel
    py::class_<BlockSystem>(m, "BlockSystem")
        .def_readonly("N", &BlockSystem::N)
        .def_readonly("n_i", &BlockSystem::n_i)
        .def_readonly("m_i", &BlockSystem::m_i)
        .def_readonly("p_i", &BlockSystem::p_i)
        .def_readonly("A", &BlockSystem::A)
        .def_readonly("B_blocks", &BlockSystem::B_blocks)
        .def_readonly("C_blocks", &BlockSystem::C_blocks)
        .def_readonly("D", &BlockSystem::D)
        .def_readonly("noise_cov", &BlockSystem::noise_cov)
        .def("B", &BlockSystem::B)
        .def("C", &BlockSystem::C);
    m.def("make_block_system", &make_block_system, py::arg("n_i"), py::arg("m_i"),
          py::arg("p_i"), py::arg("A"), py::arg("B_blocks"), py::arg("C_blocks"),
          py::arg("D"), py::arg("noise_cov") = std::nullopt);
    m.def("validate_system",
          [](const BlockSystem& sys) { return validate(sys); }, py::arg("system"));
    m.def("adjacency_of", &adjacency_of, py::arg("system"));
    m.def("impulse_response", &impulse_response, py::arg("system"), py::arg("horizon"));
    m.def("dualize", &dualize, py::arg("system"));

    py::enum_<ProblemKind>(m, "ProblemKind")
        .value("state_feedback", ProblemKind::state_feedback)
        .value("feedforward", ProblemKind::feedforward)
        .value("estimation", ProblemKind::estimation)
        .value("weighted_estimation", ProblemKind::weighted_estimation)
        .value("correlated_feedback", ProblemKind::correlated_feedback);
    py::class_<ProblemSpec>(m, "ProblemSpec")
        .def(py::init([](ProblemKind kind, BlockSystem system,
                         std::optional<Eigen::MatrixXd> weight) {
                 return ProblemSpec{kind, std::move(system), std::move(weight)};
             }),
             py::arg("kind"), py::arg("system"), py::arg("weight") = std::nullopt)
        .def_readonly("kind", &ProblemSpec::kind)
        .def_readonly("system", &ProblemSpec::system)
        .def_readonly("weight", &ProblemSpec::weight);
    m.def("validate_problem",
          [](const ProblemSpec& p) { return validate(p); }, py::arg("problem"));
    m.def("dual_problem", &dual_problem, py::arg("problem"));
    m.def("correlated_to_weighted", &correlated_to_weighted, py::arg("problem"));

    // lifting
    py::class_<LayoutEntry>(m, "LayoutEntry")
        .def_readonly("name", &LayoutEntry::name)
        .def_readonly("offset", &LayoutEntry::offset)
        .def_readonly("size", &LayoutEntry::size);
    py::class_<LiftedSystem>(m, "LiftedSystem")
        .def_readonly("base", &LiftedSystem::base)
        .def_readonly("M", &LiftedSystem::M)
        .def_readonly("ne", &LiftedSystem::ne)
        .def_readonly("Ae", &LiftedSystem::Ae)
        .def_readonly("Be", &LiftedSystem::Be)
        .def_readonly("E", &LiftedSystem::E)
        .def_readonly("Dei", &LiftedSystem::Dei)
        .def_readonly("pairs", &LiftedSystem::pairs)
        .def_readonly("delays", &LiftedSystem::delays)
        .def_readonly("graph", &LiftedSystem::graph)
        .def_readonly("layout", &LiftedSystem::layout)
        .def("selector", &LiftedSystem::selector, py::arg("i"))
        .def("pair_row_offsets", &LiftedSystem::pair_row_offsets, py::arg("i"));
    m.def("lift", &lift, py::arg("system"), py::arg("memory") = -1);

    // kalman
    py::class_<RiccatiOptions>(m, "RiccatiOptions")
        .def(py::init<>())
        .def_readwrite("tol", &RiccatiOptions::tol)
        .def_readwrite("max_iter", &RiccatiOptions::max_iter)
        .def_readwrite("pinv_rel_tol", &RiccatiOptions::pinv_rel_tol);
    py::class_<RiccatiResult>(m, "RiccatiResult")
        .def_readonly("P", &RiccatiResult::P)
        .def_readonly("gain", &RiccatiResult::gain)
        .def_readonly("iterations", &RiccatiResult::iterations)
        .def_readonly("residual", &RiccatiResult::residual)
        .def_readonly("converged", &RiccatiResult::converged);
    m.def("riccati_iterate", &riccati_iterate, py::arg("A"), py::arg("C"), py::arg("Q"),
          py::arg("R"), py::arg("S"), py::arg("opts") = RiccatiOptions{});
    py::class_<FilterRealization>(m, "FilterRealization")
        .def_readonly("node", &FilterRealization::node)
        .def_readonly("F", &FilterRealization::F)
        .def_readonly("K", &FilterRealization::G_in)
        .def_readonly("H", &FilterRealization::H)
        .def_readonly("spectral_radius", &FilterRealization::spectral_radius)
        .def_readonly("riccati", &FilterRealization::riccati);
    m.def("synthesize_node_filter", &synthesize_node_filter, py::arg("lifted"), py::arg("i"),
          py::arg("opts") = RiccatiOptions{});
    m.def("assemble_estimator", &assemble_estimator, py::arg("filters"), py::arg("lifted"),
          py::arg("horizon"));
    py::class_<CovarianceReport>(m, "CovarianceReport")
        .def_readonly("sigma", &CovarianceReport::sigma)
        .def_readonly("cost", &CovarianceReport::cost)
        .def_readonly("stable", &CovarianceReport::stable)
        .def_readonly("spectral_radius", &CovarianceReport::spectral_radius)
        .def_readonly("iterations", &CovarianceReport::iterations);
    m.def("filter_error_covariance", &filter_error_covariance, py::arg("filter"),
          py::arg("lifted"), py::arg("i"));

    // duality
    m.def("feedback_to_feedforward", &feedback_to_feedforward, py::arg("K"), py::arg("A"),
          py::arg("B"));
    m.def("feedforward_to_feedback", &feedforward_to_feedback, py::arg("G"), py::arg("A"),
          py::arg("B"));
    py::class_<ControllerNode>(m, "ControllerNode")
        .def_readonly("node", &ControllerNode::node)
        .def_readonly("Ad", &ControllerNode::Ad)
        .def_readonly("In", &ControllerNode::In)
        .def_readonly("Out", &ControllerNode::Out)
        .def_readonly("pairs", &ControllerNode::pairs)
        .def_readonly("pair_rows", &ControllerNode::pair_rows);
    py::class_<ControllerRealization>(m, "ControllerRealization")
        .def_readonly("nodes", &ControllerRealization::nodes)
        .def_readonly("u_dims", &ControllerRealization::u_dims)
        .def_readonly("w_dims", &ControllerRealization::w_dims)
        .def_readonly("law", &ControllerRealization::law)
        .def_readonly("memory", &ControllerRealization::memory)
        .def("feedforward_series", &ControllerRealization::feedforward_series,
             py::arg("horizon"));
    m.def("dual_estimator_to_controller", &dual_estimator_to_controller, py::arg("filters"),
          py::arg("dual_lift"));

    // team
    m.def("static_team_gain", &static_team_gain, py::arg("Sxy"), py::arg("Syy"),
          py::arg("rel_tol") = 1e-10);
    py::class_<TeamLift>(m, "TeamLift")
        .def_readonly("N", &TeamLift::N)
        .def_readonly("ne", &TeamLift::ne)
        .def_readonly("Acal", &TeamLift::Acal)
        .def_readonly("Bcal", &TeamLift::Bcal)
        .def_readonly("Ccal", &TeamLift::Ccal)
        .def_readonly("Dcal", &TeamLift::Dcal)
        .def_readonly("What", &TeamLift::What)
        .def_readonly("W", &TeamLift::W)
        .def_readonly("crow_off", &TeamLift::crow_off);
    m.def("build_team_lift", &build_team_lift, py::arg("lifted"), py::arg("W"));
    py::class_<TeamGainSchedule>(m, "TeamGainSchedule")
        .def_readonly("gains", &TeamGainSchedule::gains)
        .def_readonly("residuals", &TeamGainSchedule::residuals)
        .def_readonly("sigma_final", &TeamGainSchedule::sigma_final)
        .def_readonly("steps", &TeamGainSchedule::steps)
        .def_readonly("stationary", &TeamGainSchedule::stationary)
        .def_readonly("stationary_at", &TeamGainSchedule::stationary_at);
    m.def("team_filter_iterate", &team_filter_iterate, py::arg("team"), py::arg("T"),
          py::arg("tol") = 1e-9);
    m.def("team_weighted_cost", &team_weighted_cost, py::arg("team"), py::arg("lifted"),
          py::arg("sigma"));
    m.def("combine_estimates", &combine_estimates, py::arg("Xhat"), py::arg("lifted"));

    // simkit
    m.def("analytic_cost", &analytic_cost, py::arg("F"), py::arg("G"), py::arg("H"));
    py::class_<OracleSolution>(m, "OracleSolution")
        .def_readonly("coefficients", &OracleSolution::coefficients)
        .def_readonly("cost", &OracleSolution::cost)
        .def_readonly("residual", &OracleSolution::residual)
        .def_readonly("node_costs", &OracleSolution::node_costs)
        .def_readonly("ill_conditioned", &OracleSolution::ill_conditioned)
        .def_readonly("condition_gap", &OracleSolution::condition_gap);
    m.def(
        "structured_ls_oracle",
        [](const BlockSystem& sys, const AdjacencyMatrix& a,
           std::optional<Eigen::MatrixXd> weight, int horizon, int err_horizon) {
            return structured_ls_oracle(sys, a, weight ? *weight : Eigen::MatrixXd(), horizon,
                                        err_horizon);
        },
        py::arg("system"), py::arg("a"), py::arg("weight") = std::nullopt, py::arg("horizon"),
        py::arg("err_horizon") = -1);
    m.def(
        "feedforward_ls_oracle",
        [](const BlockSystem& sys, const AdjacencyMatrix& a,
           std::optional<Eigen::MatrixXd> noise_weight, int horizon, int err_horizon) {
            return feedforward_ls_oracle(sys, a,
                                         noise_weight ? *noise_weight : Eigen::MatrixXd(),
                                         horizon, err_horizon);
        },
        py::arg("system"), py::arg("a"), py::arg("noise_weight") = std::nullopt,
        py::arg("horizon"), py::arg("err_horizon") = -1);
    m.def(
        "fir_estimation_cost",
        [](const BlockSystem& sys, const MatrixSeries& l, int err_horizon,
           std::optional<Eigen::MatrixXd> weight) {
            return fir_estimation_cost(sys, l, err_horizon,
                                       weight ? *weight : Eigen::MatrixXd());
        },
        py::arg("system"), py::arg("l"), py::arg("err_horizon"),
        py::arg("weight") = std::nullopt);
    m.def(
        "fir_feedforward_cost",
        [](const BlockSystem& sys, const MatrixSeries& g, int err_horizon,
           std::optional<Eigen::MatrixXd> noise_weight) {
            return fir_feedforward_cost(sys, g, err_horizon,
                                        noise_weight ? *noise_weight : Eigen::MatrixXd());
        },
        py::arg("system"), py::arg("g"), py::arg("err_horizon"),
        py::arg("noise_weight") = std::nullopt);
    py::class_<SimReport>(m, "SimReport")
        .def_readonly("node_cost", &SimReport::node_cost)
        .def_readonly("total_cost", &SimReport::total_cost)
        .def_readonly("total_stderr", &SimReport::total_stderr)
        .def_readonly("trials", &SimReport::trials)
        .def_readonly("horizon", &SimReport::horizon)
        .def_readonly("seed", &SimReport::seed)
        .def_readonly("diverged", &SimReport::diverged);
    m.def("simulate_estimator", &simulate_estimator, py::arg("lifted"), py::arg("filters"),
          py::arg("horizon"), py::arg("trials"), py::arg("seed") = kDefaultSeed);
    py::class_<WhitenessReport>(m, "WhitenessReport")
        .def_readonly("max_abs_corr", &WhitenessReport::max_abs_corr)
        .def_readonly("threshold", &WhitenessReport::threshold)
        .def_readonly("samples", &WhitenessReport::samples)
        .def_readonly("pass_", &WhitenessReport::pass)
        .def_property_readonly("ok", [](const WhitenessReport& r) { return r.pass; });
    m.def("innovation_whiteness", &innovation_whiteness, py::arg("lifted"), py::arg("filters"),
          py::arg("horizon"), py::arg("trials"), py::arg("seed") = kDefaultSeed,
          py::arg("max_lag") = 5);
    py::class_<ClosedLoopReport>(m, "ClosedLoopReport")
        .def_readonly("cost", &ClosedLoopReport::cost)
        .def_readonly("cost_stderr", &ClosedLoopReport::cost_stderr)
        .def_readonly("trials", &ClosedLoopReport::trials)
        .def_readonly("horizon", &ClosedLoopReport::horizon)
        .def_readonly("seed", &ClosedLoopReport::seed)
        .def_readonly("diverged", &ClosedLoopReport::diverged);
    m.def(
        "simulate_closed_loop",
        [](const BlockSystem& sys, const std::optional<ControllerRealization>& ctrl,
           int horizon, int trials, std::uint64_t seed, std::optional<Eigen::MatrixXd> cov) {
            return simulate_closed_loop(sys, ctrl ? &*ctrl : nullptr, horizon, trials, seed,
                                        cov ? *cov : Eigen::MatrixXd());
        },
        py::arg("system"), py::arg("controller") = std::nullopt, py::arg("horizon") = 40,
        py::arg("trials") = 1000, py::arg("seed") = kDefaultSeed,
        py::arg("cov") = std::nullopt);

    // sysfile
    py::class_<RunOptions>(m, "RunOptions")
        .def(py::init<>())
        .def_readwrite("horizon", &RunOptions::horizon)
        .def_readwrite("memory", &RunOptions::memory)
        .def_readwrite("seed", &RunOptions::seed)
        .def_readwrite("trials", &RunOptions::trials)
        .def_readwrite("riccati_tol", &RunOptions::riccati_tol)
        .def_readwrite("riccati_max_iter", &RunOptions::riccati_max_iter)
        .def_readwrite("stationary_tol", &RunOptions::stationary_tol);
    py::class_<SystemDescription>(m, "SystemDescription")
        .def_readonly("system", &SystemDescription::system)
        .def_readonly("weight", &SystemDescription::weight)
        .def_readonly("options", &SystemDescription::options);
    m.def("load_system_file", &load_system_file, py::arg("path"));
}

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphlq/graphnet.hpp"
#include "graphlq/series.hpp"
#include "graphlq/sysmodel.hpp"

namespace graphlq {

// Seed used by every command when the file and the flags specify none.
inline constexpr std::uint64_t kDefaultSeed = 12345;

// Malformed input: bad JSON, unknown keys, missing blocks, shape mismatches.
// Distinct from semantic validation failures, which carry diagnostics.
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(std::vector<std::string> issues);
    const std::vector<std::string>& issues() const { return issues_; }

  private:
    std::vector<std::string> issues_;
};

struct RunOptions {
    int horizon = 20;
    int memory = -1;  // -1: lift default (one register per node)
    std::uint64_t seed = kDefaultSeed;
    int trials = 1000;
    double riccati_tol = 1e-11;
    int riccati_max_iter = 10000;
    double stationary_tol = 1e-9;
};

// Parsed system-description file. The JSON document holds: "N"; "dims" as N
// [n_i, m_i, p_i] triples; dense row-major blocks "A.i.j" (1-based, absent
// blocks are zero), "B.i", "C.i"; "D"; optional "W" (N x N team weight);
// optional "noise_cov"; optional "options". Matrices are arrays of row arrays
// or flat row-major arrays. Unknown keys anywhere are rejected.
struct SystemDescription {
    BlockSystem system;
    std::optional<Eigen::MatrixXd> weight;
    RunOptions options;
};

SystemDescription load_system_file(const std::string& path);

// Dense CSV with one row per line and full round-trip precision.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);
void write_int_matrix_csv(const std::string& path,
                          const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& m);
void write_delay_csv(const std::string& path, const DelayMatrix& d);

// Series export: <name>_lag<tt>.csv per coefficient plus a <name>.json manifest
// carrying partitions, horizon, and the sparsity law.
void write_series(const std::string& dir, const std::string& name, const MatrixSeries& g);
MatrixSeries read_series(const std::string& dir, const std::string& name);

}  // namespace graphlq

#include "graphlq/sysfile.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace graphlq {

namespace {

using nlohmann::json;

std::string joined(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += "; ";
        out += p;
    }
    return out;
}

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

// Accepts an array of row arrays or a flat row-major array of length r*c.
Eigen::MatrixXd matrix_from_json(const json& v, int rows, int cols, const std::string& key) {
    if (!v.is_array()) throw ParseError(key + ": expected an array");
    Eigen::MatrixXd m(rows, cols);
    if (rows > 0 && v.size() > 0 && v.front().is_array()) {
        if (static_cast<int>(v.size()) != rows)
            throw ParseError(key + ": expected " + std::to_string(rows) + " rows");
        for (int r = 0; r < rows; ++r) {
            const json& row = v[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<int>(row.size()) != cols)
                throw ParseError(key + ": row " + std::to_string(r + 1) + " should hold " +
                                 std::to_string(cols) + " numbers");
            for (int c = 0; c < cols; ++c) {
                const json& x = row[static_cast<std::size_t>(c)];
                if (!x.is_number()) throw ParseError(key + ": non-numeric entry");
                m(r, c) = x.get<double>();
            }
        }
        return m;
    }
    if (static_cast<int>(v.size()) != rows * cols)
        throw ParseError(key + ": flat block must hold " + std::to_string(rows * cols) +
                         " numbers (row-major)");
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const json& x = v[static_cast<std::size_t>(r * cols + c)];
            if (!x.is_number()) throw ParseError(key + ": non-numeric entry");
            m(r, c) = x.get<double>();
        }
    return m;
}

int int_field(const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ParseError(key + ": expected an integer");
    return v.get<int>();
}

RunOptions parse_options(const json& v) {
    RunOptions opt;
    if (!v.is_object()) throw ParseError("options: expected an object");
    for (const auto& [key, val] : v.items()) {
        if (key == "horizon") opt.horizon = int_field(val, "options.horizon");
        else if (key == "memory") opt.memory = int_field(val, "options.memory");
        else if (key == "seed") {
            if (!val.is_number_integer() || val.get<std::int64_t>() < 0)
                throw ParseError("options.seed: expected a nonnegative integer");
            opt.seed = val.get<std::uint64_t>();
        } else if (key == "trials") opt.trials = int_field(val, "options.trials");
        else if (key == "riccati_tol") opt.riccati_tol = val.get<double>();
        else if (key == "riccati_max_iter") opt.riccati_max_iter = int_field(val, "options.riccati_max_iter");
        else if (key == "stationary_tol") opt.stationary_tol = val.get<double>();
        else throw ParseError("options: unknown key \"" + key + "\"");
    }
    if (opt.horizon < 1) throw ParseError("options.horizon: must be >= 1");
    if (opt.trials < 1) throw ParseError("options.trials: must be >= 1");
    return opt;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(joined(issues)), issues_(std::move(issues)) {}

SystemDescription load_system_file(const std::string& path) {
    const json doc = parse_file(path);
    if (!doc.is_object()) throw ParseError(path + ": top level must be an object");
    if (!doc.contains("N")) throw ParseError("missing key \"N\"");
    const int N = int_field(doc["N"], "N");
    if (N < 1) throw ParseError("N must be >= 1");
    if (!doc.contains("dims")) throw ParseError("missing key \"dims\"");
    const json& dims = doc["dims"];
    if (!dims.is_array() || static_cast<int>(dims.size()) != N)
        throw ParseError("dims: expected " + std::to_string(N) + " [n, m, p] triples");

    std::vector<int> n_i, m_i, p_i;
    for (int i = 0; i < N; ++i) {
        const json& t = dims[static_cast<std::size_t>(i)];
        if (!t.is_array() || t.size() != 3)
            throw ParseError("dims: node " + std::to_string(i + 1) + " needs [n, m, p]");
        n_i.push_back(int_field(t[0], "dims.n"));
        m_i.push_back(int_field(t[1], "dims.m"));
        p_i.push_back(int_field(t[2], "dims.p"));
        if (n_i.back() < 1 || m_i.back() < 1 || p_i.back() < 1)
            throw ParseError("dims: node dimensions must be >= 1");
    }
    std::vector<int> n_off{0}, m_off{0}, p_off{0};
    for (int i = 0; i < N; ++i) {
        n_off.push_back(n_off.back() + n_i[static_cast<std::size_t>(i)]);
        m_off.push_back(m_off.back() + m_i[static_cast<std::size_t>(i)]);
        p_off.push_back(p_off.back() + p_i[static_cast<std::size_t>(i)]);
    }
    const int n = n_off.back(), m = m_off.back(), p = p_off.back();

    BlockSystem sys;
    sys.N = N;
    sys.n_i = n_i;
    sys.m_i = m_i;
    sys.p_i = p_i;
    sys.A = Eigen::MatrixXd::Zero(n, n);
    sys.B_blocks.assign(static_cast<std::size_t>(N), Eigen::MatrixXd());
    sys.C_blocks.assign(static_cast<std::size_t>(N), Eigen::MatrixXd());
    sys.noise_cov = Eigen::MatrixXd::Identity(m, m);

    std::optional<Eigen::MatrixXd> weight;
    RunOptions options;
    std::vector<bool> have_B(static_cast<std::size_t>(N), false),
        have_C(static_cast<std::size_t>(N), false);
    bool have_D = false;

    for (const auto& [key, val] : doc.items()) {
        if (key == "N" || key == "dims") continue;
        if (key == "D") {
            sys.D = matrix_from_json(val, p, m, "D");
            have_D = true;
        } else if (key == "W") {
            weight = matrix_from_json(val, N, N, "W");
        } else if (key == "noise_cov") {
            sys.noise_cov = matrix_from_json(val, m, m, "noise_cov");
        } else if (key == "options") {
            options = parse_options(val);
        } else if (key.rfind("A.", 0) == 0 || key.rfind("B.", 0) == 0 || key.rfind("C.", 0) == 0) {
            std::vector<int> idx;
            std::stringstream ss(key.substr(2));
            std::string part;
            bool ok = true;
            while (std::getline(ss, part, '.')) {
                try {
                    std::size_t used = 0;
                    const int v = std::stoi(part, &used);
                    if (used != part.size()) { ok = false; break; }
                    idx.push_back(v);
                } catch (...) { ok = false; break; }
            }
            for (const int v : idx)
                if (v < 1 || v > N) ok = false;
            if (key[0] == 'A' && (!ok || idx.size() != 2))
                throw ParseError("unknown key \"" + key + "\" (A blocks are \"A.i.j\", 1-based)");
            if ((key[0] == 'B' || key[0] == 'C') && (!ok || idx.size() != 1))
                throw ParseError("unknown key \"" + key + "\" (diagonal blocks are \"B.i\"/\"C.i\")");
            if (key[0] == 'A') {
                const int i = idx[0] - 1, j = idx[1] - 1;
                sys.A.block(n_off[static_cast<std::size_t>(i)], n_off[static_cast<std::size_t>(j)],
                            n_i[static_cast<std::size_t>(i)], n_i[static_cast<std::size_t>(j)]) =
                    matrix_from_json(val, n_i[static_cast<std::size_t>(i)],
                                     n_i[static_cast<std::size_t>(j)], key);
            } else if (key[0] == 'B') {
                const int i = idx[0] - 1;
                sys.B_blocks[static_cast<std::size_t>(i)] = matrix_from_json(
                    val, n_i[static_cast<std::size_t>(i)], m_i[static_cast<std::size_t>(i)], key);
                have_B[static_cast<std::size_t>(i)] = true;
            } else {
                const int i = idx[0] - 1;
                sys.C_blocks[static_cast<std::size_t>(i)] = matrix_from_json(
                    val, p_i[static_cast<std::size_t>(i)], n_i[static_cast<std::size_t>(i)], key);
                have_C[static_cast<std::size_t>(i)] = true;
            }
        } else {
            throw ParseError("unknown key \"" + key + "\"");
        }
    }

    for (int i = 0; i < N; ++i) {
        if (!have_B[static_cast<std::size_t>(i)])
            throw ParseError("missing key \"B." + std::to_string(i + 1) + "\"");
        if (!have_C[static_cast<std::size_t>(i)])
            throw ParseError("missing key \"C." + std::to_string(i + 1) + "\"");
    }
    if (!have_D) throw ParseError("missing key \"D\"");

    const std::vector<std::string> issues = validate(sys);
    if (!issues.empty()) throw ValidationError(issues);

    SystemDescription desc;
    desc.system = std::move(sys);
    desc.weight = std::move(weight);
    desc.options = options;
    return desc;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << m(r, c);
        }
        out << '\n';
    }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path + ": ragged CSV");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

void write_int_matrix_csv(
    const std::string& path,
    const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << m(r, c);
        }
        out << '\n';
    }
}

void write_delay_csv(const std::string& path, const DelayMatrix& d) {
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> m = d.cast<std::int64_t>();
    write_int_matrix_csv(path, m);
}

void write_series(const std::string& dir, const std::string& name, const MatrixSeries& g) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json manifest;
    manifest["name"] = name;
    manifest["horizon"] = g.horizon();
    manifest["row_dims"] = g.row_dims();
    manifest["col_dims"] = g.col_dims();
    if (g.law()) {
        std::vector<std::vector<std::int64_t>> law;
        for (Eigen::Index r = 0; r < g.law()->rows(); ++r) {
            std::vector<std::int64_t> row;
            for (Eigen::Index c = 0; c < g.law()->cols(); ++c) row.push_back((*g.law())(r, c));
            law.push_back(std::move(row));
        }
        manifest["law"] = law;
    } else {
        manifest["law"] = nullptr;
    }
    std::vector<std::string> files;
    for (int t = 0; t <= g.horizon(); ++t) {
        std::ostringstream fn;
        fn << name << "_lag" << std::setw(3) << std::setfill('0') << t << ".csv";
        write_matrix_csv((fs::path(dir) / fn.str()).string(), g.coeff(t));
        files.push_back(fn.str());
    }
    manifest["files"] = files;
    std::ofstream out(fs::path(dir) / (name + ".json"));
    if (!out) throw std::runtime_error("cannot write series manifest for " + name);
    out << manifest.dump(2) << '\n';
}

MatrixSeries read_series(const std::string& dir, const std::string& name) {
    namespace fs = std::filesystem;
    const json manifest = parse_file((fs::path(dir) / (name + ".json")).string());
    const auto row_dims = manifest.at("row_dims").get<std::vector<int>>();
    const auto col_dims = manifest.at("col_dims").get<std::vector<int>>();
    const auto files = manifest.at("files").get<std::vector<std::string>>();
    std::vector<Eigen::MatrixXd> coeffs;
    coeffs.reserve(files.size());
    for (const auto& f : files)
        coeffs.push_back(read_matrix_csv((fs::path(dir) / f).string()));
    std::optional<AdjacencyMatrix> law;
    if (!manifest.at("law").is_null()) {
        const auto rows = manifest["law"].get<std::vector<std::vector<std::int64_t>>>();
        AdjacencyMatrix a(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < rows.size(); ++c)
                a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        law = a;
    }
    return MatrixSeries(std::move(coeffs), row_dims, col_dims, law);
}

}  // namespace graphlq

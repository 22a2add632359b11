#include "cemppc/system_model.hpp"

#include "cemppc/error.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace cemppc {

namespace {

std::string shape(const Matrix& M) { return std::to_string(M.rows()) + "x" + std::to_string(M.cols()); }

// Indices of all k-subsets of {0..n-1}, lexicographic.
std::vector<std::vector<int>> subsets(int n, int k) {
    std::vector<std::vector<int>> out;
    if (k < 0 || k > n) {
        return out;
    }
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        idx[static_cast<std::size_t>(i)] = i;
    }
    while (true) {
        out.push_back(idx);
        int i = k - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) {
            --i;
        }
        if (i < 0) {
            break;
        }
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) {
            idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return out;
}

Matrix rows_of(const Matrix& F, const std::vector<int>& idx) {
    Matrix S(static_cast<Eigen::Index>(idx.size()), F.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        S.row(static_cast<Eigen::Index>(i)) = F.row(idx[i]);
    }
    return S;
}

bool has_recession_direction(const Matrix& F) {
    const int m = static_cast<int>(F.cols());
    Eigen::FullPivLU<Matrix> lu(F);
    if (lu.rank() < m) {
        return true; // the polyhedron contains a line
    }
    const double tol = 1e-12 * std::max(1.0, F.cwiseAbs().maxCoeff());
    for (const auto& idx : subsets(static_cast<int>(F.rows()), m - 1)) {
        Vector d;
        if (m == 1) {
            d = Vector::Ones(1);
        } else {
            Eigen::FullPivLU<Matrix> sub(rows_of(F, idx));
            if (sub.rank() != m - 1) {
                continue;
            }
            d = sub.kernel().col(0);
        }
        for (double sign : {1.0, -1.0}) {
            if (((sign * F * d).array() <= tol).all()) {
                return true;
            }
        }
    }
    return false;
}

Matrix parse_matrix(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) {
        fail(ErrorKind::Config, field + ": expected a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = -1;
    Matrix M;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        const std::string where = field + "[" + std::to_string(i) + "]";
        if (!row.is_array() || row.empty()) {
            fail(ErrorKind::Config, where + ": expected a non-empty array");
        }
        if (cols < 0) {
            cols = static_cast<Eigen::Index>(row.size());
            M.resize(rows, cols);
        } else if (static_cast<Eigen::Index>(row.size()) != cols) {
            fail(ErrorKind::Config, where + ": ragged row (expected " + std::to_string(cols) + " entries)");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) {
                fail(ErrorKind::Config, where + "[" + std::to_string(c) + "]: expected a number");
            }
            M(i, c) = v.get<double>();
        }
    }
    return M;
}

nlohmann::json matrix_json(const Matrix& M) {
    auto out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            row.push_back(M(i, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

} // namespace

LinearSystem::LinearSystem(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
    if (A_.rows() == 0 || A_.rows() != A_.cols()) {
        fail(ErrorKind::InvalidInput, "LinearSystem: A must be square and non-empty, got " + shape(A_));
    }
    if (B_.rows() != A_.rows() || B_.cols() == 0) {
        fail(ErrorKind::InvalidInput, "LinearSystem: B must have " + std::to_string(A_.rows()) + " rows, got " + shape(B_));
    }
    numerics::require_finite(A_, "A");
    numerics::require_finite(B_, "B");
}

bool is_stabilizable(const LinearSystem& sys) {
    try {
        (void)numerics::solve_dare(sys.A(), sys.B(), Matrix::Identity(sys.n(), sys.n()),
                                   Matrix::Identity(sys.m(), sys.m()));
        return true;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::NonStabilizable) {
            return false;
        }
        throw;
    }
}

void require_stabilizable(const LinearSystem& sys) {
    if (!is_stabilizable(sys)) {
        fail(ErrorKind::NonStabilizable, "system pair (A, B) is not stabilizable");
    }
}

CostWeights::CostWeights(Matrix Q, Matrix R) : Q_(std::move(Q)), R_(std::move(R)) {
    q_ext_ = numerics::sym_eig_extremes(Q_);
    r_ext_ = numerics::sym_eig_extremes(R_);
}

InputPolytope::InputPolytope(Matrix F_u) : F_(std::move(F_u)) {
    if (F_.rows() == 0 || F_.cols() == 0) {
        fail(ErrorKind::InvalidInput, "InputPolytope: F_u must be non-empty");
    }
    numerics::require_finite(F_, "F_u");
}

bool InputPolytope::contains(const Vector& u, double tol) const {
    return ((F_ * u).array() <= 1.0 + tol).all();
}

void UncertaintySpec::validate() const {
    if (!std::isfinite(delta_A) || !std::isfinite(delta_B) || delta_A < 0.0 || delta_B < 0.0) {
        fail(ErrorKind::InvalidInput, "UncertaintySpec: radii must be finite and nonnegative");
    }
}

double stage_cost(const Vector& x, const Vector& u, const CostWeights& W) {
    if (x.size() != W.Q().rows() || u.size() != W.R().rows()) {
        fail(ErrorKind::InvalidInput, "stage_cost: dimension mismatch");
    }
    return x.dot(W.Q() * x) + u.dot(W.R() * u);
}

double epsilon_K(const Matrix& K, const InputPolytope& U, const Matrix& Q) {
    if (K.rows() != U.m() || K.cols() != Q.rows() || Q.rows() != Q.cols()) {
        fail(ErrorKind::InvalidInput, "epsilon_K: dimension mismatch");
    }
    const Matrix FK = U.F() * K;
    const auto Qinv = Q.ldlt();
    double eps = kInf;
    for (Eigen::Index i = 0; i < FK.rows(); ++i) {
        const Vector r = FK.row(i).transpose();
        if (r.isZero(0.0)) {
            continue; // this constraint never binds under u = Kx
        }
        eps = std::min(eps, 1.0 / r.dot(Qinv.solve(r)));
    }
    return eps;
}

std::vector<Vector> polytope_vertices(const InputPolytope& U) {
    const int m = U.m();
    if (m > 3) {
        fail(ErrorKind::UnsupportedDimension, "input set vertex enumeration supports m <= 3, got m = " + std::to_string(m));
    }
    const Matrix& F = U.F();
    if (has_recession_direction(F)) {
        fail(ErrorKind::UnboundedSet, "input set { u : F_u u <= 1 } is unbounded");
    }
    std::vector<Vector> vertices;
    for (const auto& idx : subsets(U.rows(), m)) {
        const Matrix S = rows_of(F, idx);
        Eigen::FullPivLU<Matrix> lu(S);
        if (lu.rank() < m) {
            continue;
        }
        const Vector v = lu.solve(Vector::Ones(m));
        if (!U.contains(v, 1e-9)) {
            continue;
        }
        const bool duplicate = std::any_of(vertices.begin(), vertices.end(), [&](const Vector& w) {
            return (w - v).norm() <= 1e-12 * std::max(1.0, v.norm());
        });
        if (!duplicate) {
            vertices.push_back(v);
        }
    }
    return vertices;
}

InputSetExtremes input_set_extremes(const InputPolytope& U) {
    const auto vertices = polytope_vertices(U);
    InputSetExtremes out;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        out.u_bar = std::max(out.u_bar, vertices[i].squaredNorm());
        for (std::size_t j = i + 1; j < vertices.size(); ++j) {
            out.d_bar_u = std::max(out.d_bar_u, (vertices[i] - vertices[j]).squaredNorm());
        }
    }
    return out;
}

namespace {

Matrix ball_perturbation(Eigen::Index rows, Eigen::Index cols, double radius, bool boundary, std::mt19937_64& rng) {
    if (radius == 0.0) {
        return Matrix::Zero(rows, cols);
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix D(rows, cols);
    do {
        for (Eigen::Index i = 0; i < D.size(); ++i) {
            D.data()[i] = gauss(rng);
        }
    } while (D.norm() == 0.0);
    const double r = boundary ? radius : radius * unit(rng);
    D *= r / D.norm();
    // Rounding can push the norm a hair past the radius.
    while (D.norm() > radius) {
        D *= 1.0 - 1e-15;
    }
    return D;
}

} // namespace

LinearSystem sample_estimate(const LinearSystem& sys, const UncertaintySpec& spec, std::uint64_t seed,
                             const SamplingOptions& options) {
    spec.validate();
    if (spec.is_zero()) {
        return sys;
    }
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
        Matrix A = sys.A() + ball_perturbation(sys.A().rows(), sys.A().cols(), spec.delta_A, options.boundary, rng);
        Matrix B = sys.B() + ball_perturbation(sys.B().rows(), sys.B().cols(), spec.delta_B, options.boundary, rng);
        LinearSystem candidate(std::move(A), std::move(B));
        if (is_stabilizable(candidate)) {
            return candidate;
        }
    }
    fail(ErrorKind::SamplingFailure,
         "sample_estimate: no stabilizable estimate within " + std::to_string(options.max_attempts) + " draws");
}

SystemDefinition parse_system_definition(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Config, std::string("system definition: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) {
        fail(ErrorKind::Config, "system definition: expected a JSON object");
    }
    for (const char* key : {"A", "B", "Q", "R", "F_u"}) {
        if (!j.contains(key)) {
            fail(ErrorKind::Config, std::string("system definition: missing field ") + key);
        }
    }
    auto radius = [&](const char* key) {
        if (!j.contains(key)) {
            return 0.0;
        }
        if (!j[key].is_number()) {
            fail(ErrorKind::Config, std::string(key) + ": expected a number");
        }
        return j[key].get<double>();
    };

    SystemDefinition def;
    try {
        def.system = LinearSystem(parse_matrix(j["A"], "A"), parse_matrix(j["B"], "B"));
        def.weights = CostWeights(parse_matrix(j["Q"], "Q"), parse_matrix(j["R"], "R"));
        def.input_set = InputPolytope(parse_matrix(j["F_u"], "F_u"));
        def.uncertainty = UncertaintySpec{radius("delta_A"), radius("delta_B")};
        def.uncertainty.validate();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) {
            throw;
        }
        fail(ErrorKind::Config, std::string("system definition: ") + e.what());
    }
    if (def.weights.Q().rows() != def.system.n() || def.weights.R().rows() != def.system.m() ||
        def.input_set.m() != def.system.m()) {
        fail(ErrorKind::Config, "system definition: Q, R or F_u dimensions do not match (A, B)");
    }
    if (!is_stabilizable(def.system)) {
        fail(ErrorKind::Config, "system definition: (A, B) is not stabilizable");
    }
    return def;
}

SystemDefinition load_system_definition(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Config, "cannot open system definition " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_system_definition(buf.str());
}

std::string dump_system_definition(const SystemDefinition& def) {
    nlohmann::json j;
    j["A"] = matrix_json(def.system.A());
    j["B"] = matrix_json(def.system.B());
    j["Q"] = matrix_json(def.weights.Q());
    j["R"] = matrix_json(def.weights.R());
    j["F_u"] = matrix_json(def.input_set.F());
    j["delta_A"] = def.uncertainty.delta_A;
    j["delta_B"] = def.uncertainty.delta_B;
    return j.dump(2);
}

SystemDefinition reference_example() {
    Matrix A(2, 2);
    A << 1.0, 0.7, 0.12, 0.4;
    Matrix B(2, 1);
    B << 1.0, 1.2;
    Matrix F(2, 1);
    F << 10.0, -10.0;
    return {LinearSystem(A, B), CostWeights(2.0 * Matrix::Identity(2, 2), Matrix::Identity(1, 1)), InputPolytope(F),
            UncertaintySpec{}};
}

} // namespace cemppc

#pragma once

#include "cemppc/numerics.hpp"

#include <cstdint>
#include <filesystem>

namespace cemppc {

/// x(t+1) = A x(t) + B u(t). Used both for the true plant and for estimates.
class LinearSystem {
public:
    LinearSystem() = default;
    /// Validates shapes and finiteness. Stabilizability is a separate check,
    /// see `require_stabilizable`.
    LinearSystem(Matrix A, Matrix B);

    [[nodiscard]] const Matrix& A() const noexcept { return A_; }
    [[nodiscard]] const Matrix& B() const noexcept { return B_; }
    [[nodiscard]] int n() const noexcept { return static_cast<int>(A_.rows()); }
    [[nodiscard]] int m() const noexcept { return static_cast<int>(B_.cols()); }

    [[nodiscard]] Vector step(const Vector& x, const Vector& u) const { return A_ * x + B_ * u; }

private:
    Matrix A_;
    Matrix B_;
};

/// DARE convergence with unit weights.
[[nodiscard]] bool is_stabilizable(const LinearSystem& sys);
void require_stabilizable(const LinearSystem& sys);

/// l(x,u) = ‖x‖²_Q + ‖u‖²_R with Q, R ≻ 0.
class CostWeights {
public:
    CostWeights() = default;
    CostWeights(Matrix Q, Matrix R);

    [[nodiscard]] const Matrix& Q() const noexcept { return Q_; }
    [[nodiscard]] const Matrix& R() const noexcept { return R_; }
    [[nodiscard]] const numerics::EigenExtremes& q_extremes() const noexcept { return q_ext_; }
    [[nodiscard]] const numerics::EigenExtremes& r_extremes() const noexcept { return r_ext_; }

private:
    Matrix Q_;
    Matrix R_;
    numerics::EigenExtremes q_ext_{};
    numerics::EigenExtremes r_ext_{};
};

/// U = { u : F_u u ≤ 1 }. Contains the origin by construction.
class InputPolytope {
public:
    InputPolytope() = default;
    explicit InputPolytope(Matrix F_u);

    [[nodiscard]] const Matrix& F() const noexcept { return F_; }
    [[nodiscard]] int rows() const noexcept { return static_cast<int>(F_.rows()); }
    [[nodiscard]] int m() const noexcept { return static_cast<int>(F_.cols()); }
    [[nodiscard]] bool contains(const Vector& u, double tol = 1e-10) const;

private:
    Matrix F_;
};

/// Frobenius-ball radii: ‖A − Â‖_F ≤ δ_A, ‖B − B̂‖_F ≤ δ_B.
struct UncertaintySpec {
    double delta_A = 0.0;
    double delta_B = 0.0;

    void validate() const;
    [[nodiscard]] bool is_zero() const noexcept { return delta_A == 0.0 && delta_B == 0.0; }
};

struct InputSetExtremes {
    double u_bar = 0.0;   // max ‖u‖² over U
    double d_bar_u = 0.0; // max ‖u₁ − u₂‖² over U
};

[[nodiscard]] double stage_cost(const Vector& x, const Vector& u, const CostWeights& W);

/// Largest ε with l*(x) ≤ ε ⇒ Kx ∈ U. Rows of F_u K that vanish are skipped;
/// returns +∞ when every row vanishes.
[[nodiscard]] double epsilon_K(const Matrix& K, const InputPolytope& U, const Matrix& Q);

/// Vertex enumeration for m ≤ 3.
[[nodiscard]] std::vector<Vector> polytope_vertices(const InputPolytope& U);
[[nodiscard]] InputSetExtremes input_set_extremes(const InputPolytope& U);

struct SamplingOptions {
    bool boundary = false; // place the perturbation on the sphere instead of inside the ball
    int max_attempts = 100;
};

/// Random estimate (Â, B̂) inside the uncertainty ball around `sys`,
/// deterministic in `seed` and guaranteed stabilizable.
[[nodiscard]] LinearSystem sample_estimate(const LinearSystem& sys, const UncertaintySpec& spec, std::uint64_t seed,
                                           const SamplingOptions& options = {});

/// Everything a system definition file carries.
struct SystemDefinition {
    LinearSystem system;
    CostWeights weights;
    InputPolytope input_set;
    UncertaintySpec uncertainty;
};

[[nodiscard]] SystemDefinition load_system_definition(const std::filesystem::path& path);
[[nodiscard]] SystemDefinition parse_system_definition(const std::string& json_text);
[[nodiscard]] std::string dump_system_definition(const SystemDefinition& def);

/// The plant, weights and input set of the numerical example (δ fields zero).
[[nodiscard]] SystemDefinition reference_example();

} // namespace cemppc

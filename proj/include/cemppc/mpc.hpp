#pragma once

#include "cemppc/numerics.hpp"
#include "cemppc/qp.hpp"
#include "cemppc/system_model.hpp"

#include <vector>

namespace cemppc {

/// Stacked predictions x = Φ x₀ + Γ u over k = 0..N. Block (k, j) of Γ is
/// A^{k−j−1}B for j < k; the first block row is zero.
struct PredictionMatrices {
    Matrix Phi;   // (N+1)n × n
    Matrix Gamma; // (N+1)n × Nm
};

/// I_{N+1} ⊗ Q and I_N ⊗ R.
struct StackedWeights {
    Matrix Q_bar;
    Matrix R_bar;
};

[[nodiscard]] PredictionMatrices build_prediction_matrices(const LinearSystem& sys, int N);
[[nodiscard]] StackedWeights stack_weights(const CostWeights& W, int N);

/// H = R̄ + ΓᵀQ̄Γ, b = ΓᵀQ̄Φx, G = I_N ⊗ F_u, rhs = 1. The decision vector holds
/// u_{0..N−1}; the final input of the horizon is identically zero.
[[nodiscard]] CondensedQp build_condensed_qp(const LinearSystem& sys, const CostWeights& W, const InputPolytope& U, int N,
                                             const Vector& x);

/// ψ(k, x, u) = A^k x + Σ_{i<k} A^{k−1−i} B u[i]; u_stack holds inputs back to back.
[[nodiscard]] Vector open_loop_predict(const LinearSystem& sys, const Vector& x, const Vector& u_stack, int k);

/// J_N(x, u) = Σ_{k=0..N} ‖x_k‖²_Q + ‖u_k‖²_R with u_N = 0.
[[nodiscard]] double horizon_cost(const LinearSystem& sys, const CostWeights& W, const Vector& x, const Vector& u_stack);

struct MpcSolution {
    Vector u0;
    double value = 0.0; // J_N at the optimum
    Vector u_stack;
    int iterations = 0;
};

/// Receding-horizon law built on one prediction model. Prediction matrices
/// and the Hessian are formed once; each `solve` only rebuilds the linear term.
class MpcController {
public:
    MpcController(LinearSystem model, CostWeights W, InputPolytope U, int N);

    [[nodiscard]] MpcSolution solve(const Vector& x) const;

    [[nodiscard]] const LinearSystem& model() const noexcept { return model_; }
    [[nodiscard]] const CostWeights& weights() const noexcept { return W_; }
    [[nodiscard]] const InputPolytope& input_set() const noexcept { return U_; }
    [[nodiscard]] int horizon() const noexcept { return N_; }
    [[nodiscard]] const PredictionMatrices& prediction() const noexcept { return pm_; }
    [[nodiscard]] const Matrix& hessian() const noexcept { return H_; }

private:
    LinearSystem model_;
    CostWeights W_;
    InputPolytope U_;
    int N_;
    PredictionMatrices pm_;
    StackedWeights sw_;
    Matrix H_;
    Matrix linear_map_; // ΓᵀQ̄Φ
    Matrix G_;
};

[[nodiscard]] MpcSolution mpc_control_law(const LinearSystem& model, const CostWeights& W, const InputPolytope& U, int N,
                                          const Vector& x);

struct Trajectory {
    std::vector<Vector> states; // one more than inputs
    std::vector<Vector> inputs;
    std::vector<double> stage_costs;
    double total_cost = 0.0;
    bool converged = false; // false: stopped at t_max
    std::vector<double> values;  // V̂_N at every state, including the last
    std::vector<Vector> plans;   // optimal input stack at every state where an input was applied
    long solver_iterations = 0;
};

struct SimulationOptions {
    int t_max = 10000;
    double term_tol = 1e-12;
    double divergence_norm = 1e12;
};

/// Applies μ̂_N (computed on `model`) to `true_sys` from x0. Throws Divergence
/// when the state norm leaves the divergence bound.
[[nodiscard]] Trajectory closed_loop_simulate(const LinearSystem& true_sys, const LinearSystem& model,
                                              const CostWeights& W, const InputPolytope& U, int N, const Vector& x0,
                                              const SimulationOptions& options = {});

struct VInfinityEstimate {
    double value = 0.0; // converged closed-loop cost under the ideal law μ_N
    double v_N = 0.0;   // V_N(x0) at the final horizon (a lower approximation)
    int horizon = 0;
};

/// Doubles N from 8 until the closed-loop cost of μ_N changes by less than
/// rel_tol relative. Throws RoaMembershipUnknown past N = 512.
[[nodiscard]] VInfinityEstimate approx_v_infinity(const LinearSystem& true_sys, const CostWeights& W,
                                                  const InputPolytope& U, const Vector& x0, double rel_tol = 1e-6);

} // namespace cemppc

#pragma once

#include "cemppc/mpc.hpp"
#include "cemppc/numerics.hpp"
#include "cemppc/system_model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cemppc {

/// Norms of the estimated model that every certificate reads.
struct ModelNorms {
    int N = 0;
    double A_norm = 0.0;      // ‖Â‖₂
    double B_norm = 0.0;      // ‖B̂‖₂
    double Gamma_norm = 0.0;  // ‖Γ̂_N‖₂
    double Phi_norm = 0.0;    // ‖Φ̂_N‖₂
    double H_sigma_min = 0.0; // σ̲(Ĥ_N)
};

[[nodiscard]] ModelNorms model_norms(const LinearSystem& model, const CostWeights& W, int N);

/// Worst-case growth of the mismatch between powers of the true and estimated
/// dynamics, for i = 0..N. Error-consistent in (δ_A, δ_B).
struct MismatchPropagators {
    int N = 0;
    std::vector<double> gx; // gx[i] = (δ_A + ‖Â‖)^i − ‖Â‖^i
    std::vector<double> gu; // gu[i] = (δ_B + ‖B̂‖)·gx[i] + δ_B‖Â‖^i
    double gbar_x = 0.0;
    double gbar_u = 0.0;
    double theta_u = 0.0;
    double theta_xu = 0.0;

    [[nodiscard]] double g_x(int i, int n = 1) const;
    [[nodiscard]] double g_u(int i, int n = 1) const;
};

[[nodiscard]] MismatchPropagators mismatch_propagators(const LinearSystem& model, const UncertaintySpec& spec, int N,
                                                       double Qbar_sigma_max, double Gamma_hat_norm,
                                                       double Phi_hat_norm);

/// Bound on ‖u*_N(x) − û*_N(x)‖₂.
[[nodiscard]] double input_difference_bound(const MismatchPropagators& prop, double H_hat_sigma_min,
                                            const InputSetExtremes& extremes, int N, const Vector& x);

/// Bound on Σ_k ‖ψ(k) − ψ̂(k)‖² over the model-optimal input sequence.
[[nodiscard]] double multi_step_error_bound(const MismatchPropagators& prop, const InputSetExtremes& extremes, int N,
                                            const Vector& x);

/// Budget pairs (pᵢ, qᵢ) with 4pᵢqᵢ = 1.
struct Budget {
    double p1 = 0.5;
    double p2 = 0.5;
    double p3 = 0.5;

    void validate() const;
    [[nodiscard]] static double q(double p) { return 1.0 / (4.0 * p); }
};

/// Budget-independent ingredients of α_N and β_N.
struct ValueGapTerms {
    double Delta_du = 0.0;
    double Delta_psi = 0.0;
    double E_psi = 0.0;
    double E_u = 0.0;
    double E_psi_u = 0.0;
};

struct ValueGapBound {
    ValueGapTerms terms;
    Budget budget;
    double alpha_N = 0.0;
    double beta_N = 0.0;
};

[[nodiscard]] ValueGapTerms value_gap_terms(const MismatchPropagators& prop, const ModelNorms& norms,
                                            const CostWeights& W, const InputSetExtremes& extremes, const Vector& x);
[[nodiscard]] ValueGapBound apply_budget(const ValueGapTerms& terms, const Budget& budget);

[[nodiscard]] ValueGapBound value_gap_constants(const LinearSystem& model, const UncertaintySpec& spec,
                                                const CostWeights& W, const InputPolytope& U, int N, const Vector& x,
                                                const Budget& budget = {});

/// h(δ_A, δ_B) = δ_A²/σ̲_Q + δ_B²/σ̲_R
[[nodiscard]] double one_step_error_coeff(const UncertaintySpec& spec, const CostWeights& W);

/// Decay constants of a linear gain on the estimated model (Lyapunov route).
struct GainConstants {
    Matrix K;
    Matrix P;               // P − A_clᵀPA_cl = I
    double lambda_K = 1.0;  // √κ(P)
    double rho_K = 0.0;     // 1 − 1/σ̄_P
    double C_star_K = 1.0;
    double A_cl_norm = 0.0; // ‖Â + B̂K‖₂
};

/// Throws Instability when K does not stabilize the model.
[[nodiscard]] GainConstants gain_constants(const LinearSystem& model, const CostWeights& W, const Matrix& K);

inline constexpr double kEpsilonCap = 1e12;

struct StabilityCertificate {
    GainConstants gain;
    double eps_K = 0.0;
    bool eps_clamped = false; // ε_K was +∞ and got capped
    double gamma = 0.0;
    double rho_gamma = 0.0;
    int N0 = 0;
    double L_Vhat = 0.0;
    double M_Vhat = 0.0;
};

/// K from the DARE of (Â, B̂, Q, R).
[[nodiscard]] StabilityCertificate stability_certificate(const LinearSystem& model, const CostWeights& W,
                                                         const InputPolytope& U, double M_Vhat);

enum class BoundMode { Baseline, Extension };

[[nodiscard]] std::string to_string(BoundMode mode);
[[nodiscard]] BoundMode parse_bound_mode(const std::string& text);

struct DecreaseCertificate {
    BoundMode mode = BoundMode::Baseline;
    int N = 0;
    double h = 0.0;
    double G_N = 0.0;
    double omega_1 = 0.0;
    double omega_half = 0.0;
    double eta_N = 0.0;
    double xi_N = 0.0;
    double margin = 0.0;
    double terminal_coeff = 0.0; // 1 + ‖Â‖²r_Q, or C*_K̂ + r_Q‖Â_cl‖² in extension mode
    double eta_coeff = 0.0;      // η_N = eta_coeff·γρ_γ^{N−N₀}
    // extension mode only
    std::optional<GainConstants> K_hat;
};

/// For N < N₀ the terminal decay lemma gives nothing; η_N is reported as +∞.
[[nodiscard]] DecreaseCertificate decrease_certificate(const StabilityCertificate& cert, const LinearSystem& model,
                                                       const CostWeights& W, const UncertaintySpec& spec, int N,
                                                       BoundMode mode = BoundMode::Baseline,
                                                       const std::optional<Matrix>& K_hat = std::nullopt);

struct SufficientConditions {
    bool horizon_ok = false;
    double min_horizon = 0.0;
    double h_threshold = 0.0;
    bool mismatch_ok = false;
};

[[nodiscard]] SufficientConditions sufficient_conditions(const StabilityCertificate& cert,
                                                         const DecreaseCertificate& dec);

struct PerformanceBound {
    double alpha_N = 0.0;
    double beta_N = 0.0;
    double xi_N = 0.0;
    double eta_N = 0.0;
    double margin = 0.0;
    double v_inf = 0.0;
    double j_bound = kInf;
    bool stable = false;
};

[[nodiscard]] PerformanceBound performance_bound(const ValueGapBound& vg, const DecreaseCertificate& dec, double v_inf);

/// 13 log-spaced values per coordinate over [1e-3, 1e3].
[[nodiscard]] std::vector<Budget> default_budget_grid();

struct BudgetChoice {
    ValueGapBound value_gap;
    PerformanceBound bound;
};

/// The margin does not depend on the budget, so the grid point minimizing
/// (1+α_N)v_inf + β_N also minimizes j_bound. Ties go to the earliest point.
[[nodiscard]] BudgetChoice optimize_budget(const ValueGapTerms& terms, const DecreaseCertificate& dec, double v_inf,
                                           const std::vector<Budget>& grid);

/// Everything computed for one (model, N, x0).
struct CertificateBundle {
    int N = 0;
    ModelNorms norms;
    InputSetExtremes extremes;
    MismatchPropagators propagators;
    StabilityCertificate stability;
    ValueGapBound value_gap;
    DecreaseCertificate decrease;
    SufficientConditions conditions;
    PerformanceBound performance;
};

enum class BudgetPolicy { Default, Optimize };

struct CertifyOptions {
    BoundMode mode = BoundMode::Baseline;
    BudgetPolicy budget = BudgetPolicy::Default;
    std::optional<Matrix> K_hat;   // extension mode; defaults to the DARE gain
    std::optional<double> M_Vhat;  // defaults to V̂_N(x0)
};

[[nodiscard]] CertificateBundle certify(const LinearSystem& model, const CostWeights& W, const InputPolytope& U,
                                        const UncertaintySpec& spec, int N, const Vector& x0, double v_inf,
                                        const CertifyOptions& options = {});

/// Flat JSON object; +∞ is written as the string "inf".
[[nodiscard]] std::string certificate_json(const CertificateBundle& bundle);

} // namespace cemppc

#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string_view>

namespace cemppc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Tolerances and iteration caps shared by the dense kernels. Defaults are the
/// values every other module relies on; override only for experiments.
struct NumericsSettings {
    double symmetry_tol = 1e-12;
    int jacobi_max_sweeps = 100;
    double dare_tol = 1e-11;
    int dare_max_iter = 100000;
};

namespace numerics {

/// Throws InvalidInput if any entry is NaN or infinite.
void require_finite(const Matrix& M, std::string_view what);
void require_finite(const Vector& v, std::string_view what);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
[[nodiscard]] Vector symmetric_eigenvalues(const Matrix& S, const NumericsSettings& settings = {});

/// Largest singular value, from the Jacobi spectrum of MᵀM (or MMᵀ, whichever is smaller).
[[nodiscard]] double spectral_norm(const Matrix& M, const NumericsSettings& settings = {});

/// max |eigenvalue| of a square matrix.
[[nodiscard]] double spectral_radius(const Matrix& M);

struct EigenExtremes {
    double sigma_min;
    double sigma_max;
    double ratio; // sigma_max / sigma_min
};

/// Extreme eigenvalues of a symmetric positive definite matrix. Throws Domain
/// when M is asymmetric beyond tolerance or not positive definite.
[[nodiscard]] EigenExtremes sym_eig_extremes(const Matrix& M, const NumericsSettings& settings = {});

/// Solves P - A_clᵀ P A_cl = I. Throws Instability when ρ(A_cl) >= 1.
[[nodiscard]] Matrix solve_dlyap(const Matrix& A_cl);

struct DareSolution {
    Matrix P;
    Matrix K; // u = K x, i.e. K = -(R + BᵀPB)⁻¹ BᵀPA
    int iterations = 0;
};

/// Stabilizing DARE solution by fixed-point Riccati recursion from P = Q.
/// Throws NonStabilizable when the recursion does not settle within the cap
/// or the resulting closed loop is not Schur.
[[nodiscard]] DareSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                                      const NumericsSettings& settings = {});

/// ‖AᵀPA − P − AᵀPB(R+BᵀPB)⁻¹BᵀPA + Q‖_F
[[nodiscard]] double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                                   const Matrix& P);

/// I_count ⊗ M
[[nodiscard]] Matrix block_diagonal(const Matrix& M, int count);

} // namespace numerics
} // namespace cemppc
